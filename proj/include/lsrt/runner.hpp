#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lsrt/bifurcation.hpp"
#include "lsrt/clusters.hpp"
#include "lsrt/compatibility.hpp"
#include "lsrt/lattice.hpp"
#include "lsrt/series.hpp"
#include "lsrt/trees.hpp"

namespace lsrt {

using json = nlohmann::json;

// Raised for malformed or inconsistent configuration; path names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct RunConfig {
  std::string command = "verify-all";
  std::uint64_t seed = 0;
  int jobs = 1;

  std::string family = "NLS";
  int D = 2;
  std::optional<double> mu;  // default: golden for NLS/NLW, 0 for NLB
  std::string boundary = "dirichlet";
  std::string nonlinearity = "cubic";  // or "generic"
  double eps0 = 1e-2;

  int radius = 8;
  double eps = 1e-3;
  int grid = 101;

  MultiscaleParams ms;
  double alpha = 0.5;
  double C1 = 1e3;
  double C0 = 1.0;

  int Lambda = 12;
  int K_max = -1;
  int K_tree = -1;
  double tol = 1e-10;

  int measure_grid = 2000;
  int windows = 7;

  int bif_radius = 3;
  int max_N0 = 2;
  std::string convention = "sign-corrected";

  std::vector<std::string> exports;
};

namespace detail {

inline void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& keys) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
}

template <class T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path.empty() ? key : path + "." + key, "wrong type");
  }
}

}  // namespace detail

inline const std::vector<std::string>& run_commands() {
  static const std::vector<std::string> c = {"classify", "clusters", "bifurcate", "solve", "trees", "measure",
                                             "verify-all"};
  return c;
}

inline void validate(const RunConfig& c) {
  using std::to_string;
  if (std::find(run_commands().begin(), run_commands().end(), c.command) == run_commands().end())
    throw ConfigError("command", "unknown command " + c.command);
  if (c.family != "NLS" && c.family != "NLW" && c.family != "NLB") throw ConfigError("spec.family", "NLS, NLW or NLB");
  if (c.D < 1 || c.D > kMaxDim) throw ConfigError("spec.D", "must be 1.." + to_string(kMaxDim));
  if (c.boundary != "dirichlet" && c.boundary != "periodic") throw ConfigError("spec.boundary", "dirichlet or periodic");
  if (c.nonlinearity != "cubic" && c.nonlinearity != "generic")
    throw ConfigError("spec.nonlinearity", "cubic or generic");
  if (c.nonlinearity == "generic" && c.family != "NLS") throw ConfigError("spec.nonlinearity", "generic needs NLS");
  if (!(c.eps0 > 0)) throw ConfigError("spec.eps0", "must be positive");
  if (c.mu && *c.mu < 0) throw ConfigError("spec.mu", "must be nonnegative");
  if (c.family == "NLB" && c.mu && *c.mu != 0) throw ConfigError("spec.mu", "beam family has mu = 0");
  if (!(c.ms.gamma > 0 && c.ms.gamma < c.ms.gamma_bar))
    throw ConfigError("constants.gamma", "constraint gamma < gamma_bar violated");
  if (!(c.ms.gamma_bar < 0.25)) throw ConfigError("constants.gamma_bar", "constraint gamma_bar < 1/4 violated");
  if (!(c.ms.beta > 0 && c.ms.beta < c.alpha)) throw ConfigError("constants.beta", "constraint beta < alpha violated");
  if (!(c.ms.xi > 0)) throw ConfigError("constants.xi", "constraint xi > 0 violated");
  if (!(c.ms.tau > 0)) throw ConfigError("constants.tau", "must be positive");
  if (!(c.ms.tau1 > 0)) throw ConfigError("constants.tau1", "must be positive");
  if (!(c.ms.C2 > 0)) throw ConfigError("constants.C2", "must be positive");
  if (!(c.C1 > 0)) throw ConfigError("constants.C1", "must be positive");
  if (!(c.C0 > 0)) throw ConfigError("constants.C0", "must be positive");
  if (c.radius < 1) throw ConfigError("shell.radius", "must be positive");
  if (!(c.eps >= 0 && c.eps <= c.eps0)) throw ConfigError("window.eps", "must lie in [0, eps0]");
  if (c.grid < 2) throw ConfigError("window.grid", "at least 2 points");
  if (c.Lambda < 1) throw ConfigError("solver.Lambda", "must be positive");
  if (!(c.tol > 0)) throw ConfigError("solver.tol", "must be positive");
  if (c.measure_grid < 1) throw ConfigError("measure.gridsize", "must be positive");
  if (c.windows < 1) throw ConfigError("measure.windows", "must be positive");
  if (c.bif_radius < 1) throw ConfigError("bifurcate.radius", "must be positive");
  if (c.max_N0 < 1) throw ConfigError("bifurcate.max_N0", "must be positive");
  if (c.convention != "sign-corrected" && c.convention != "literal")
    throw ConfigError("bifurcate.convention", "sign-corrected or literal");
  if (c.jobs < 1) throw ConfigError("jobs", "must be positive");
  for (const auto& f : c.exports)
    if (f != "json-lines" && f != "csv" && f != "plot-data") throw ConfigError("export", "unknown format " + f);
}

inline RunConfig parse_config(const json& j) {
  using detail::read;
  using detail::reject_unknown;
  RunConfig c;
  reject_unknown(j, "", {"command", "seed", "jobs", "spec", "shell", "window", "constants", "solver", "measure",
                         "bifurcate", "export"});
  read(j, "", "command", c.command);
  read(j, "", "seed", c.seed);
  read(j, "", "jobs", c.jobs);
  if (j.contains("spec")) {
    const auto& s = j["spec"];
    reject_unknown(s, "spec", {"family", "D", "mu", "boundary", "nonlinearity", "eps0"});
    read(s, "spec", "family", c.family);
    read(s, "spec", "D", c.D);
    if (s.contains("mu")) {
      if (s["mu"].is_string()) {
        if (s["mu"] != "golden") throw ConfigError("spec.mu", "number or \"golden\"");
        c.mu = golden_mu();
      } else {
        double m = 0;
        read(s, "spec", "mu", m);
        c.mu = m;
      }
    }
    read(s, "spec", "boundary", c.boundary);
    read(s, "spec", "nonlinearity", c.nonlinearity);
    read(s, "spec", "eps0", c.eps0);
  }
  if (j.contains("shell")) {
    reject_unknown(j["shell"], "shell", {"radius"});
    read(j["shell"], "shell", "radius", c.radius);
  }
  if (j.contains("window")) {
    reject_unknown(j["window"], "window", {"eps", "grid"});
    read(j["window"], "window", "eps", c.eps);
    read(j["window"], "window", "grid", c.grid);
  }
  if (j.contains("constants")) {
    const auto& k = j["constants"];
    reject_unknown(k, "constants", {"gamma", "gamma_bar", "tau", "tau1", "xi", "alpha", "beta", "C1", "C2", "C0"});
    read(k, "constants", "gamma", c.ms.gamma);
    read(k, "constants", "gamma_bar", c.ms.gamma_bar);
    read(k, "constants", "tau", c.ms.tau);
    read(k, "constants", "tau1", c.ms.tau1);
    read(k, "constants", "xi", c.ms.xi);
    read(k, "constants", "alpha", c.alpha);
    read(k, "constants", "beta", c.ms.beta);
    read(k, "constants", "C1", c.C1);
    read(k, "constants", "C2", c.ms.C2);
    read(k, "constants", "C0", c.C0);
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    reject_unknown(s, "solver", {"Lambda", "K_max", "K_tree", "tol"});
    read(s, "solver", "Lambda", c.Lambda);
    read(s, "solver", "K_max", c.K_max);
    read(s, "solver", "K_tree", c.K_tree);
    read(s, "solver", "tol", c.tol);
  }
  if (j.contains("measure")) {
    reject_unknown(j["measure"], "measure", {"gridsize", "windows"});
    read(j["measure"], "measure", "gridsize", c.measure_grid);
    read(j["measure"], "measure", "windows", c.windows);
  }
  if (j.contains("bifurcate")) {
    reject_unknown(j["bifurcate"], "bifurcate", {"radius", "max_N0", "convention"});
    read(j["bifurcate"], "bifurcate", "radius", c.bif_radius);
    read(j["bifurcate"], "bifurcate", "max_N0", c.max_N0);
    read(j["bifurcate"], "bifurcate", "convention", c.convention);
  }
  read(j, "", "export", c.exports);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

// Full snapshot with defaults filled in; jobs is left out since it does not change results.
inline json config_json(const RunConfig& c) {
  json s = {{"family", c.family}, {"D", c.D}, {"boundary", c.boundary}, {"nonlinearity", c.nonlinearity},
            {"eps0", c.eps0}};
  if (c.mu) s["mu"] = *c.mu;
  return {{"command", c.command},
          {"seed", c.seed},
          {"spec", s},
          {"shell", {{"radius", c.radius}}},
          {"window", {{"eps", c.eps}, {"grid", c.grid}}},
          {"constants",
           {{"gamma", c.ms.gamma},
            {"gamma_bar", c.ms.gamma_bar},
            {"tau", c.ms.tau},
            {"tau1", c.ms.tau1},
            {"xi", c.ms.xi},
            {"alpha", c.alpha},
            {"beta", c.ms.beta},
            {"C1", c.C1},
            {"C2", c.ms.C2},
            {"C0", c.C0}}},
          {"solver", {{"Lambda", c.Lambda}, {"K_max", c.K_max}, {"K_tree", c.K_tree}, {"tol", c.tol}}},
          {"measure", {{"gridsize", c.measure_grid}, {"windows", c.windows}}},
          {"bifurcate", {{"radius", c.bif_radius}, {"max_N0", c.max_N0}, {"convention", c.convention}}},
          {"export", c.exports}};
}

inline EquationSpec make_spec(const RunConfig& c) {
  const Family f = c.family == "NLS" ? Family::NLS : c.family == "NLW" ? Family::NLW : Family::NLB;
  const Boundary b = c.boundary == "dirichlet" ? Boundary::Dirichlet : Boundary::Periodic;
  EquationSpec s;
  if (c.nonlinearity == "generic") {
    s = generic_cubic_spec(c.D, 0.5, b);
    if (c.mu) s.mu = *c.mu;
  } else {
    s = cubic_spec(f, c.D, c.mu ? *c.mu : (f == Family::NLB ? 0.0 : golden_mu()), b);
  }
  s.eps0 = c.eps0;
  s.validate();
  return s;
}

inline SeriesOptions series_options(const RunConfig& c, int Lambda) {
  SeriesOptions o;
  o.Lambda = Lambda;
  o.grid_points = c.grid;
  o.ms = c.ms;
  return o;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

// Hash of the canonical serialization: everything except "hash" and "timings".
inline std::string record_hash(const json& rec) {
  json core = rec;
  core.erase("hash");
  core.erase("timings");
  return sha256_hex(core.dump());
}

// Runs f(i) for i in [0, n) on up to jobs threads; each index is independent.
template <class F>
void parallel_for(int n, int jobs, F&& f) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += jobs) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline json table(std::vector<std::string> columns) { return {{"columns", columns}, {"rows", json::array()}}; }

inline json plot_json(const std::vector<std::pair<double, double>>& xy, const std::string& header) {
  json p = {{"header", header}, {"x", json::array()}, {"y", json::array()}};
  for (auto [x, y] : xy) {
    p["x"].push_back(x);
    p["y"].push_back(y);
  }
  return p;
}

struct Outcome {
  json summary = json::object();
  json tables = json::object();
  json plots = json::object();
  json checks = json::object();
};

inline Outcome run_classify(const RunConfig& c) {
  const auto spec = make_spec(c);
  const auto grid = uniform_grid(spec.eps0, c.grid);
  Outcome o;
  o.tables["labels"] = table({"radius", "Q", "O", "R", "ambiguous"});
  std::map<int, std::array<int, 4>> by;
  for (const auto& nu : enumerate_shell(spec, c.radius)) {
    auto cl = classify(spec, nu, grid);
    auto& row = by[nu.size()];
    ++row[static_cast<int>(cl.label)];
    row[3] += cl.boundary_ambiguous;
  }
  std::array<int, 4> tot{};
  for (const auto& [r, row] : by) {
    o.tables["labels"]["rows"].push_back({r, row[0], row[1], row[2], row[3]});
    for (int i = 0; i < 4; ++i) tot[i] += row[i];
  }
  o.summary = {{"Q", tot[0]}, {"O", tot[1]}, {"R", tot[2]}, {"ambiguous", tot[3]}};
  o.checks["kernel_nonempty"] = tot[0] > 0;
  return o;
}

inline Outcome run_clusters(const RunConfig& c) {
  const auto spec = make_spec(c);
  const auto grid = uniform_grid(spec.eps0, c.grid);
  std::vector<SeparationReport> reps(grid.size());
  parallel_for(static_cast<int>(grid.size()), c.jobs, [&](int i) {
    reps[i] = separation_report(partition(spec, grid[i], c.radius, c.ms.beta, c.ms.C2), c.alpha, c.C1);
  });
  Outcome o;
  o.tables["separation"] = table({"eps", "classes", "nonsingleton", "max_class_size", "C1", "ok"});
  std::vector<std::pair<double, double>> sc;
  bool ok = true;
  double C1 = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& r = reps[i];
    o.tables["separation"]["rows"].push_back({grid[i], r.classes, r.nonsingleton, r.max_class_size, r.C1, r.ok});
    sc.emplace_back(grid[i], r.C1);
    ok = ok && r.ok;
    C1 = std::max(C1, r.C1);
  }
  o.plots["separation"] = plot_json(sc, "eps C1");
  o.summary = {{"samples", grid.size()}, {"fitted_C1", C1}};
  o.checks["separation"] = ok;
  return o;
}

inline Outcome run_bifurcate(const RunConfig& c) {
  const auto spec = make_spec(c);
  const auto conv = c.convention == "literal" ? SignConvention::Literal : SignConvention::SignCorrected;
  Outcome o;
  o.tables["supports"] = table({"support", "admissible", "residual_zero", "nonzero_entries"});
  bool all = true;
  int accepted = 0;
  for (const auto& r : search_supports(spec.family, spec.D, c.bif_radius, c.max_N0, conv)) {
    std::string s;
    for (const auto& m : r.support) s += Mode{0, m}.str(spec.D).substr(3);
    o.tables["supports"]["rows"].push_back({s, r.admissible, r.residual_zero, r.residual_nonzero});
    if (r.admissible) {
      ++accepted;
      all = all && r.residual_zero;
    }
  }
  o.summary = {{"accepted", accepted}, {"single_mode_q0", single_mode_q0(spec.family, spec.D).to_string()}};
  o.checks["accepted_residual_zero"] = all;
  return o;
}

inline Outcome run_solve(const RunConfig& c) {
  const auto spec = make_spec(c);
  Outcome o;
  auto nt = newton_oracle(spec, c.eps, c.Lambda, c.tol);
  const auto g = gevrey_fit(nt.u);
  o.summary["newton"] = {{"converged", nt.converged}, {"diverged", nt.diverged}, {"iterations", nt.iterations},
                         {"rejections", nt.rejections}, {"residual", nt.residual}};
  o.summary["gevrey"] = {{"K", g.K}, {"kappa", g.kappa}, {"r2", g.r2}, {"points", g.points}};
  o.plots["gevrey"] = plot_json(g.data, "sqrt|nu| log|u_nu|");
  o.checks["newton_residual"] = nt.converged && nt.residual < c.tol;
  const int K = c.K_max < 0 ? spec.N + 6 : c.K_max;
  FixpointOptions fo;
  fo.K_max = std::min(K, spec.N + 2);
  fo.K_tree = c.K_tree;
  const int Ls = std::min(c.Lambda, 8);
  auto fp = counterterm_fixpoint(spec, c.eps, series_options(c, Ls), fo);
  o.summary["fixpoint"] = {{"excluded", fp.excluded}, {"iterations", fp.iterations}, {"ratio", fp.ratio},
                           {"C0_min", fp.C0}, {"reason", fp.reason}};
  if (fp.witness) o.summary["fixpoint"]["witness"] = fp.witness->str(spec.D);
  if (fp.excluded) return o;
  o.checks["fixpoint_contraction"] = fp.ratio < 0.5;
  o.checks["fixpoint_in_domain"] = fp.C0 <= c.C0;
  SeriesContext ctx(spec, c.eps, fp.M, series_options(c, Ls));
  auto st = run_recursion(ctx, fp.L, K);
  // the comparison needs a reference sharper than the requested tolerance
  const auto ref = newton_oracle(spec, c.eps, Ls, 1e-14);
  o.tables["series"] = table({"K", "sup_diff_newton", "galerkin_residual"});
  double prev = 1e300;
  bool dec = true;
  for (int k = 0; k <= K; k += spec.N) {
    const Field s = partial_sum(st, ctx.eta(), k);
    const double d = s.sup_diff(ref.u);
    o.tables["series"]["rows"].push_back({k, d, residual(spec, s, c.eps, 0).galerkin});
    dec = dec && (d < prev || d < 1e-11);
    prev = d;
  }
  o.summary["dual_path_defect"] = st.dual_path_defect;
  o.checks["series_approaches_newton"] = dec;
  return o;
}

inline Outcome run_trees(const RunConfig& c) {
  const auto spec = make_spec(c);
  const int K = c.K_max < 0 ? spec.N + 2 : c.K_max;
  const int L = std::min(c.Lambda, 8);
  SeriesContext ctx(spec, c.eps, BlockMatrix{}, series_options(c, L));
  auto Lc = counterterms(ctx, K, c.K_tree);
  auto st = run_recursion(ctx, Lc, K);
  Outcome o;
  o.tables["orders"] = table({"k", "trees", "defect"});
  double worst = 0, sa = 0;
  for (int k = 1; k <= K; ++k) {
    std::size_t n = 0;
    auto sums = theta_sums(ctx, k, &n, c.K_tree);
    double d = 0;
    for (const auto& nu : ctx.modes())
      for (int s : {1, -1}) {
        auto it = sums.find({nu, s});
        d = std::max(d, std::abs((it == sums.end() ? cplx{} : it->second) - st.u[k].get_sigma(nu, s)));
      }
    o.tables["orders"]["rows"].push_back({k, n, d});
    worst = std::max(worst, d);
  }
  for (const auto& [r, byh] : Lc.by_order) sa = std::max(sa, assembled_counterterm(ctx, Lc, r).self_adjoint_defect());
  o.summary = {{"Lambda", L}, {"K", K}, {"defect", worst}, {"self_adjoint_defect", sa}, {"blocks", ctx.blocks().blocks().size()}};
  o.checks["tree_recursion"] = worst < 1e-9;
  o.checks["counterterm_self_adjoint"] = sa < 1e-12;
  return o;
}

inline Outcome run_measure(const RunConfig& c) {
  const auto spec = make_spec(c);
  const auto O = measure_shell(spec, c.Lambda);
  std::vector<char> ok(c.measure_grid);
  parallel_for(c.measure_grid, c.jobs,
               [&](int i) { ok[i] = measure_point(spec, O, measure_eps(spec, i, c.measure_grid), c.ms).ok; });
  auto m = summarize_measure(spec, ok, c.windows);
  Outcome o;
  o.tables["windows"] = table({"j", "window", "points", "fraction"});
  std::vector<std::pair<double, double>> xy;
  for (std::size_t j = 0; j < m.windows.size(); ++j) {
    o.tables["windows"]["rows"].push_back({j, m.windows[j], m.counts[j], m.fractions[j]});
    xy.emplace_back(m.windows[j], m.fractions[j]);
  }
  o.plots["measure"] = plot_json(xy, std::string("window fraction monotone=") + (m.monotone ? "true" : "false"));
  o.summary = {{"monotone", m.monotone}, {"smallest_window_fraction", m.fractions.back()}, {"O_modes", O.size()}};
  o.checks["monotone"] = m.monotone;
  return o;
}

inline Outcome run_parity(const RunConfig& c) {
  std::mt19937_64 rng(c.seed);
  std::uniform_int_distribution<int> size(1, 8);
  const std::vector<std::vector<long>> lists = {{2}, {2, 3}, {3, 5, 7}};
  int good = 0;
  const int n = 100;
  for (int t = 0; t < n; ++t) {
    auto A = random_parity_block(rng, size(rng), lists[t % 3]);
    good += parity_invertible(A) && !det_exact(A, 64).is_zero();
  }
  Outcome o;
  o.summary = {{"blocks", n}, {"invertible", good}};
  o.checks["parity_invertible"] = good == n;
  return o;
}

inline Outcome run_command(const RunConfig& c, const std::string& cmd);

inline Outcome run_verify_all(const RunConfig& c) {
  Outcome o;
  const bool series_ok = c.family == "NLS" && c.boundary == "dirichlet";
  for (const std::string cmd : {"classify", "clusters", "bifurcate", "solve", "trees", "measure", "parity"}) {
    if ((cmd == "solve" || cmd == "trees") && !series_ok) continue;
    Outcome sub = cmd == "parity" ? run_parity(c) : run_command(c, cmd);
    o.summary[cmd] = sub.summary;
    for (auto& [k, v] : sub.tables.items()) o.tables[cmd + "." + k] = v;
    for (auto& [k, v] : sub.plots.items()) o.plots[cmd + "." + k] = v;
    for (auto& [k, v] : sub.checks.items()) o.checks[cmd + "." + k] = v;
  }
  return o;
}

inline Outcome run_command(const RunConfig& c, const std::string& cmd) {
  if (cmd == "classify") return run_classify(c);
  if (cmd == "clusters") return run_clusters(c);
  if (cmd == "bifurcate") return run_bifurcate(c);
  if (cmd == "solve") return run_solve(c);
  if (cmd == "trees") return run_trees(c);
  if (cmd == "measure") return run_measure(c);
  if (cmd == "verify-all") return run_verify_all(c);
  throw ConfigError("command", "unknown command " + cmd);
}

inline json run(const RunConfig& c) {
  validate(c);
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = run_command(c, c.command);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json rec = {{"command", c.command},
              {"config", config_json(c)},
              {"outputs", {{"summary", o.summary}, {"tables", o.tables}, {"plots", o.plots}}},
              {"checks", o.checks}};
  rec["hash"] = record_hash(rec);
  rec["timings"] = {{"total_seconds", secs}};
  return rec;
}

inline bool all_checks_pass(const json& rec) {
  for (const auto& [k, v] : rec.at("checks").items())
    if (!v.get<bool>()) return false;
  return true;
}

inline std::filesystem::path persist(const json& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto p = dir / (rec.at("hash").get<std::string>() + ".json");
  std::ofstream(p) << rec.dump(2) << "\n";
  return p;
}

inline json import_record(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail("record-missing", p.string());
  return json::parse(in);
}

inline std::string csv_cell(const json& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return v.dump();
}

// Writes files for one format and returns their paths.
inline std::vector<std::filesystem::path> export_record(const json& rec, const std::string& format,
                                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string base = rec.at("hash").get<std::string>();
  std::vector<std::filesystem::path> out;
  if (format == "json-lines") {
    auto p = dir / (base + ".jsonl");
    std::ofstream(p) << rec.dump() << "\n";
    out.push_back(p);
  } else if (format == "csv") {
    for (const auto& [name, t] : rec.at("outputs").at("tables").items()) {
      auto p = dir / (base + "." + name + ".csv");
      std::ofstream f(p);
      const auto& cols = t.at("columns");
      for (std::size_t i = 0; i < cols.size(); ++i) f << (i ? "," : "") << csv_cell(cols[i]);
      f << "\n";
      for (const auto& row : t.at("rows")) {
        for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << csv_cell(row[i]);
        f << "\n";
      }
      out.push_back(p);
    }
  } else if (format == "plot-data") {
    for (const auto& [name, pl] : rec.at("outputs").at("plots").items()) {
      auto p = dir / (base + "." + name + ".dat");
      std::ofstream f(p);
      f << "# " << pl.at("header").get<std::string>() << "\n";
      f << std::setprecision(17);
      for (std::size_t i = 0; i < pl.at("x").size(); ++i)
        f << pl["x"][i].get<double>() << " " << pl["y"][i].get<double>() << "\n";
      out.push_back(p);
    }
  } else {
    fail("unknown-format", format);
  }
  return out;
}

inline void print_summary(std::ostream& os, const json& rec) {
  os << rec.at("command").get<std::string>() << "  " << rec.at("hash").get<std::string>().substr(0, 16) << "\n";
  std::function<void(const json&, const std::string&)> flat = [&](const json& j, const std::string& pre) {
    for (const auto& [k, v] : j.items()) {
      if (v.is_object()) {
        flat(v, pre + k + ".");
      } else {
        os << "  " << std::left << std::setw(44) << pre + k << " " << v.dump() << "\n";
      }
    }
  };
  flat(rec.at("outputs").at("summary"), "");
  for (const auto& [k, v] : rec.at("checks").items())
    os << "  " << std::left << std::setw(44) << k << " " << (v.get<bool>() ? "PASS" : "FAIL") << "\n";
}

}  // namespace lsrt
