#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lsrt/clusters.hpp"
#include "lsrt/field.hpp"
#include "lsrt/multiscale.hpp"

namespace lsrt {

// Class membership of the small P modes of a fixed universe along an eps grid.
class ResonanceOracle {
 public:
  ResonanceOracle() = default;
  ResonanceOracle(const EquationSpec& spec, const std::vector<Mode>& modes, const std::vector<double>& grid, double beta,
                  double C2) {
    std::vector<Mode> pm;
    for (const auto& nu : modes)
      if (!in_kernel(spec, nu)) pm.push_back(nu);
    std::string last;
    for (double e : grid) {
      auto part = group_modes(small_modes(spec, pm, e), beta, C2);
      auto fp = part.fingerprint(spec.D);
      if (fp == last) continue;
      last = fp;
      std::unordered_map<std::uint64_t, int> cls;
      for (std::size_t j = 0; j < part.classes.size(); ++j)
        for (const auto& a : part.classes[j]) {
          cls[a.key()] = static_cast<int>(j);
          for (const auto& b : part.classes[j]) pairs_.insert(pair_key(a, b));
        }
      classes_.push_back(std::move(cls));
    }
  }
  bool pair(const Mode& a, const Mode& b) const { return pairs_.count(pair_key(a, b)) > 0; }
  bool set(const std::vector<Mode>& s) const {
    if (s.empty()) return false;
    for (const auto& cls : classes_) {
      auto it = cls.find(s.front().key());
      if (it == cls.end()) continue;
      bool all = true;
      for (const auto& nu : s) {
        auto jt = cls.find(nu.key());
        if (jt == cls.end() || jt->second != it->second) {
          all = false;
          break;
        }
      }
      if (all) return true;
    }
    return false;
  }
  std::size_t pairs() const { return pairs_.size(); }

 private:
  static PairKey pair_key(const Mode& a, const Mode& b) {
    auto x = a.key(), y = b.key();
    return x < y ? PairKey{x, y} : PairKey{y, x};
  }
  std::unordered_set<PairKey, PairKeyHash> pairs_;
  std::vector<std::unordered_map<std::uint64_t, int>> classes_;
};

struct SeriesOptions {
  int Lambda = 8;
  int K = 4;
  int grid_points = 101;
  MultiscaleParams ms;
};

inline void require_case_one(const EquationSpec& spec) {
  if (spec.family != Family::NLS) fail("unsupported-family", "series and trees cover the first-order-in-time family");
  check_series_terms(spec);
}

// NLS with |u|^2 u + c u^3 + 3c u conj(u)^2 and mu close to an integer, so that O is populated for small eps.
inline EquationSpec generic_cubic_spec(int D, double c = 0.5, Boundary b = Boundary::Dirichlet) {
  const double mu = D == 1 ? 2.95 : 1.95;
  EquationSpec s = cubic_spec(Family::NLS, D, mu, b);
  s.terms = {Term{2, 1, {}, 1.0}, Term{3, 0, {}, c}, Term{1, 2, {}, 3 * c}};
  return s;
}

// Base solution on the kernel: single fundamental mode, odd-extended under Dirichlet conditions.
inline Field base_solution(const EquationSpec& spec, int R) {
  require_case_one(spec);
  Field e(spec.D, R);
  Mode fund{1, {}};
  for (int i = 0; i < spec.D; ++i) fund.m[i] = 1;
  if (!in_kernel(spec, fund)) fail("no-base-solution", "fundamental mode is not in the kernel");
  if (spec.boundary == Boundary::Dirichlet)
    for (const auto& p : dirichlet_orbit(fund, spec.D)) e.set(p.nu, p.parity);
  else
    e.set(fund, 1.0);
  // leading terms are homogeneous of degree N+1: c = c^{N+1} g
  const cplx g = nonlinearity(spec, e, 0.0, R).get(fund);
  if (std::abs(g.imag()) > 1e-12 * std::abs(g) || !(g.real() > 0))
    fail("no-base-solution", "self-coupling of the fundamental mode is not positive");
  e *= std::pow(g.real(), -1.0 / spec.N);
  return e;
}

// L^{(r) s s'}_{h,h1; nu nu'} by order r and scale pair (h, h1).
struct Counterterms {
  std::map<int, std::map<std::pair<int, int>, BlockMatrix>> by_order;

  bool empty() const { return by_order.empty(); }
  // Full matrix sum_{h,h1} chi_h(x_nu) chi_{h1}(x_nu') L_{h,h1}, given the scale weights of each mode.
  template <class Weight>
  BlockMatrix assembled(int r, const Weight& chi) const {
    BlockMatrix out;
    auto it = by_order.find(r);
    if (it == by_order.end()) return out;
    for (const auto& [hh, L] : it->second)
      for (const auto& [k, v] : L.entries()) {
        const double w = chi(hh.first, k.first) * chi(hh.second, k.second);
        if (w != 0) out.add(k.first, k.second, w * v);
      }
    return out;
  }
};

// Everything fixed by (spec, eps, M): lattice, labels, blocks, base solution and kernel pseudo-inverse.
class SeriesContext {
 public:
  SeriesContext(const EquationSpec& spec, double eps, const BlockMatrix& M, const SeriesOptions& opt)
      : spec_(spec), opt_(opt), eps_(eps), sf_(opt.ms.gamma, opt.ms.gamma_bar) {
    require_case_one(spec);
    spec.validate();
    opt.ms.validate();
    check_window(spec, eps);
    eta_ = std::pow(eps, 1.0 / spec.N);
    modes_ = full_ball(spec.D, opt.Lambda);
    for (const auto& nu : modes_) {
      SetLabel l = in_kernel(spec, nu) ? SetLabel::Q : in_O(spec, nu) ? SetLabel::O : SetLabel::R;
      label_[nu.key()] = l;
      if (l == SetLabel::Q) Q_.push_back(nu);
    }
    bs_ = BlockSystem(spec, modes_, eps, M, opt.ms);
    auto grid = uniform_grid(spec.eps0, opt.grid_points);
    grid.push_back(eps);
    res_ = ResonanceOracle(spec, modes_, grid, opt.ms.beta, opt.ms.C2);
    q0_ = base_solution(spec, opt.Lambda);
    build_J();
  }

  const EquationSpec& spec() const { return spec_; }
  const SeriesOptions& options() const { return opt_; }
  double eps() const { return eps_; }
  double eta() const { return eta_; }
  int Lambda() const { return opt_.Lambda; }
  const std::vector<Mode>& modes() const { return modes_; }
  const std::vector<Mode>& Q() const { return Q_; }
  SetLabel label(const Mode& nu) const {
    auto it = label_.find(nu.key());
    if (it == label_.end()) fail("mode-unknown", nu.str(spec_.D));
    return it->second;
  }
  bool inside(const Mode& nu) const { return nu.size() <= opt_.Lambda; }
  double delta(const Mode& nu) const { return bs_.delta(nu); }
  const BlockSystem& blocks() const { return bs_; }
  const ScaleFunctions& scales() const { return sf_; }
  const ResonanceOracle& resonance() const { return res_; }
  const Field& q0() const { return q0_; }
  // small: an O mode carrying a block at this eps
  bool small(const Mode& nu) const { return bs_.block_of(nu) >= 0; }
  double x(const Mode& nu) const { return bs_.x(nu); }
  double chi(int h, const Mode& nu) const { return small(nu) ? sf_.chi_h(h, x(nu)) : 0.0; }

  int q_index(const Mode& nu) const {
    auto it = qpos_.find(nu.key());
    return it == qpos_.end() ? -1 : it->second;
  }
  cplx jplus(const Mode& a, int sa, const Mode& b, int sb) const {
    const int i = q_index(a), j = q_index(b);
    if (i < 0 || j < 0) return 0.0;
    return Jplus_(2 * i + sigma_index(sa), 2 * j + sigma_index(sb));
  }
  const CMat& J() const { return J_; }
  const CMat& Jplus() const { return Jplus_; }

 private:
  void build_J() {
    const int R = opt_.Lambda;
    auto [K1, K2] = linearization_kernels(spec_, q0_, 0.0, 2 * R);
    const int n = static_cast<int>(Q_.size());
    for (int i = 0; i < n; ++i) qpos_[Q_[i].key()] = i;
    // delta_q = eps n_q on the kernel
    J_ = CMat::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) J_(2 * i, 2 * i) = J_(2 * i + 1, 2 * i + 1) = static_cast<double>(Q_[i].n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const cplx k1 = K1.get(Q_[i] - Q_[j]), k2 = K2.get(Q_[i] + Q_[j]);
        J_(2 * i, 2 * j) -= k1;
        J_(2 * i, 2 * j + 1) -= k2;
        J_(2 * i + 1, 2 * j) -= std::conj(k2);
        J_(2 * i + 1, 2 * j + 1) -= std::conj(k1);
      }
    Eigen::CompleteOrthogonalDecomposition<CMat> cod(J_);
    cod.setThreshold(1e-10);
    Jplus_ = cod.pseudoInverse();
  }

  EquationSpec spec_;
  SeriesOptions opt_;
  double eps_, eta_ = 0;
  ScaleFunctions sf_;
  std::vector<Mode> modes_, Q_;
  std::unordered_map<std::uint64_t, SetLabel> label_;
  std::unordered_map<std::uint64_t, int> qpos_;
  BlockSystem bs_;
  ResonanceOracle res_;
  Field q0_;
  CMat J_, Jplus_;
};

struct SeriesState {
  FieldSeries u;                              // u^(k), sigma = + components
  std::vector<std::map<int, Field>> pieces;   // per order: scale h -> type-1 component on small modes
  double dual_path_defect = 0;                // propagator sum against dense block solve
};

// Doubled vector on a block: entries 2*pos + sigma_index.
inline Eigen::VectorXcd block_vector(const Block& B, const Field& f) {
  Eigen::VectorXcd v(2 * B.modes.size());
  for (std::size_t i = 0; i < B.modes.size(); ++i) {
    v(2 * i) = f.get(B.modes[i]);
    v(2 * i + 1) = std::conj(f.get(B.modes[i]));
  }
  return v;
}

// Rows (nu, sigma) of sum_r sum_{h1} L^{(r)}_{h,h1} U^{(k-r)}_{1,h1}; returned as doubled vector on B.
inline Eigen::VectorXcd counterterm_rhs(const SeriesContext& ctx, const SeriesState& st, const Counterterms& L,
                                        const Block& B, int h, int k) {
  const int N = ctx.spec().N;
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(2 * B.modes.size());
  for (const auto& [r, byh] : L.by_order) {
    if (r < N || r > k - N) continue;
    const auto& pieces = st.pieces[k - r];
    for (const auto& [hh, Lm] : byh) {
      if (hh.first != h) continue;
      auto pit = pieces.find(hh.second);
      if (pit == pieces.end()) continue;
      for (const auto& [key, blk] : Lm.entries()) {
        auto bit = std::find(B.modes.begin(), B.modes.end(), key.first);
        if (bit == B.modes.end()) continue;
        const std::size_t i = bit - B.modes.begin();
        const cplx up = pit->second.get(key.second);
        Eigen::Vector2cd w(up, std::conj(up));
        v.segment<2>(2 * i) += blk * w;
      }
    }
  }
  return v;
}

inline void check_order(const SeriesState& st, int k) {
  if (static_cast<int>(st.u.size()) != k) fail("order-not-ready", "orders below k must be populated first");
}

// F^(k): order-k coefficient of the nonlinearity on |nu| <= Lambda.
inline Field convolve_nonlinearity(const SeriesContext& ctx, const SeriesState& st, int k) {
  if (k < 0) return Field(ctx.spec().D, ctx.Lambda());
  if (static_cast<int>(st.u.size()) <= k) fail("order-not-ready", "order " + std::to_string(k));
  return nonlinearity_order(ctx.spec(), st.u, k, ctx.Lambda(), ctx.Lambda());
}

inline SeriesState initial_state(const SeriesContext& ctx) {
  SeriesState st;
  st.u.push_back(ctx.q0());
  st.pieces.emplace_back();
  return st;
}

// One order of the recursion; appends u^(k).
inline void recursion_step(const SeriesContext& ctx, SeriesState& st, const Counterterms& L, int k) {
  check_order(st, k);
  const auto& spec = ctx.spec();
  const int D = spec.D, R = ctx.Lambda(), N = spec.N;
  Field uk(D, R);
  std::map<int, Field> pieces;
  const Field F = convolve_nonlinearity(ctx, st, k - N);
  const auto& bs = ctx.blocks();
  for (const auto& nu : ctx.modes()) {
    const SetLabel l = ctx.label(nu);
    if (l == SetLabel::Q || ctx.small(nu)) continue;
    const cplx f = F.get(nu);
    if (f != cplx{}) uk.set(nu, f / ctx.delta(nu));
  }
  for (const auto& B : bs.blocks()) {
    Eigen::VectorXcd rhs0 = block_vector(B, F);
    bool any = rhs0.cwiseAbs().maxCoeff() > 0;
    const auto hs = ctx.scales().scales(B.x);
    std::map<int, Eigen::VectorXcd> rhs;
    for (int h : hs) {
      rhs[h] = rhs0 + counterterm_rhs(ctx, st, L, B, h, k);
      any = any || rhs[h].cwiseAbs().maxCoeff() > 0;
    }
    if (!any) continue;
    if (B.singular) fail("block-singular", B.modes.front().str(D));
    Eigen::VectorXcd total = Eigen::VectorXcd::Zero(rhs0.size()), fonly = total;
    for (int h : hs) {
      const double c = ctx.scales().chi_h(h, B.x);
      Eigen::VectorXcd piece = c * (B.Ainv * rhs[h]);
      fonly += c * (B.Ainv * rhs0);
      total += piece;
      Field& P = pieces.try_emplace(h, Field(D, R)).first->second;
      for (std::size_t i = 0; i < B.modes.size(); ++i) P.set(B.modes[i], piece(2 * i));
    }
    Eigen::VectorXcd dense = B.A.partialPivLu().solve(rhs0);
    const double scale = std::max(1.0, dense.cwiseAbs().maxCoeff());
    st.dual_path_defect = std::max(st.dual_path_defect, (fonly - dense).cwiseAbs().maxCoeff() / scale);
    for (std::size_t i = 0; i < B.modes.size(); ++i) uk.set(B.modes[i], total(2 * i));
  }
  // kernel rows: J u_Q = f~ where f~ is F^(k) with u_Q^(k) = 0
  st.u.push_back(uk);
  st.pieces.push_back(pieces);
  const Field Fk = nonlinearity_order(spec, st.u, k, R, R);
  const int nq = static_cast<int>(ctx.Q().size());
  Eigen::VectorXcd b(2 * nq);
  for (int i = 0; i < nq; ++i) {
    b(2 * i) = Fk.get(ctx.Q()[i]);
    b(2 * i + 1) = std::conj(b(2 * i));
  }
  Eigen::VectorXcd x = ctx.Jplus() * b;
  for (int i = 0; i < nq; ++i) st.u.back().set(ctx.Q()[i], x(2 * i));
}

inline SeriesState run_recursion(const SeriesContext& ctx, const Counterterms& L, int K) {
  SeriesState st = initial_state(ctx);
  for (int k = 1; k <= K; ++k) recursion_step(ctx, st, L, k);
  return st;
}

inline Field partial_sum(const SeriesState& st, double eta, int K) {
  Field s = st.u.front() * 0.0;
  double w = 1;
  for (int k = 0; k <= K && k < static_cast<int>(st.u.size()); ++k, w *= eta) s += st.u[k] * w;
  return s;
}

struct ResidualReport {
  double galerkin = 0;  // sup over |nu| <= Lambda
  double interior = 0;  // sup over |nu| <= Lambda - margin
  double full = 0;      // sup over all nu reached by the nonlinearity
};

inline int max_degree(const EquationSpec& spec) {
  int p = 0;
  for (const auto& t : spec.terms) p = std::max(p, t.r + t.s);
  return p;
}

inline ResidualReport residual(const EquationSpec& spec, const Field& u, double eps, int margin) {
  check_window(spec, eps);
  const int R = u.radius(), Rf = max_degree(spec) * R;
  const double eta = std::pow(eps, 1.0 / spec.N);
  Field f = nonlinearity(spec, u, eta, Rf);
  ResidualReport rep;
  for (const auto& nu : full_ball(spec.D, Rf)) {
    const double r = std::abs(eigenvalue(spec, nu, eps) * u.get(nu) - eps * f.get(nu));
    rep.full = std::max(rep.full, r);
    if (nu.size() <= R) rep.galerkin = std::max(rep.galerkin, r);
    if (nu.size() <= R - margin) rep.interior = std::max(rep.interior, r);
  }
  return rep;
}

struct GevreyFit {
  double K = 0, kappa = 0, r2 = 0;
  int points = 0;
  std::vector<std::pair<double, double>> data;  // (|nu|^{1/2}, log max_{|nu|=s} |u_nu|)
};

// Least squares of the shell-maximum envelope against |nu|^{1/2}; shells below floor * sup are dropped.
inline GevreyFit gevrey_fit(const Field& u, double floor = 1e-13) {
  std::map<int, double> env;
  double sup = 0;
  for (const auto& [nu, z] : u.nonzeros()) {
    env[nu.size()] = std::max(env[nu.size()], std::abs(z));
    sup = std::max(sup, std::abs(z));
  }
  GevreyFit g;
  for (const auto& [s, v] : env)
    if (v > floor * sup) g.data.emplace_back(std::sqrt(static_cast<double>(s)), std::log(v));
  g.points = static_cast<int>(g.data.size());
  if (g.points < 3) return g;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : g.data) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double n = g.points;
  const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  const double slope = cov / vx;
  g.kappa = -slope;
  g.K = std::exp((sy - slope * sx) / n);
  g.r2 = vy > 0 ? cov * cov / (vx * vy) : 1.0;
  return g;
}

struct NewtonResult {
  Field u;              // rescaled solution; the physical field is eta * u
  bool converged = false;
  bool diverged = false;
  int iterations = 0, rejections = 0;
  double residual = 0;  // sup over |nu| <= Lambda
};

// Damped Newton on delta u - eps f(u, eta) = 0 over real Dirichlet-odd coefficients (canonical unknowns).
inline NewtonResult newton_oracle(const EquationSpec& spec, double eps, int Lambda, double tol, int max_iter = 50) {
  require_case_one(spec);
  if (spec.boundary != Boundary::Dirichlet) fail("unsupported-boundary", "the oracle uses the odd reduction");
  for (const auto& t : spec.terms)
    if (std::abs(t.a.imag()) > 0) fail("unsupported-term", "the oracle assumes real coefficients");
  check_window(spec, eps);
  NewtonResult res;
  res.u = base_solution(spec, Lambda);
  if (eps == 0) {
    res.converged = true;
    return res;
  }
  const double eta = std::pow(eps, 1.0 / spec.N);
  std::vector<Mode> unk;
  for (const auto& nu : enumerate_shell(spec, Lambda))
    if (is_active(spec, nu)) unk.push_back(nu);
  const int n = static_cast<int>(unk.size());
  std::vector<std::vector<OrbitPoint>> orbit(n);
  std::vector<double> delta(n);
  for (int i = 0; i < n; ++i) {
    orbit[i] = dirichlet_orbit(unk[i], spec.D);
    delta[i] = eigenvalue(spec, unk[i], eps);
  }
  auto to_field = [&](const Eigen::VectorXd& x) {
    Field u(spec.D, Lambda);
    for (int i = 0; i < n; ++i)
      for (const auto& p : orbit[i]) u.set(p.nu, p.parity * x(i));
    return u;
  };
  auto G = [&](const Field& u) {
    Field f = nonlinearity(spec, u, eta, Lambda);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g(i) = delta[i] * u.get(unk[i]).real() - eps * f.get(unk[i]).real();
    return g;
  };
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = res.u.get(unk[i]).real();
  Field u = to_field(x);
  Eigen::VectorXd g = G(u);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    res.residual = g.cwiseAbs().maxCoeff();
    if (res.residual < tol) {
      res.converged = true;
      break;
    }
    auto [K1, K2] = linearization_kernels(spec, u, eta, 2 * Lambda);
    Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      Jm(i, i) = delta[i];
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (const auto& p : orbit[j]) s += p.parity * (K1.get(unk[i] - p.nu) + K2.get(unk[i] + p.nu)).real();
        Jm(i, j) -= eps * s;
      }
    }
    Eigen::VectorXd dx = Jm.partialPivLu().solve(-g);
    double t = 1;
    const double g0 = g.squaredNorm();
    while (true) {
      Eigen::VectorXd xn = x + t * dx;
      Field un = to_field(xn);
      Eigen::VectorXd gn = G(un);
      if (gn.squaredNorm() <= (1 - 1e-4 * t) * g0 || gn.cwiseAbs().maxCoeff() < tol) {
        x = xn;
        u = std::move(un);
        g = gn;
        break;
      }
      t *= 0.5;
      if (++res.rejections > 40) {
        res.diverged = true;
        res.u = u;
        res.residual = g.cwiseAbs().maxCoeff();
        return res;
      }
    }
  }
  res.residual = g.cwiseAbs().maxCoeff();
  res.converged = res.residual < tol;
  res.u = u;
  return res;
}

struct MeasureScan {
  std::vector<double> windows;     // eps0 2^{-j}
  std::vector<double> fractions;
  std::vector<int> counts;
  bool monotone = true;
  std::optional<Mode> last_witness;
};

inline std::vector<Mode> measure_shell(const EquationSpec& spec, int Lambda) {
  std::vector<Mode> O;
  for (const auto& nu : active_shell(spec, Lambda))
    if (in_O(spec, nu)) O.push_back(nu);
  return O;
}

inline double measure_eps(const EquationSpec& spec, int i, int gridsize) { return spec.eps0 * (i + 1) / gridsize; }

// Admissibility with M = 0 at one grid point.
inline AdmissibleReport measure_point(const EquationSpec& spec, const std::vector<Mode>& O, double eps,
                                      const MultiscaleParams& prm) {
  BlockSystem bs(spec, O, eps, BlockMatrix{}, prm);
  return admissible(spec, bs, O, prm);
}

inline MeasureScan summarize_measure(const EquationSpec& spec, const std::vector<char>& ok, int windows) {
  const int gridsize = static_cast<int>(ok.size());
  MeasureScan out;
  for (int j = 0; j < windows; ++j) {
    const double w = spec.eps0 * std::ldexp(1.0, -j);
    int tot = 0, good = 0;
    for (int i = 0; i < gridsize; ++i)
      if (measure_eps(spec, i, gridsize) <= w * (1 + 1e-12)) {
        ++tot;
        good += ok[i];
      }
    out.windows.push_back(w);
    out.counts.push_back(tot);
    out.fractions.push_back(tot ? static_cast<double>(good) / tot : 1.0);
    if (j > 0 && out.fractions[j] < out.fractions[j - 1]) out.monotone = false;
  }
  return out;
}

// Surviving fraction of grid eps in (0, eps0 2^{-j}] under the admissibility test with M = 0.
inline MeasureScan measure_scan(const EquationSpec& spec, int gridsize, const MultiscaleParams& prm, int Lambda,
                                int windows = 7) {
  prm.validate();
  const auto O = measure_shell(spec, Lambda);
  std::vector<char> ok(gridsize);
  std::optional<Mode> witness;
  for (int i = 0; i < gridsize; ++i) {
    auto rep = measure_point(spec, O, measure_eps(spec, i, gridsize), prm);
    ok[i] = rep.ok;
    if (!rep.ok) witness = rep.witness;
  }
  auto out = summarize_measure(spec, ok, windows);
  out.last_witness = witness;
  return out;
}

}  // namespace lsrt
