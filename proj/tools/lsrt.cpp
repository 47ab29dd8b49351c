#include <iostream>

#include "CLI11.hpp"
#include "lsrt/runner.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitCheckFailed = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lsrt: renormalized Lyapunov-Schmidt runs on truncated Fourier lattices"};
  app.require_subcommand(1);
  std::string config, out = "runs", record, format;
  int jobs = 1;
  std::uint64_t seed = 0;
  bool have_seed = false;

  std::vector<CLI::App*> runs;
  for (const auto& name : lsrt::run_commands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    sub->add_option("--config", config, "JSON config file");
    sub->add_option("--out", out, "record directory");
    sub->add_option("--jobs", jobs, "worker threads for eps sweeps")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) {
      seed = s;
      have_seed = true;
    }, "random seed");
    runs.push_back(sub);
  }
  auto* exp = app.add_subcommand("export", "export a stored record");
  exp->add_option("--record", record, "record file")->required();
  exp->add_option("--format", format, "json-lines, csv or plot-data")->required();
  exp->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (exp->parsed()) {
      auto rec = lsrt::import_record(record);
      if (lsrt::record_hash(rec) != rec.at("hash").get<std::string>()) {
        std::cerr << "record hash mismatch: " << record << "\n";
        return 1;
      }
      for (const auto& p : lsrt::export_record(rec, format, out)) std::cout << p.string() << "\n";
      return 0;
    }
    lsrt::RunConfig cfg = config.empty() ? lsrt::RunConfig{} : lsrt::load_config(config);
    for (auto* sub : runs)
      if (sub->parsed()) cfg.command = sub->get_name();
    cfg.jobs = jobs;
    if (have_seed) cfg.seed = seed;
    lsrt::validate(cfg);
    auto rec = lsrt::run(cfg);
    auto path = lsrt::persist(rec, out);
    for (const auto& f : cfg.exports) lsrt::export_record(rec, f, out);
    lsrt::print_summary(std::cout, rec);
    std::cout << "record " << path.string() << "\n";
    return lsrt::all_checks_pass(rec) ? 0 : kExitCheckFailed;
  } catch (const lsrt::ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kExitValidation;
  } catch (const lsrt::Error& e) {
    if (e.code() == "invalid-parameter" || e.code() == "invalid-spec" || e.code() == "unknown-format") {
      std::cerr << "validation error: " << e.what() << "\n";
      return kExitValidation;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
