// enaqt: sweeps, bounds, dark-state census and invariant checks from JSON configs.

#include <iostream>

#include <CLI11.hpp>

#include "enaqt_cli/runner.hpp"

using namespace enaqt;
using namespace enaqt::cli;

namespace {

int report_run(const RunSummary& s) {
  std::cout << "wrote " << s.records << " records to " << s.directory;
  if (s.failures) std::cout << " (" << s.failures << " failed, see the error column)";
  std::cout << "\n";
  return s.failures ? kSolverFailure : kOk;
}

int cmd_run(const std::string& path, const std::string& out, unsigned workers) {
  auto c = load_config(path);
  if (workers) c.workers = workers;
  return report_run(run_experiment(c, out));
}

int cmd_bounds(const std::string& path, const std::string& out, unsigned workers) {
  auto c = load_config(path, false);
  std::vector<SolverKind> keep;
  for (auto s : c.solvers)
    if (s == SolverKind::Bounds || s == SolverKind::OneD) keep.push_back(s);
  if (keep.empty()) keep.push_back(SolverKind::Bounds);
  c.solvers = keep;
  c.analyses.clear();
  if (workers) c.workers = workers;
  ConfigDocument doc(read_file(path), path);
  check_sweep(c, doc);
  return report_run(run_experiment(c, out, "bounds"));
}

int cmd_census(const std::string& path, const std::string& out, unsigned workers) {
  auto c = load_config(path, false);
  if (workers) c.workers = workers;
  RunClock clock;
  const auto rows = run_census(c);
  const auto s = write_census(c, rows, out, clock);
  for (const auto& r : rows)
    std::cout << r.label << " L=" << r.L << " dark " << r.census.dark_count << "/" << r.sites << " = "
              << fmt(r.census.dark_fraction()) << "\n";
  std::cout << "wrote census to " << s.directory << "\n";
  return kOk;
}

int cmd_validate(bool fast, std::uint64_t seed, const std::string& config, const std::string& out,
                 unsigned workers) {
  ValidateOptions o;
  o.fast = fast;
  o.seed = seed;
  o.workers = workers;
  ExperimentConfig c;
  c.name = "validate";
  if (!config.empty()) {
    const auto loaded = load_config(config, false);
    o.lattice = loaded.lattice;
    c.source = loaded.source;
  }
  c.lattice = o.lattice;
  c.workers = workers;
  RunClock clock;
  const auto res = validate_suite(o);
  const std::string dir = resolve_output_dir(c, out);
  fs::create_directories(dir);
  write_text((fs::path(dir) / "validate.csv").string(), validate_csv(res));
  write_text((fs::path(dir) / "validate.json").string(), validate_json(res).dump(2) + "\n");
  write_text((fs::path(dir) / "meta.json").string(), meta_json(fast ? "validate --fast" : "validate", c, clock, {}).dump(2) + "\n");
  std::cout << validate_json(res).dump(2) << "\n";
  bool ok = true;
  for (const auto& r : res) ok = ok && r.pass();
  std::cerr << (ok ? "all invariants hold" : "invariant failure") << " (report in " << dir << ")\n";
  return ok ? kOk : kInvariantFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport efficiency of lossy spin lattices: sweeps, bounds, census, validation"};
  app.require_subcommand(1);
  std::string config, out;
  unsigned workers = 0;
  bool fast = false;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-o,--out", out, "output directory (default: $ENAQT_OUTPUT_DIR/<name>)");
    sub->add_option("-j,--workers", workers, "worker threads (0 = all cores)");
  };
  auto* run = app.add_subcommand("run", "run the sweep described by a config file");
  run->add_option("config", config, "JSON config")->required();
  add_common(run);
  auto* bounds = app.add_subcommand("bounds", "evaluate only the analytic bounds on the config's sweep");
  bounds->add_option("config", config, "JSON config")->required();
  add_common(bounds);
  auto* census = app.add_subcommand("census", "dark-state census of the non-Hermitian Hamiltonian");
  census->add_option("config", config, "JSON config")->required();
  add_common(census);
  auto* validate = app.add_subcommand("validate", "run the invariant suite");
  validate->add_flag("--fast", fast, "smaller grids and fewer trajectories");
  validate->add_option("--seed", seed, "trajectory and sampling seed");
  validate->add_option("config", config, "optional config providing the lattice");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, out, workers);
    if (*bounds) return cmd_bounds(config, out, workers);
    if (*census) return cmd_census(config, out, workers);
    if (*validate) return cmd_validate(fast, seed, config, out, workers);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidSpec& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << describe(e) << "\n";
    return kSolverFailure;
  }
  return kOk;
}
