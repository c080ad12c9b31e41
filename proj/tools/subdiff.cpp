#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "subdiff/errors.hpp"
#include "subdiff/harness.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kConfigError = 1;
constexpr int kCheckFailed = 2;

std::string experiment_list() {
  std::string s;
  for (auto e : subdiff::all_experiments()) s += (s.empty() ? "" : ", ") + std::string(subdiff::experiment_name(e));
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo verification of time-changed Q-Wiener calculus"};
  std::string experiment;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  bool quiet = false;
  app.add_option("experiment", experiment, "one of: " + experiment_list())->required();
  app.add_option("--config", config_file, "TOML-style config file")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workers", workers, "worker threads (results do not depend on it)");
  app.add_option("--out", out, "output directory");
  app.add_flag("-q,--quiet", quiet, "print only the final status line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  subdiff::ExperimentConfig cfg;
  try {
    cfg = subdiff::load_config(config_file, subdiff::parse_experiment(experiment));
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (out) cfg.out = *out;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  }

  subdiff::RunReport report;
  try {
    report = subdiff::run(cfg);
    subdiff::write_outputs(report, cfg.out);
  } catch (const subdiff::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  if (!quiet) {
    for (const auto& c : report.checks) {
      std::cout << (c.pass ? "pass  " : "FAIL  ") << c.name << "  statistic=" << c.statistic << " tol=" << c.tolerance
                << "\n";
    }
  }
  std::cout << subdiff::experiment_name(cfg.experiment) << ": " << (report.all_pass() ? "PASS" : "FAIL") << " ("
            << report.checks.size() << " checks, " << report.wall_seconds << " s, output in " << cfg.out << ")\n";
  return report.all_pass() ? kPass : kCheckFailed;
}
