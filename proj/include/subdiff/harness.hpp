#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subdiff/spectral.hpp"

namespace subdiff {

enum class Experiment {
  moments,
  qwiener_moments,
  isometry,
  change_of_var,
  ito_formula,
  duality,
  mild,
  fpk_residual,
  subordination,
  char_function,
  walsh_triple,
};

// Names as used on the command line: "moments", "qwiener-moments", ...
std::string_view experiment_name(Experiment e) noexcept;
// Throws ConfigError for an unknown name.
Experiment parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();

struct BasisSpec {
  std::string rule = "explicit";  // explicit | power | geometric
  std::size_t J = 0;              // 0 with an explicit list means "use the list"
  std::vector<double> values{0.5, 0.3, 0.2};
  double p = 2.0;
  double ratio = 0.5;
  bool normalize = false;
  std::vector<double> generator;  // empty: mu_j = j / 2

  // Throws ConfigError on an invalid rule.
  [[nodiscard]] SpectralBasis build() const;
};

struct GridSpec {
  double t_max = 1.0;
  std::size_t steps = 64;
  std::size_t tau_steps = 1000;  // operational steps per unit operational time

  [[nodiscard]] double d_tau() const { return 1.0 / static_cast<double>(tau_steps); }
};

// Experiment-specific knobs. Unset optionals take the experiment default,
// which the report states next to every check.
struct CheckSpec {
  std::vector<double> t;      // evaluation times (moments)
  std::vector<int> n;         // moment orders (moments)
  std::vector<double> betas;  // extra beta values (moments)
  std::vector<double> u;      // characteristic-function arguments
  std::vector<double> x0;     // initial state (duality, fpk, subordination)
  std::optional<double> z_max;
  std::optional<double> tolerance;  // exactness threshold
  std::optional<double> min_order;
  std::optional<double> pass_fraction;
  std::optional<double> max_rel_rms;
  std::size_t levels = 4;
  std::size_t integrands = 20;
  std::size_t trials = 100;
  std::size_t points = 8;
  std::size_t qv_steps = std::size_t{1} << 14;
  std::size_t paths = 100;  // refinement studies and the QV check
  bool classical = true;  // fpk-residual: also run beta = 1
};

struct ExperimentConfig {
  Experiment experiment = Experiment::moments;
  double beta = 0.5;
  BasisSpec basis;
  GridSpec grid;
  std::size_t mc = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out = "out";
  CheckSpec check;

  // Throws ConfigError when a value is out of range.
  void validate() const;
};

// Sectioned key/value text (TOML style): top-level keys experiment, beta, mc,
// seed, workers, out; sections [basis], [grid], [check]. Unknown keys are
// errors. `experiment` may be omitted when supplied by the caller.
ExperimentConfig parse_config(std::istream& in, std::optional<Experiment> experiment = std::nullopt);
ExperimentConfig parse_config_text(std::string_view text, std::optional<Experiment> experiment = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& file, std::optional<Experiment> experiment = std::nullopt);

struct CheckResult {
  std::string name;
  double estimate = 0.0;
  double oracle = 0.0;
  double se = 0.0;
  double statistic = 0.0;  // value compared with the tolerance
  double tolerance = 0.0;
  std::string rule;  // how statistic and tolerance are compared
  bool pass = false;
};

struct Series {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<CheckResult> checks;
  std::vector<Series> series;
  std::vector<std::string> notes;  // assumptions, warnings, budgets
  double wall_seconds = 0.0;

  [[nodiscard]] bool all_pass() const noexcept;
};

// Runs the configured experiment. Module errors propagate with the
// experiment name prepended.
RunReport run(const ExperimentConfig& config);

// CSV of the checks: check,estimate,oracle,se,statistic,tolerance,rule,pass.
void write_report_csv(std::ostream& os, const RunReport& report);
void write_series_csv(std::ostream& os, const Series& series);
// Deterministic JSON summary (config echo, checks, notes; no timing).
std::string summary_json(const RunReport& report);

// One CSV per series, named series_<name>.csv; an empty series gives a
// header-only file. Returns the paths written.
std::vector<std::filesystem::path> emit_plot_data(const RunReport& report, const std::filesystem::path& dir);

// report.csv, series_*.csv, summary.json and summary.txt (the only file
// that contains wall time).
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

}  // namespace subdiff
