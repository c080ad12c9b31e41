#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "subdiff/errors.hpp"
#include "subdiff/harness.hpp"

namespace subdiff {

namespace {

constexpr std::pair<Experiment, std::string_view> kNames[] = {
    {Experiment::moments, "moments"},
    {Experiment::qwiener_moments, "qwiener-moments"},
    {Experiment::isometry, "isometry"},
    {Experiment::change_of_var, "change-of-var"},
    {Experiment::ito_formula, "ito-formula"},
    {Experiment::duality, "duality"},
    {Experiment::mild, "mild"},
    {Experiment::fpk_residual, "fpk-residual"},
    {Experiment::subordination, "subordination"},
    {Experiment::char_function, "char-function"},
    {Experiment::walsh_triple, "walsh-triple"},
};

std::string key_of(const CLI::ConfigItem& item) {
  std::string k;
  for (const auto& p : item.parents) k += p + ".";
  return k + item.name;
}

const std::string& single(const CLI::ConfigItem& item) {
  if (item.inputs.size() != 1) throw ConfigError(key_of(item) + ": expected a single value");
  return item.inputs.front();
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(v)) throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

std::uint64_t parse_count(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec == std::errc() && r.ptr == end) return v;
  // also accept integral floating notation such as 1e5
  const double d = parse_double(s, key);
  if (d < 0.0 || d != std::floor(d) || d > 9007199254740992.0) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return static_cast<std::uint64_t>(d);
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::vector<double> parse_list(const CLI::ConfigItem& item) {
  std::vector<double> v;
  for (const auto& s : item.inputs) {
    if (s.empty()) continue;
    v.push_back(parse_double(s, key_of(item)));
  }
  return v;
}

}  // namespace

std::string_view experiment_name(Experiment e) noexcept {
  for (const auto& [k, n] : kNames) {
    if (k == e) return n;
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> all = [] {
    std::vector<Experiment> v;
    for (const auto& [k, n] : kNames) v.push_back(k);
    return v;
  }();
  return all;
}

SpectralBasis BasisSpec::build() const {
  LambdaRule r;
  if (rule == "explicit") {
    r = LambdaRule::explicit_values(values);
  } else if (rule == "power") {
    r = LambdaRule::power_law(p);
  } else if (rule == "geometric") {
    r = LambdaRule::geometric_law(ratio);
  } else {
    throw ConfigError("basis.rule must be explicit, power or geometric, got '" + rule + "'");
  }
  SpectralBasis b = [&] {
    try {
      return make_basis(J, r);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("basis: ") + e.what());
    }
  }();
  if (normalize) b = b.normalized();
  std::vector<double> mu = generator;
  if (mu.empty()) {
    for (std::size_t j = 0; j < b.dim(); ++j) mu.push_back(0.5 * static_cast<double>(j + 1));
  }
  if (mu.size() != b.dim()) throw ConfigError("basis.generator must have one entry per mode");
  try {
    return b.with_generator(std::move(mu));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("basis.generator: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (mc < 1) throw ConfigError("mc must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (!(grid.t_max > 0.0)) throw ConfigError("grid.t_max must be positive");
  if (grid.steps < 1) throw ConfigError("grid.steps must be at least 1");
  if (grid.tau_steps < 1) throw ConfigError("grid.tau_steps must be at least 1");
  const SpectralBasis b = basis.build();
  for (double t : check.t)
    if (!(t > 0.0)) throw ConfigError("check.t entries must be positive");
  for (int n : check.n)
    if (n < 1) throw ConfigError("check.n entries must be at least 1");
  for (double x : check.betas)
    if (!(x > 0.0 && x <= 1.0)) throw ConfigError("check.betas entries must lie in (0, 1]");
  if (!check.x0.empty() && check.x0.size() != b.dim()) throw ConfigError("check.x0 must have one entry per mode");
  if (check.levels < 2) throw ConfigError("check.levels must be at least 2");
  if (check.integrands < 1 || check.trials < 1 || check.points < 1) {
    throw ConfigError("check.integrands, check.trials and check.points must be at least 1");
  }
  if (check.qv_steps < 1 || check.paths < 2) throw ConfigError("check.qv_steps >= 1 and check.paths >= 2 required");
  for (const auto& opt : {check.z_max, check.tolerance, check.min_order, check.max_rel_rms}) {
    if (opt && !(*opt > 0.0)) throw ConfigError("check thresholds must be positive");
  }
  if (check.pass_fraction && !(*check.pass_fraction > 0.0 && *check.pass_fraction <= 1.0)) {
    throw ConfigError("check.pass_fraction must lie in (0, 1]");
  }
  if ((experiment == Experiment::moments || experiment == Experiment::qwiener_moments ||
       experiment == Experiment::isometry || experiment == Experiment::fpk_residual ||
       experiment == Experiment::subordination || experiment == Experiment::char_function ||
       experiment == Experiment::mild) &&
      mc < 2) {
    throw ConfigError("mc must be at least 2 for a Monte Carlo experiment");
  }
}

ExperimentConfig parse_config(std::istream& in, std::optional<Experiment> experiment) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  std::optional<Experiment> from_file;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string key = key_of(item);
    if (item.parents.size() > 1) throw ConfigError("unknown key '" + key + "'");
    const std::string section = item.parents.empty() ? "" : item.parents.front();
    const std::string& n = item.name;
    if (section.empty()) {
      if (n == "experiment") from_file = parse_experiment(single(item));
      else if (n == "beta") c.beta = parse_double(single(item), key);
      else if (n == "mc") c.mc = parse_count(single(item), key);
      else if (n == "seed") c.seed = parse_count(single(item), key);
      else if (n == "workers") c.workers = static_cast<unsigned>(parse_count(single(item), key));
      else if (n == "out") c.out = single(item);
      else throw ConfigError("unknown key '" + key + "'");
    } else if (section == "basis") {
      if (n == "rule") c.basis.rule = single(item);
      else if (n == "J") c.basis.J = parse_count(single(item), key);
      else if (n == "values") c.basis.values = parse_list(item);
      else if (n == "p") c.basis.p = parse_double(single(item), key);
      else if (n == "ratio") c.basis.ratio = parse_double(single(item), key);
      else if (n == "normalize") c.basis.normalize = parse_bool(single(item), key);
      else if (n == "generator") c.basis.generator = parse_list(item);
      else throw ConfigError("unknown key '" + key + "'");
    } else if (section == "grid") {
      if (n == "t_max") c.grid.t_max = parse_double(single(item), key);
      else if (n == "steps") c.grid.steps = parse_count(single(item), key);
      else if (n == "tau_steps") c.grid.tau_steps = parse_count(single(item), key);
      else throw ConfigError("unknown key '" + key + "'");
    } else if (section == "check") {
      if (n == "t") c.check.t = parse_list(item);
      else if (n == "n") {
        c.check.n.clear();
        for (double v : parse_list(item)) {
          if (v != std::floor(v)) throw ConfigError(key + ": expected integers");
          c.check.n.push_back(static_cast<int>(v));
        }
      }
      else if (n == "betas") c.check.betas = parse_list(item);
      else if (n == "u") c.check.u = parse_list(item);
      else if (n == "x0") c.check.x0 = parse_list(item);
      else if (n == "z_max") c.check.z_max = parse_double(single(item), key);
      else if (n == "tolerance") c.check.tolerance = parse_double(single(item), key);
      else if (n == "min_order") c.check.min_order = parse_double(single(item), key);
      else if (n == "pass_fraction") c.check.pass_fraction = parse_double(single(item), key);
      else if (n == "max_rel_rms") c.check.max_rel_rms = parse_double(single(item), key);
      else if (n == "levels") c.check.levels = parse_count(single(item), key);
      else if (n == "integrands") c.check.integrands = parse_count(single(item), key);
      else if (n == "trials") c.check.trials = parse_count(single(item), key);
      else if (n == "points") c.check.points = parse_count(single(item), key);
      else if (n == "qv_steps") c.check.qv_steps = parse_count(single(item), key);
      else if (n == "paths") c.check.paths = parse_count(single(item), key);
      else if (n == "classical") c.check.classical = parse_bool(single(item), key);
      else throw ConfigError("unknown key '" + key + "'");
    } else {
      throw ConfigError("unknown section '" + section + "'");
    }
  }
  if (experiment && from_file && *experiment != *from_file) {
    throw ConfigError("config file is for experiment '" + std::string(experiment_name(*from_file)) + "', not '" +
                      std::string(experiment_name(*experiment)) + "'");
  }
  if (experiment) c.experiment = *experiment;
  else if (from_file) c.experiment = *from_file;
  else throw ConfigError("no experiment given");
  return c;
}

ExperimentConfig parse_config_text(std::string_view text, std::optional<Experiment> experiment) {
  std::istringstream in{std::string(text)};
  return parse_config(in, experiment);
}

ExperimentConfig load_config(const std::filesystem::path& file, std::optional<Experiment> experiment) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  return parse_config(in, experiment);
}

}  // namespace subdiff
