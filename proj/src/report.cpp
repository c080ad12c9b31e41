#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "subdiff/errors.hpp"
#include "subdiff/harness.hpp"

namespace subdiff {

namespace {

// Shortest text that round-trips the double exactly.
std::string exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment"] = std::string(experiment_name(c.experiment));
  j["beta"] = c.beta;
  j["mc"] = c.mc;
  j["seed"] = c.seed;
  j["basis"] = {{"rule", c.basis.rule},       {"J", c.basis.J},
                {"values", c.basis.values},   {"p", c.basis.p},
                {"ratio", c.basis.ratio},     {"normalize", c.basis.normalize},
                {"generator", c.basis.generator}};
  j["grid"] = {{"t_max", c.grid.t_max}, {"steps", c.grid.steps}, {"tau_steps", c.grid.tau_steps}};
  nlohmann::ordered_json k;
  k["t"] = c.check.t;
  k["n"] = c.check.n;
  k["betas"] = c.check.betas;
  k["u"] = c.check.u;
  k["x0"] = c.check.x0;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  k["z_max"] = opt(c.check.z_max);
  k["tolerance"] = opt(c.check.tolerance);
  k["min_order"] = opt(c.check.min_order);
  k["pass_fraction"] = opt(c.check.pass_fraction);
  k["max_rel_rms"] = opt(c.check.max_rel_rms);
  k["levels"] = c.check.levels;
  k["integrands"] = c.check.integrands;
  k["trials"] = c.check.trials;
  k["points"] = c.check.points;
  k["qv_steps"] = c.check.qv_steps;
  k["paths"] = c.check.paths;
  k["classical"] = c.check.classical;
  j["check"] = k;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void write_report_csv(std::ostream& os, const RunReport& report) {
  os << "check,estimate,oracle,se,statistic,tolerance,rule,pass\n";
  for (const auto& c : report.checks) {
    os << csv_field(c.name) << ',' << exact(c.estimate) << ',' << exact(c.oracle) << ',' << exact(c.se) << ','
       << exact(c.statistic) << ',' << exact(c.tolerance) << ',' << csv_field(c.rule) << ','
       << (c.pass ? "pass" : "fail") << '\n';
  }
}

void write_series_csv(std::ostream& os, const Series& series) {
  for (std::size_t i = 0; i < series.header.size(); ++i) os << (i ? "," : "") << series.header[i];
  os << '\n';
  for (const auto& row : series.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << exact(row[i]);
    os << '\n';
  }
}

std::string summary_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["config"] = config_json(report.config);
  j["all_pass"] = report.all_pass();
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"estimate", c.estimate},
                      {"oracle", c.oracle},
                      {"se", c.se},
                      {"statistic", c.statistic},
                      {"tolerance", c.tolerance},
                      {"rule", c.rule},
                      {"pass", c.pass}});
  }
  j["notes"] = report.notes;
  auto& files = j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : report.series) files.push_back("series_" + s.name + ".csv");
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_plot_data(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (const auto& s : report.series) {
    std::ostringstream os;
    write_series_csv(os, s);
    const auto path = dir / ("series_" + s.name + ".csv");
    write_file(path, os.str());
    out.push_back(path);
  }
  return out;
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_file(dir / "report.csv", csv.str());
  emit_plot_data(report, dir);
  write_file(dir / "summary.json", summary_json(report));
  std::ostringstream txt;
  txt << "experiment: " << experiment_name(report.config.experiment) << "\n";
  txt << "seed: " << report.config.seed << "\n";
  txt << "result: " << (report.all_pass() ? "PASS" : "FAIL") << "\n";
  txt << "wall time (s): " << std::fixed << std::setprecision(3) << report.wall_seconds << "\n";
  txt.unsetf(std::ios::fixed);
  txt << std::setprecision(6);
  for (const auto& c : report.checks) {
    txt << (c.pass ? "  pass  " : "  FAIL  ") << c.name << ": statistic " << c.statistic << " (" << c.rule
        << ", tol " << c.tolerance << ")\n";
  }
  for (const auto& n : report.notes) txt << "  note: " << n << "\n";
  write_file(dir / "summary.txt", txt.str());
}

}  // namespace subdiff
