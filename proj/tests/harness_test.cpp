#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "subdiff/errors.hpp"
#include "subdiff/harness.hpp"

using namespace subdiff;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string report_csv(const RunReport& r) {
  std::ostringstream os;
  write_report_csv(os, r);
  return os.str();
}

std::string series_csv(const Series& s) {
  std::ostringstream os;
  write_series_csv(os, s);
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("subdiff_harness_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(ExperimentNames, RoundTrip) {
  EXPECT_EQ(all_experiments().size(), 11u);
  for (auto e : all_experiments()) EXPECT_EQ(parse_experiment(experiment_name(e)), e);
  EXPECT_EQ(experiment_name(Experiment::qwiener_moments), "qwiener-moments");
  EXPECT_THROW(parse_experiment("nope"), ConfigError);
}

TEST(Config, DefaultsFromMinimalText) {
  const auto c = parse_config_text("experiment = \"moments\"\n");
  EXPECT_EQ(c.experiment, Experiment::moments);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_EQ(c.mc, 10000u);
  EXPECT_EQ(c.grid.tau_steps, 1000u);
  EXPECT_DOUBLE_EQ(c.grid.d_tau(), 1e-3);
  EXPECT_EQ(c.basis.build().dim(), 3u);
}

TEST(Config, SectionsAndLists) {
  const auto c = parse_config_text(R"(
experiment = "char-function"
beta = 0.7
mc = 1e5
seed = 99
workers = 3

[basis]
rule = "power"
J = 5
p = 3.0
normalize = true

[grid]
t_max = 2.0
tau_steps = 500

[check]
u = [0.5, -1.0]
z_max = 3.5
)");
  EXPECT_EQ(c.experiment, Experiment::char_function);
  EXPECT_EQ(c.beta, 0.7);
  EXPECT_EQ(c.mc, 100000u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.basis.rule, "power");
  EXPECT_EQ(c.basis.build().dim(), 5u);
  EXPECT_NEAR(c.basis.build().trace(), 1.0, 1e-12);
  EXPECT_EQ(c.grid.t_max, 2.0);
  EXPECT_DOUBLE_EQ(c.grid.d_tau(), 2e-3);
  ASSERT_EQ(c.check.u.size(), 2u);
  EXPECT_EQ(c.check.u[1], -1.0);
  EXPECT_EQ(c.check.z_max.value(), 3.5);
  EXPECT_FALSE(c.check.tolerance.has_value());
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_config_text("experiment = \"moments\"\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = \"moments\"\n[grid]\nwidth = 3\n"), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = \"moments\"\n[extra]\nx = 3\n"), ConfigError);
}

TEST(Config, ParseLeavesValidationToCaller) {
  const auto c = parse_config_text("experiment = \"moments\"\nmc = 0\n");
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW((void)run(c), ConfigError);
}

TEST(Config, RejectsOutOfRangeValues) {
  for (const char* text : {"mc = 0\n", "beta = 1.5\n", "beta = 0\n", "workers = 0\n", "[grid]\nsteps = 0\n",
                           "[grid]\nt_max = -1\n", "[basis]\nrule = \"cubic\"\n"}) {
    EXPECT_THROW(parse_config_text(std::string("experiment = \"moments\"\n") + text).validate(), ConfigError)
        << text;
  }
  EXPECT_THROW(parse_config_text("experiment = \"moments\"\nmc = \"many\"\n"), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = \"isometry\"\nmc = 1\n").validate(), ConfigError);
  EXPECT_NO_THROW(parse_config_text("experiment = \"moments\"\n").validate());
}

TEST(Config, ExperimentFromCallerAndMismatch) {
  EXPECT_THROW(parse_config_text("mc = 10\n"), ConfigError);
  EXPECT_EQ(parse_config_text("mc = 10\n", Experiment::mild).experiment, Experiment::mild);
  EXPECT_EQ(parse_config_text("experiment = \"mild\"\n", Experiment::mild).experiment, Experiment::mild);
  EXPECT_THROW(parse_config_text("experiment = \"mild\"\n", Experiment::duality), ConfigError);
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/subdiff.toml"), ConfigError);
}

TEST(Moments, HalfIndexMeanAtUnitTime) {
  auto c = parse_config_text("experiment = \"moments\"\nbeta = 0.5\nmc = 100000\nseed = 42\n[check]\nt = [1.0]\nn = [1]\n");
  const auto r = run(c);
  ASSERT_EQ(r.checks.size(), 1u);
  const double oracle = 1.0 / std::tgamma(1.5);
  EXPECT_NEAR(oracle, 1.128379, 1e-6);
  EXPECT_NEAR(r.checks[0].oracle, oracle, 1e-12);
  EXPECT_LT(std::abs(r.checks[0].estimate - oracle), 4.0 * r.checks[0].se);
  EXPECT_TRUE(r.all_pass());
}

TEST(Determinism, WorkerCountDoesNotChangeOutputs) {
  auto c = parse_config_text(
      "experiment = \"moments\"\nmc = 4000\nseed = 5\n[check]\nt = [0.5, 1.0]\nbetas = [0.3, 0.8]\n");
  c.workers = 1;
  const auto one = run(c);
  c.workers = 4;
  const auto four = run(c);
  EXPECT_EQ(report_csv(one), report_csv(four));
  EXPECT_EQ(summary_json(one), summary_json(four));
  ASSERT_EQ(one.series.size(), four.series.size());
  for (std::size_t i = 0; i < one.series.size(); ++i) EXPECT_EQ(series_csv(one.series[i]), series_csv(four.series[i]));
}

TEST(Determinism, SimulationExperimentAcrossWorkers) {
  auto c = parse_config_text("experiment = \"mild\"\nmc = 300\nseed = 8\n[grid]\nsteps = 16\ntau_steps = 200\n");
  c.workers = 1;
  const auto one = run(c);
  c.workers = 3;
  EXPECT_EQ(report_csv(one), report_csv(run(c)));
}

TEST(Determinism, SeedChangesEstimates) {
  auto c = parse_config_text("experiment = \"moments\"\nmc = 2000\n[check]\nt = [1.0]\nn = [1]\n");
  c.seed = 1;
  const auto a = run(c);
  c.seed = 2;
  const auto b = run(c);
  EXPECT_NE(a.checks[0].estimate, b.checks[0].estimate);
}

TEST(Report, CsvLayout) {
  RunReport r;
  r.checks.push_back(CheckResult{"a, quoted \"name\"", 1.5, 1.0, 0.25, 2.0, 3.0, "|z| <= tol", true});
  const auto text = report_csv(r);
  EXPECT_EQ(text,
            "check,estimate,oracle,se,statistic,tolerance,rule,pass\n"
            "\"a, quoted \"\"name\"\"\",1.5,1,0.25,2,3,|z| <= tol,pass\n");
}

TEST(Report, DoublesRoundTrip) {
  RunReport r;
  const double v = 0.1 + 0.2;
  r.checks.push_back(CheckResult{"x", v, 0.0, 0.0, 0.0, 0.0, "r", false});
  const auto text = report_csv(r);
  const auto line = text.substr(text.find('\n') + 1);
  EXPECT_EQ(std::stod(line.substr(2, line.find(',', 2) - 2)), v);
  EXPECT_NE(line.find(",fail\n"), std::string::npos);
  EXPECT_FALSE(r.all_pass());
}

TEST(Report, EmptySeriesIsHeaderOnly) {
  RunReport r;
  r.series.push_back(Series{"empty", {"steps", "error"}, {}});
  const auto dir = scratch("empty");
  const auto files = emit_plot_data(r, dir);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "series_empty.csv");
  EXPECT_EQ(read_file(files[0]), "steps,error\n");
  std::filesystem::remove_all(dir);
}

TEST(Report, WriteOutputsProducesAllFiles) {
  auto c = parse_config_text("experiment = \"change-of-var\"\nseed = 3\n[check]\nlevels = 3\npaths = 20\n");
  const auto r = run(c);
  const auto dir = scratch("outputs");
  write_outputs(r, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.txt"));
  ASSERT_FALSE(r.series.empty());
  for (const auto& s : r.series) {
    const auto text = read_file(dir / ("series_" + s.name + ".csv"));
    EXPECT_EQ(text.substr(0, text.find('\n')), "level,steps,tau_step,rms_gap,mean_gap,fitted_order");
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 4u);
  }
  const auto json = read_file(dir / "summary.json");
  EXPECT_EQ(json.find("wall"), std::string::npos);
  EXPECT_NE(read_file(dir / "summary.txt").find("wall time"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Run, ExactnessExperimentsPassOnSmallBudgets) {
  for (const char* text : {"experiment = \"walsh-triple\"\n[check]\ntrials = 10\n",
                           "experiment = \"ito-formula\"\n[check]\nlevels = 3\npaths = 20\n",
                           "experiment = \"duality\"\nmc = 200\n[check]\nlevels = 3\npaths = 50\n"}) {
    const auto r = run(parse_config_text(text));
    EXPECT_FALSE(r.checks.empty()) << text;
    EXPECT_FALSE(r.notes.empty()) << text;
    EXPECT_LE(r.checks.front().statistic, r.checks.front().tolerance) << text;
  }
}

TEST(Run, ModuleErrorsNameTheExperiment) {
  const auto c = parse_config_text("experiment = \"moments\"\nmc = 10\n[check]\nn = [400]\nt = [1e300]\n");
  try {
    (void)run(c);
    FAIL() << "expected an error";
  } catch (const ConfigError&) {
    FAIL() << "module error reported as a config error";
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("moments: ", 0), 0u) << e.what();
  }
}

TEST(Run, ConfigErrorsPassThrough) {
  const auto c = parse_config_text("experiment = \"subordination\"\nmc = 10\n[check]\nx0 = [1.0, 2.0]\n");
  EXPECT_THROW((void)run(c), ConfigError);
}
