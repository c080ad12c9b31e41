#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "subdiff/fpk.hpp"
#include "subdiff/harness.hpp"
#include "subdiff/rng.hpp"
#include "subdiff/subordinator.hpp"

namespace py = pybind11;

namespace {

py::array_t<double> to_array(std::span<const double> v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict report_dict(const subdiff::RunReport& r) {
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict d;
    d["name"] = c.name;
    d["estimate"] = c.estimate;
    d["oracle"] = c.oracle;
    d["se"] = c.se;
    d["statistic"] = c.statistic;
    d["tolerance"] = c.tolerance;
    d["rule"] = c.rule;
    d["pass"] = c.pass;
    checks.append(d);
  }
  py::dict series;
  for (const auto& s : r.series) series[py::str(s.name)] = py::dict(py::arg("header") = s.header, py::arg("rows") = s.rows);
  py::dict out;
  out["experiment"] = std::string(subdiff::experiment_name(r.config.experiment));
  out["all_pass"] = r.all_pass();
  out["checks"] = checks;
  out["series"] = series;
  out["notes"] = r.notes;
  out["summary_json"] = subdiff::summary_json(r);
  out["wall_seconds"] = r.wall_seconds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_subdiff, m) {
  m.doc() = "Time-changed Q-Wiener calculus: samplers, oracles and the experiment harness";

  m.def("mittag_leffler", [](double beta, double z) { return subdiff::mittag_leffler(beta, z); }, py::arg("beta"),
        py::arg("z"), "One-parameter Mittag-Leffler function E_beta(z).");
  m.def("inverse_moment",
        [](double beta, double t, int n) { return subdiff::inverse_moment(subdiff::BetaIndex(beta), t, n); },
        py::arg("beta"), py::arg("t"), py::arg("n"), "Exact E[E_t^n] for the inverse beta-stable subordinator.");
  m.def("mode_characteristic_function", &subdiff::mode_characteristic_function, py::arg("lam"), py::arg("beta"),
        py::arg("u"), py::arg("t"), "E exp(i u <W_{E_t}, e_j>) for a mode with eigenvalue lam.");

  m.def(
      "sample_inverse",
      [](double beta, double t, std::size_t n, std::uint64_t seed) {
        const subdiff::BetaIndex b(beta);
        std::vector<double> v(n);
        {
          py::gil_scoped_release release;
          for (std::size_t i = 0; i < n; ++i) {
            subdiff::RngStream rng(seed, 0x9E0u, i);
            v[i] = subdiff::sample_inverse_marginal(b, t, rng);
          }
        }
        return to_array(v);
      },
      py::arg("beta"), py::arg("t"), py::arg("n"), py::arg("seed") = 1, "Independent exact draws of E_t.");

  m.def(
      "simulate_inverse_path",
      [](double beta, double t_max, std::size_t steps, double d_tau, std::uint64_t seed) {
        const subdiff::BetaIndex b(beta);
        const auto grid = subdiff::uniform_grid(t_max, steps);
        subdiff::RngStream rng(seed, 0x9E1u, 0);
        const auto sub = subdiff::simulate_subordinator_until(b, t_max, d_tau, rng);
        const auto inv = b.degenerate() ? subdiff::identity_inverse(grid) : subdiff::invert_path(sub, grid);
        return py::make_tuple(to_array(sub.tau()), to_array(sub.values()), to_array(inv.t()), to_array(inv.values()));
      },
      py::arg("beta"), py::arg("t_max"), py::arg("steps"), py::arg("d_tau") = 1e-3, py::arg("seed") = 1,
      "Subordinator path and its inverse on a uniform grid: (tau, U, t, E).");

  m.def(
      "caputo_derivative",
      [](const std::vector<double>& f, double dt, double beta, bool corrected) {
        return to_array(subdiff::caputo_derivative(
            f, dt, beta, corrected ? subdiff::CaputoStart::corrected : subdiff::CaputoStart::plain));
      },
      py::arg("f"), py::arg("dt"), py::arg("beta"), py::arg("corrected") = false,
      "L1 Caputo derivative of samples on a uniform grid.");

  m.def("experiments", [] {
    std::vector<std::string> names;
    for (auto e : subdiff::all_experiments()) names.emplace_back(subdiff::experiment_name(e));
    return names;
  });

  m.def(
      "run_experiment",
      [](const std::string& name, const std::string& config_text, std::optional<std::uint64_t> seed,
         std::optional<unsigned> workers) {
        auto cfg = subdiff::parse_config_text(config_text, subdiff::parse_experiment(name));
        if (seed) cfg.seed = *seed;
        if (workers) cfg.workers = *workers;
        cfg.validate();
        subdiff::RunReport r;
        {
          py::gil_scoped_release release;
          r = subdiff::run(cfg);
        }
        return report_dict(r);
      },
      py::arg("name"), py::arg("config") = "", py::arg("seed") = py::none(), py::arg("workers") = py::none(),
      "Run a harness experiment from TOML-style config text and return its report.");
}
