#include "subdiff/subordinator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "subdiff/errors.hpp"
#include "subdiff/stats.hpp"

namespace subdiff {
namespace {

void require_nondecreasing(std::span<const double> v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] >= v[i - 1])) {
      std::ostringstream msg;
      msg << what << " must be nondecreasing (index " << i << ": " << v[i - 1] << " -> " << v[i] << ")";
      throw ParameterError(msg.str());
    }
  }
}

void require_increasing(std::span<const double> v, const char* what) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) {
      std::ostringstream msg;
      msg << what << " must be strictly increasing (index " << i << ")";
      throw ParameterError(msg.str());
    }
  }
}

// The single-argument integrate overload is non-const in the installed Boost,
// so each thread keeps its own instance.
boost::math::quadrature::exp_sinh<double>& half_line_quadrature() {
  thread_local boost::math::quadrature::exp_sinh<double> q;
  return q;
}

// Kanter's representation of a standard one-sided beta-stable variate
// (Laplace transform exp(-u^beta)).
double kanter_stable(double beta, RngStream& rng) {
  const double u = rng.uniform_open();
  const double w = rng.exponential();
  const double pi = std::numbers::pi;
  const double a = std::pow(std::sin(beta * pi * u) / std::sin(pi * u), 1.0 / (1.0 - beta)) *
                   std::sin((1.0 - beta) * pi * u) / std::sin(beta * pi * u);
  return std::pow(a / w, (1.0 - beta) / beta);
}

}  // namespace

BetaIndex::BetaIndex(double beta) : beta_(beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw ParameterError("beta must lie in (0, 1], got " + std::to_string(beta));
  }
}

SubordinatorPath::SubordinatorPath(std::vector<double> tau_grid, std::vector<double> values)
    : tau_(std::move(tau_grid)), values_(std::move(values)) {
  if (tau_.size() < 2 || tau_.size() != values_.size()) {
    throw ParameterError("subordinator path needs >= 2 nodes and matching value count");
  }
  if (tau_.front() != 0.0) throw ParameterError("subordinator tau grid must start at 0");
  if (values_.front() != 0.0) throw ParameterError("subordinator path must start at 0");
  require_increasing(tau_, "subordinator tau grid");
  require_nondecreasing(values_, "subordinator path");
}

InversePath::InversePath(std::vector<double> t_grid, std::vector<double> values)
    : t_(std::move(t_grid)), values_(std::move(values)) {
  if (t_.empty() || t_.size() != values_.size()) {
    throw ParameterError("inverse path needs matching, non-empty grid and values");
  }
  if (values_.front() < 0.0) throw ParameterError("inverse path must start at a nonnegative value");
  require_increasing(t_, "inverse path t grid");
  require_nondecreasing(values_, "inverse path");
}

std::vector<double> uniform_grid(double horizon, std::size_t steps) {
  if (!(horizon > 0.0) || steps == 0) throw ParameterError("uniform grid needs horizon > 0 and steps >= 1");
  std::vector<double> g(steps + 1);
  const double h = horizon / static_cast<double>(steps);
  for (std::size_t i = 0; i <= steps; ++i) g[i] = static_cast<double>(i) * h;
  g.back() = horizon;
  return g;
}

double sample_stable_increment(BetaIndex beta, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw ParameterError("stable increment needs dt > 0");
  if (beta.degenerate()) return dt;
  return std::pow(dt, 1.0 / beta.value()) * kanter_stable(beta.value(), rng);
}

SubordinatorPath simulate_subordinator_path(BetaIndex beta, double tau_max, double d_tau,
                                            RngStream& rng) {
  if (!(tau_max > 0.0) || !(d_tau > 0.0) || !(d_tau < tau_max)) {
    throw ParameterError("subordinator grid needs tau_max > 0 and 0 < d_tau < tau_max");
  }
  const auto steps = static_cast<std::size_t>(std::ceil(tau_max / d_tau - 1e-12));
  std::vector<double> tau(steps + 1), u(steps + 1);
  tau[0] = 0.0;
  u[0] = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    tau[k] = std::min(tau_max, static_cast<double>(k) * d_tau);
    u[k] = u[k - 1] + sample_stable_increment(beta, tau[k] - tau[k - 1], rng);
  }
  return SubordinatorPath(std::move(tau), std::move(u));
}

SubordinatorPath simulate_subordinator_until(BetaIndex beta, double t_max, double d_tau,
                                             RngStream& rng) {
  if (!(t_max > 0.0) || !(d_tau > 0.0)) throw ParameterError("need t_max > 0 and d_tau > 0");
  std::vector<double> tau{0.0}, u{0.0};
  std::size_t k = 0;
  while (u.back() <= t_max) {
    ++k;
    tau.push_back(static_cast<double>(k) * d_tau);
    u.push_back(u.back() + sample_stable_increment(beta, d_tau, rng));
  }
  return SubordinatorPath(std::move(tau), std::move(u));
}

SubordinatorPath coarsen(const SubordinatorPath& path, std::size_t factor) {
  if (factor == 0) throw ParameterError("coarsening factor must be >= 1");
  std::vector<double> tau, u;
  for (std::size_t k = 0; k < path.size(); k += factor) {
    tau.push_back(path.tau()[k]);
    u.push_back(path.values()[k]);
  }
  return SubordinatorPath(std::move(tau), std::move(u));
}

InversePath invert_path(const SubordinatorPath& path, std::span<const double> t_grid) {
  if (t_grid.empty()) throw ParameterError("empty t grid");
  require_increasing(t_grid, "t grid");
  if (t_grid.back() > path.max_value()) {
    std::ostringstream msg;
    msg << "t = " << t_grid.back() << " exceeds the subordinator range " << path.max_value()
        << "; simulate the subordinator over a longer operational horizon";
    throw HorizonError(msg.str());
  }
  const auto tau = path.tau();
  const auto u = path.values();
  std::vector<double> e(t_grid.size());
  std::size_t k = 0;
  for (std::size_t m = 0; m < t_grid.size(); ++m) {
    while (u[k] < t_grid[m]) ++k;
    e[m] = tau[k];
  }
  return InversePath(std::vector<double>(t_grid.begin(), t_grid.end()), std::move(e));
}

InversePath identity_inverse(std::span<const double> t_grid) {
  return InversePath(std::vector<double>(t_grid.begin(), t_grid.end()),
                     std::vector<double>(t_grid.begin(), t_grid.end()));
}

double sample_inverse_marginal(BetaIndex beta, double t, RngStream& rng) {
  if (!(t >= 0.0)) throw ParameterError("inverse marginal needs t >= 0");
  if (t == 0.0) return 0.0;
  if (beta.degenerate()) return t;
  const double s = kanter_stable(beta.value(), rng);
  return std::pow(t / s, beta.value());
}

double inverse_moment(BetaIndex beta, double t, int n) {
  if (n < 1) throw ParameterError("moment order must be >= 1");
  if (!(t >= 0.0)) throw ParameterError("inverse moment needs t >= 0");
  if (t == 0.0) return 0.0;
  const double nb = static_cast<double>(n) * beta.value();
  const double log_m = nb * std::log(t) + std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(nb + 1.0);
  if (log_m > std::log(std::numeric_limits<double>::max())) {
    throw NumericError("inverse moment overflows double range (log value " + std::to_string(log_m) + ")");
  }
  return std::exp(log_m);
}

double mittag_leffler(double beta, double z, const MLParams& params) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("Mittag-Leffler index must lie in (0, 1]");
  if (params.series_terms < 1 || !(params.switch_radius > 0.0)) {
    throw ParameterError("MLParams needs series_terms >= 1 and switch_radius > 0");
  }
  if (!std::isfinite(z)) throw ParameterError("Mittag-Leffler argument must be finite");
  if (beta == 1.0) return std::exp(z);
  if (z == 0.0) return 1.0;

  const double az = std::abs(z);
  // Largest |term| of the series in log scale; a proxy for cancellation loss
  // when z < 0.
  auto log_max_term = [&] {
    double best = 0.0;
    for (int k = 1; k < params.series_terms; ++k) {
      const double lt = k * std::log(az) - std::lgamma(beta * k + 1.0);
      best = std::max(best, lt);
      if (lt < best - 50.0) break;
    }
    return best;
  };

  const bool use_series =
      z > 0.0 || (az < params.switch_radius && log_max_term() < std::log(1e6));
  if (use_series) {
    long double sum = 0.0L;
    const long double lz = std::log(static_cast<long double>(az));
    for (int k = 0; k < params.series_terms; ++k) {
      const long double log_mag = k * lz - std::lgamma(static_cast<long double>(beta) * k + 1.0L);
      if (log_mag > 11000.0L) throw NumericError("Mittag-Leffler series overflows at z = " + std::to_string(z));
      long double term = std::exp(log_mag);
      if (z < 0.0 && (k % 2 == 1)) term = -term;
      sum += term;
      if (k > 2 && std::exp(log_mag) < 1e-21L * std::abs(sum) &&
          static_cast<double>(k) * beta > az) {
        return static_cast<double>(sum);
      }
    }
    std::ostringstream msg;
    msg << "Mittag-Leffler series did not converge within " << params.series_terms
        << " terms (beta = " << beta << ", z = " << z << ", partial sum = "
        << static_cast<double>(sum) << ")";
    throw NumericError(msg.str());
  }

  // z < 0: completely monotone integral representation, substituting r = s / x^{1/beta}.
  const double pi = std::numbers::pi;
  const double scale = std::pow(az, 1.0 / beta);
  const double sb = std::sin(beta * pi), cb = std::cos(beta * pi);
  auto integrand = [&](double s) {
    const double r = s / scale;
    const double rb = std::pow(r, beta);
    const double k = sb * std::pow(r, beta - 1.0) / (pi * (rb * rb + 2.0 * rb * cb + 1.0));
    return k * std::exp(-s) / scale;
  };
  double err = 0.0, l1 = 0.0;
  const double val = half_line_quadrature().integrate(integrand, 1e-13, &err, &l1);
  if (!(err <= 1e-10 * std::max(std::abs(val), 1e-300)) || !std::isfinite(val)) {
    std::ostringstream msg;
    msg << "Mittag-Leffler quadrature failed (beta = " << beta << ", z = " << z << ", value = " << val
        << ", error estimate = " << err << ")";
    throw NumericError(msg.str());
  }
  return val;
}

LaplaceCheckReport laplace_subordination_check(const std::function<double(double)>& h,
                                               BetaIndex beta, std::span<const double> s_grid,
                                               std::size_t samples, std::uint64_t seed,
                                               const std::function<double(double)>& h_transform) {
  if (samples == 0) throw ParameterError("laplace check needs samples >= 1");
  for (double s : s_grid) {
    if (!(s > 0.0)) throw ParameterError("laplace check needs positive s values");
  }
  auto& quad = half_line_quadrature();
  auto transform = [&](const std::function<double(double)>& f, double s) {
    double err = 0.0;
    const double v = quad.integrate([&](double x) { return std::exp(-s * x) * f(x); }, 1e-10, &err);
    if (!std::isfinite(v) || err > 1e-6 * std::max(1.0, std::abs(v))) {
      throw NumericError("Laplace-transform quadrature failed at s = " + std::to_string(s));
    }
    return v;
  };

  std::vector<double> e1(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    RngStream rng(seed, /*experiment=*/0x1A9u, i);
    e1[i] = sample_inverse_marginal(beta, 1.0, rng);
  }

  LaplaceCheckReport report;
  const double b = beta.value();
  for (double s : s_grid) {
    std::vector<double> per_sample(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const double e = e1[i];
      per_sample[i] = transform([&](double t) { return h(std::pow(t, b) * e); }, s);
    }
    const Estimate lhs = summarize(per_sample);
    const double sb = std::pow(s, b);
    const double ht = h_transform ? h_transform(sb) : transform(h, sb);
    LaplaceCheckRow row;
    row.s = s;
    row.lhs = lhs.mean;
    row.lhs_se = lhs.se;
    row.rhs = std::pow(s, b - 1.0) * ht;
    row.rel_err = std::abs(row.lhs - row.rhs) / std::abs(row.rhs);
    report.max_rel_err = std::max(report.max_rel_err, row.rel_err);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace subdiff
