#include "subdiff/spectral.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include <boost/math/special_functions/zeta.hpp>

#include "subdiff/errors.hpp"
#include "subdiff/parallel.hpp"
#include "subdiff/stats.hpp"

namespace subdiff {

LambdaRule LambdaRule::power_law(double p) {
  LambdaRule r;
  r.kind = Kind::power;
  r.p = p;
  return r;
}

LambdaRule LambdaRule::geometric_law(double ratio) {
  LambdaRule r;
  r.kind = Kind::geometric;
  r.ratio = ratio;
  return r;
}

LambdaRule LambdaRule::explicit_values(std::vector<double> values) {
  LambdaRule r;
  r.kind = Kind::explicit_list;
  r.values = std::move(values);
  return r;
}

SpectralBasis::SpectralBasis(std::vector<double> lambda, double tail_mass,
                             std::vector<double> generator_mu)
    : lambda_(std::move(lambda)), tail_(tail_mass), mu_(std::move(generator_mu)) {
  if (lambda_.empty()) throw ParameterError("spectral basis needs at least one mode");
  for (std::size_t j = 0; j < lambda_.size(); ++j) {
    if (!(lambda_[j] > 0.0) || !std::isfinite(lambda_[j])) {
      throw ParameterError("eigenvalue lambda_" + std::to_string(j + 1) + " must be positive and finite");
    }
  }
  if (!mu_.empty() && mu_.size() != lambda_.size()) {
    throw ParameterError("generator eigenvalues must match the basis dimension");
  }
  for (double m : mu_) {
    if (!std::isfinite(m)) throw ParameterError("generator eigenvalues must be finite");
  }
  if (!(tail_ >= 0.0)) throw ParameterError("tail mass must be nonnegative");
  sqrt_lambda_.resize(static_cast<Eigen::Index>(lambda_.size()));
  for (std::size_t j = 0; j < lambda_.size(); ++j) sqrt_lambda_[static_cast<Eigen::Index>(j)] = std::sqrt(lambda_[j]);
  trace_ = pairwise_sum(lambda_);
}

SpectralBasis SpectralBasis::with_generator(std::vector<double> mu) const {
  return SpectralBasis(lambda_, tail_, std::move(mu));
}

SpectralBasis SpectralBasis::normalized() const {
  std::vector<double> l = lambda_;
  for (double& x : l) x /= trace_;
  return SpectralBasis(std::move(l), tail_ / trace_, mu_);
}

SpectralBasis make_basis(std::size_t dim_J, const LambdaRule& rule) {
  switch (rule.kind) {
    case LambdaRule::Kind::power: {
      if (dim_J < 1) throw ParameterError("basis dimension must be >= 1");
      if (!(rule.p > 1.0)) {
        throw ParameterError("power rule j^-p is not trace class for p <= 1 (p = " + std::to_string(rule.p) + ")");
      }
      std::vector<double> l(dim_J);
      for (std::size_t j = 0; j < dim_J; ++j) l[j] = std::pow(static_cast<double>(j + 1), -rule.p);
      const double tail = std::max(0.0, boost::math::zeta(rule.p) - pairwise_sum(l));
      return SpectralBasis(std::move(l), tail);
    }
    case LambdaRule::Kind::geometric: {
      if (dim_J < 1) throw ParameterError("basis dimension must be >= 1");
      if (!(rule.ratio > 0.0 && rule.ratio < 1.0)) {
        throw ParameterError("geometric rule needs ratio in (0, 1)");
      }
      std::vector<double> l(dim_J);
      for (std::size_t j = 0; j < dim_J; ++j) l[j] = std::pow(rule.ratio, static_cast<double>(j + 1));
      const double tail = std::pow(rule.ratio, static_cast<double>(dim_J + 1)) / (1.0 - rule.ratio);
      return SpectralBasis(std::move(l), tail);
    }
    case LambdaRule::Kind::explicit_list:
      if (dim_J != 0 && dim_J != rule.values.size()) {
        throw ParameterError("explicit eigenvalue list has " + std::to_string(rule.values.size()) +
                             " entries but dim_J = " + std::to_string(dim_J));
      }
      return SpectralBasis(rule.values, 0.0);
  }
  throw ParameterError("unknown eigenvalue rule");
}

double hs_norm_sq(const HSOperator& phi, const SpectralBasis& basis) {
  if (phi.cols() != static_cast<Eigen::Index>(basis.dim())) {
    throw ParameterError("operator has " + std::to_string(phi.cols()) + " columns, basis has " +
                         std::to_string(basis.dim()) + " modes");
  }
  double s = 0.0;
  for (Eigen::Index j = 0; j < phi.cols(); ++j) s += basis.lambda()[static_cast<std::size_t>(j)] * phi.col(j).squaredNorm();
  return s;
}

double k_norm_sq(const Eigen::Ref<const Eigen::VectorXd>& w, const SpectralBasis& basis) {
  return w.cwiseProduct(basis.sqrt_lambda()).squaredNorm();
}

QWienerPath::QWienerPath(std::vector<double> tau_grid, Eigen::MatrixXd w, SpectralBasis basis)
    : tau_(std::move(tau_grid)), w_(std::move(w)), basis_(std::move(basis)) {
  if (tau_.empty() || tau_[0] != 0.0) throw ParameterError("Q-Wiener tau grid must start at 0");
  for (std::size_t k = 1; k < tau_.size(); ++k) {
    if (!(tau_[k] > tau_[k - 1])) throw ParameterError("Q-Wiener tau grid must be strictly increasing");
  }
  if (w_.rows() != static_cast<Eigen::Index>(tau_.size()) ||
      w_.cols() != static_cast<Eigen::Index>(basis_.dim())) {
    throw ParameterError("Q-Wiener coordinate matrix has the wrong shape");
  }
}

HVector QWienerPath::value(std::size_t k) const {
  return w_.row(static_cast<Eigen::Index>(k)).transpose().cwiseProduct(basis_.sqrt_lambda());
}

TimeChangedQWienerPath::TimeChangedQWienerPath(InversePath inverse, Eigen::MatrixXd w_at_E,
                                               SpectralBasis basis)
    : inverse_(std::move(inverse)), w_(std::move(w_at_E)), basis_(std::move(basis)) {
  if (w_.rows() != static_cast<Eigen::Index>(inverse_.size()) ||
      w_.cols() != static_cast<Eigen::Index>(basis_.dim())) {
    throw ParameterError("time-changed coordinate matrix has the wrong shape");
  }
}

HVector TimeChangedQWienerPath::value(std::size_t m) const {
  return w_.row(static_cast<Eigen::Index>(m)).transpose().cwiseProduct(basis_.sqrt_lambda());
}

QWienerPath simulate_qwiener(const SpectralBasis& basis, std::vector<double> tau_grid, RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(tau_grid.size());
  const auto J = static_cast<Eigen::Index>(basis.dim());
  if (n == 0) throw ParameterError("Q-Wiener tau grid is empty");
  Eigen::MatrixXd w(n, J);
  w.row(0).setZero();
  for (Eigen::Index k = 1; k < n; ++k) {
    const double dt = tau_grid[static_cast<std::size_t>(k)] - tau_grid[static_cast<std::size_t>(k - 1)];
    if (!(dt > 0.0)) throw ParameterError("Q-Wiener tau grid must be strictly increasing");
    const double sd = std::sqrt(dt);
    for (Eigen::Index j = 0; j < J; ++j) w(k, j) = w(k - 1, j) + sd * rng.normal();
  }
  return QWienerPath(std::move(tau_grid), std::move(w), basis);
}

QWienerPath coarsen(const QWienerPath& qpath, std::size_t factor) {
  if (factor < 1) throw ParameterError("coarsening factor must be >= 1");
  const std::size_t n = (qpath.size() - 1) / factor + 1;
  std::vector<double> tau(n);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(n), qpath.w().cols());
  for (std::size_t k = 0; k < n; ++k) {
    tau[k] = qpath.tau()[k * factor];
    w.row(static_cast<Eigen::Index>(k)) = qpath.w().row(static_cast<Eigen::Index>(k * factor));
  }
  return QWienerPath(std::move(tau), std::move(w), qpath.basis());
}

TimeChangedQWienerPath compose_time_change(const QWienerPath& qpath, const InversePath& inverse,
                                           Interpolation mode, RngStream* rng) {
  if (mode == Interpolation::bridge && rng == nullptr) {
    throw ParameterError("Brownian-bridge interpolation needs a random stream");
  }
  const auto tau = qpath.tau();
  const auto e = inverse.values();
  const auto J = static_cast<Eigen::Index>(qpath.basis().dim());
  if (e.empty()) return TimeChangedQWienerPath(inverse, Eigen::MatrixXd(0, J), qpath.basis());
  if (e.back() > tau.back()) {
    std::ostringstream msg;
    msg << "inverse path reaches E = " << e.back() << " beyond the Q-Wiener horizon " << tau.back();
    throw HorizonError(msg.str());
  }
  if (e.front() < 0.0) throw ParameterError("inverse path values must be nonnegative");

  const auto& w = qpath.w();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(e.size()), J);
  // Last interpolated point inside the current tau interval (bridge mode).
  std::size_t bridge_interval = tau.size();
  double left_s = 0.0;
  Eigen::RowVectorXd left_w;

  for (std::size_t m = 0; m < e.size(); ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    if (m > 0 && e[m] == e[m - 1]) {
      out.row(row) = out.row(row - 1);
      continue;
    }
    // first node strictly greater than e[m]
    const auto it = std::upper_bound(tau.begin(), tau.end(), e[m]);
    const std::size_t k = static_cast<std::size_t>(it - tau.begin()) - 1;
    if (tau[k] == e[m]) {
      out.row(row) = w.row(static_cast<Eigen::Index>(k));
      continue;
    }
    const double t0 = tau[k], t1 = tau[k + 1];
    const auto r0 = static_cast<Eigen::Index>(k), r1 = static_cast<Eigen::Index>(k + 1);
    if (mode == Interpolation::linear) {
      const double a = (e[m] - t0) / (t1 - t0);
      out.row(row) = (1.0 - a) * w.row(r0) + a * w.row(r1);
    } else {
      if (bridge_interval != k) {
        bridge_interval = k;
        left_s = t0;
        left_w = w.row(r0);
      }
      const double a = (e[m] - left_s) / (t1 - left_s);
      const double sd = std::sqrt((e[m] - left_s) * (t1 - e[m]) / (t1 - left_s));
      Eigen::RowVectorXd v = (1.0 - a) * left_w + a * w.row(r1);
      for (Eigen::Index j = 0; j < J; ++j) v[j] += sd * rng->normal();
      out.row(row) = v;
      left_s = e[m];
      left_w = v;
    }
  }
  return TimeChangedQWienerPath(inverse, std::move(out), qpath.basis());
}

TimeChangedSample simulate_tc_qwiener(const SpectralBasis& basis, BetaIndex beta,
                                      std::span<const double> t_grid, double d_tau,
                                      const RngStream& rng) {
  if (t_grid.empty()) throw ParameterError("time grid is empty");
  RngStream clock = rng.split(0);
  RngStream noise = rng.split(1);
  SubordinatorPath sub = simulate_subordinator_until(beta, t_grid.back(), d_tau, clock);
  InversePath inv = invert_path(sub, t_grid);
  QWienerPath q = simulate_qwiener(basis, std::vector<double>(sub.tau().begin(), sub.tau().end()), noise);
  TimeChangedQWienerPath p = compose_time_change(q, inv);
  return TimeChangedSample{std::move(sub), std::move(q), std::move(p)};
}

TimeChangedQWienerPath sample_tc_qwiener_given(const SpectralBasis& basis, InversePath inverse,
                                               RngStream& rng) {
  const auto e = inverse.values();
  const auto J = static_cast<Eigen::Index>(basis.dim());
  Eigen::MatrixXd w(static_cast<Eigen::Index>(e.size()), J);
  if (!e.empty()) {
    const double sd0 = std::sqrt(e[0]);
    for (Eigen::Index j = 0; j < J; ++j) w(0, j) = sd0 == 0.0 ? 0.0 : sd0 * rng.normal();
  }
  for (std::size_t m = 1; m < e.size(); ++m) {
    const auto r = static_cast<Eigen::Index>(m);
    const double de = e[m] - e[m - 1];
    if (de == 0.0) {
      w.row(r) = w.row(r - 1);
      continue;
    }
    const double sd = std::sqrt(de);
    for (Eigen::Index j = 0; j < J; ++j) w(r, j) = w(r - 1, j) + sd * rng.normal();
  }
  return TimeChangedQWienerPath(std::move(inverse), std::move(w), basis);
}

std::vector<double> realized_quadratic_variation(const TimeChangedQWienerPath& path) {
  std::vector<double> qv(path.size(), 0.0);
  const auto& w = path.w_at_E();
  for (std::size_t m = 1; m < path.size(); ++m) {
    const auto r = static_cast<Eigen::Index>(m);
    qv[m] = qv[m - 1] + k_norm_sq((w.row(r) - w.row(r - 1)).transpose(), path.basis());
  }
  return qv;
}

Eigen::MatrixXd realized_quadratic_variation_by_mode(const TimeChangedQWienerPath& path) {
  const auto& w = path.w_at_E();
  Eigen::MatrixXd qv = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  for (Eigen::Index r = 1; r < w.rows(); ++r) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double d = w(r, j) - w(r - 1, j);
      qv(r, j) = qv(r - 1, j) + path.basis().lambda()[static_cast<std::size_t>(j)] * d * d;
    }
  }
  return qv;
}

FourthMomentReport increment_fourth_moment_check(const SpectralBasis& basis, BetaIndex beta,
                                                 std::span<const std::pair<double, double>> t_pairs,
                                                 std::size_t mc, std::uint64_t seed, double d_tau,
                                                 unsigned workers) {
  if (mc < 2) throw ParameterError("fourth-moment check needs mc >= 2");
  double t_max = 0.0;
  for (const auto& [a, b] : t_pairs) {
    if (!(a >= 0.0 && b > a)) throw ParameterError("time pairs must satisfy 0 <= t1 < t2");
    t_max = std::max(t_max, b);
  }
  // Per replication: (||dW||^4, dE^2) for every pair.
  const auto samples = run_replications(mc, workers, [&](std::size_t i) {
    RngStream rng(seed, 0x4A7u, i);
    RngStream clock = rng.split(0);
    RngStream noise = rng.split(1);
    std::vector<double> ts;
    for (const auto& [a, b] : t_pairs) {
      ts.push_back(a);
      ts.push_back(b);
    }
    std::vector<double> sorted = ts;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> e_at(sorted.size(), 0.0);
    if (beta.degenerate()) {
      e_at = sorted;
    } else {
      const auto sub = simulate_subordinator_until(beta, t_max, d_tau, clock);
      const auto inv = invert_path(sub, sorted);
      e_at.assign(inv.values().begin(), inv.values().end());
    }
    auto lookup = [&](double t) {
      return e_at[static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin())];
    };
    std::vector<std::pair<double, double>> out;
    for (const auto& [a, b] : t_pairs) {
      const double de = lookup(b) - lookup(a);
      double norm_sq = 0.0;
      for (std::size_t j = 0; j < basis.dim(); ++j) {
        const double z = std::sqrt(basis.lambda()[j] * de) * noise.normal();
        norm_sq += z * z;
      }
      out.emplace_back(norm_sq * norm_sq, de * de);
    }
    return out;
  });

  double tr2 = 0.0;
  for (double l : basis.lambda()) tr2 += l * l;
  const double tr = basis.trace();

  FourthMomentReport report;
  for (std::size_t p = 0; p < t_pairs.size(); ++p) {
    std::vector<double> lhs(mc), de2(mc);
    for (std::size_t i = 0; i < mc; ++i) {
      lhs[i] = samples[i][p].first;
      de2[i] = samples[i][p].second;
    }
    const Estimate l = summarize(lhs);
    const Estimate d = summarize(de2);
    FourthMomentRow row;
    row.t1 = t_pairs[p].first;
    row.t2 = t_pairs[p].second;
    row.lhs = l.mean;
    row.lhs_se = l.se;
    row.mean_dE_sq = d.mean;
    row.rhs_three_trace_sq = 3.0 * tr * tr * d.mean;
    row.rhs_exact = (tr * tr + 2.0 * tr2) * d.mean;
    row.rel_err_three_trace_sq = std::abs(l.mean - row.rhs_three_trace_sq) / row.rhs_three_trace_sq;
    row.rel_err_exact = std::abs(l.mean - row.rhs_exact) / row.rhs_exact;
    report.rows.push_back(row);
  }
  return report;
}

void write_path_csv(std::ostream& os, const TimeChangedQWienerPath& path) {
  os << "t,E_t";
  for (std::size_t j = 0; j < path.basis().dim(); ++j) os << ",w_" << (j + 1);
  os << '\n';
  os.precision(17);
  const auto& w = path.w_at_E();
  for (std::size_t m = 0; m < path.size(); ++m) {
    os << path.t()[m] << ',' << path.inverse().values()[m];
    for (Eigen::Index j = 0; j < w.cols(); ++j) os << ',' << w(static_cast<Eigen::Index>(m), j);
    os << '\n';
  }
}

std::vector<QuadraticVariationReport> quadratic_variation_ladder(const SpectralBasis& basis, double beta,
                                                                 double horizon, std::span<const std::size_t> steps,
                                                                 std::size_t paths, double d_tau, std::uint64_t seed,
                                                                 unsigned workers) {
  if (paths < 2) throw ParameterError("quadratic variation check needs paths >= 2");
  for (auto n : steps) {
    if (n < 1 || n > std::numeric_limits<std::uint32_t>::max()) throw ParameterError("grid steps out of range");
  }
  const BetaIndex b(beta);
  const double tr = basis.trace();
  const auto errs = run_replications(paths, workers, [&](std::size_t i) {
    RngStream rng(seed, 0x9A1u, i);
    RngStream clock = rng.split(0);
    const RngStream noise_root = rng.split(1);
    std::optional<SubordinatorPath> sub;
    if (!b.degenerate()) sub = simulate_subordinator_until(b, horizon, d_tau, clock);
    std::vector<double> out;
    for (auto n : steps) {
      const auto grid = uniform_grid(horizon, n);
      RngStream noise = noise_root.split(static_cast<std::uint32_t>(n));
      const auto p = sample_tc_qwiener_given(basis, sub ? invert_path(*sub, grid) : identity_inverse(grid), noise);
      const auto qv = realized_quadratic_variation(p);
      const auto e = p.inverse().values();
      double num = 0.0, den = 0.0;
      for (std::size_t m = 0; m < grid.size(); ++m) {
        num += (qv[m] - tr * e[m]) * (qv[m] - tr * e[m]);
        den += (tr * e[m]) * (tr * e[m]);
      }
      out.push_back(den > 0.0 ? std::sqrt(num / den) : 0.0);
    }
    return out;
  });
  std::vector<QuadraticVariationReport> reports;
  std::vector<double> v(paths);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    for (std::size_t i = 0; i < paths; ++i) v[i] = errs[i][k];
    const Estimate est = summarize(v);
    reports.push_back(QuadraticVariationReport{est.mean, est.se, steps[k], paths});
  }
  return reports;
}

QuadraticVariationReport quadratic_variation_check(const SpectralBasis& basis, double beta, double horizon,
                                                   std::size_t steps, std::size_t paths, double d_tau,
                                                   std::uint64_t seed, unsigned workers) {
  const std::size_t one[] = {steps};
  return quadratic_variation_ladder(basis, beta, horizon, one, paths, d_tau, seed, workers).front();
}

}  // namespace subdiff
