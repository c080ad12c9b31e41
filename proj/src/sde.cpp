#include "subdiff/sde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "subdiff/errors.hpp"
#include "subdiff/parallel.hpp"
#include "subdiff/stats.hpp"

namespace subdiff {
namespace {

void check_blow_up(const HVector& x, double t, std::size_t step, const char* solver) {
  const double n = x.norm();
  if (!(n <= kBlowUpThreshold)) {
    std::ostringstream msg;
    msg << solver << " diverged: ||x|| = " << n << " exceeds " << kBlowUpThreshold << " at step " << step
        << " (t = " << t << "); check the coefficients and step size";
    throw DivergedError(msg.str());
  }
}

HVector drift(const SDECoefficients& c, double s, const HVector& x) {
  HVector d = c.A * x;
  if (c.F) d += c.F(s, x);
  return d;
}

}  // namespace

HVector SDECoefficients::initial(RngStream& rng) const {
  if (x0_sampler) {
    HVector x = x0_sampler(rng);
    if (x.size() != x0.size()) throw ParameterError("initial-state sampler returned the wrong dimension");
    return x;
  }
  return x0;
}

void SDECoefficients::validate(const SpectralBasis& basis) const {
  const Eigen::Index d = x0.size();
  if (d < 1) throw ParameterError("initial state must be nonempty");
  if (A.rows() != d || A.cols() != d) throw ParameterError("generator must be square with the state dimension");
  if (!A.allFinite() || !x0.allFinite()) throw ParameterError("SDE coefficients must be finite");
  if (B.rows() != d) throw ParameterError("diffusion rows must match the state dimension");
  if (B.cols() != static_cast<Eigen::Index>(basis.dim())) {
    throw ParameterError("diffusion columns must match the number of noise modes");
  }
}

Eigen::MatrixXd diagonal_generator(std::span<const double> mu) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(mu.size()));
  for (std::size_t j = 0; j < mu.size(); ++j) d[static_cast<Eigen::Index>(j)] = -mu[j];
  return d.asDiagonal();
}

SDECoefficients diagonal_ou(const SpectralBasis& basis, HVector x0) {
  if (!basis.has_generator()) throw ParameterError("OU test problem needs generator eigenvalues mu_j");
  if (x0.size() != static_cast<Eigen::Index>(basis.dim())) throw ParameterError("x0 must match the basis dimension");
  SDECoefficients c;
  c.A = diagonal_generator(basis.generator_mu());
  const auto d = static_cast<Eigen::Index>(basis.dim());
  const HSOperator id = HSOperator::Identity(d, d);
  c.B = HSIntegrand::time_function([id](double) { return id; }, d, d);
  c.x0 = std::move(x0);
  return c;
}

Semigroup::Semigroup(std::vector<double> mu) : mu_(std::move(mu)) {
  if (mu_.empty()) throw ParameterError("semigroup needs at least one mode");
  for (double m : mu_) {
    if (!std::isfinite(m)) throw ParameterError("semigroup eigenvalues must be finite");
  }
}

Eigen::VectorXd Semigroup::factors(double t) const {
  Eigen::VectorXd f(static_cast<Eigen::Index>(mu_.size()));
  for (std::size_t j = 0; j < mu_.size(); ++j) f[static_cast<Eigen::Index>(j)] = std::exp(-mu_[j] * t);
  return f;
}

HVector Semigroup::apply(double t, const HVector& x) const {
  if (x.size() != static_cast<Eigen::Index>(mu_.size())) throw ParameterError("semigroup dimension mismatch");
  return factors(t).cwiseProduct(x);
}

bool Semigroup::contraction() const noexcept {
  return std::all_of(mu_.begin(), mu_.end(), [](double m) { return m >= 0.0; });
}

SolutionPath solve_classical_em(const SDECoefficients& coeffs, const QWienerPath& qpath) {
  return solve_classical_em(coeffs, qpath, coeffs.x0);
}

SolutionPath solve_classical_em(const SDECoefficients& coeffs, const QWienerPath& qpath, const HVector& x0) {
  coeffs.validate(qpath.basis());
  const auto tau = qpath.tau();
  const auto& w = qpath.w();
  const Eigen::VectorXd& sl = qpath.basis().sqrt_lambda();
  SolutionPath out{std::vector<double>(tau.begin(), tau.end()), Eigen::MatrixXd(w.rows(), x0.size()), {}};
  HVector y = x0;
  out.values.row(0) = y.transpose();
  for (Eigen::Index k = 0; k + 1 < w.rows(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double s = tau[ku];
    const double dt = tau[ku + 1] - s;
    const Eigen::VectorXd dW = (w.row(k + 1) - w.row(k)).transpose().cwiseProduct(sl);
    y += drift(coeffs, s, y) * dt + coeffs.B.at(s, y) * dW;
    check_blow_up(y, tau[ku + 1], ku + 1, "classical Euler-Maruyama");
    out.values.row(k + 1) = y.transpose();
  }
  return out;
}

SolutionPath solve_timechanged_em(const SDECoefficients& coeffs, const TimeChangedQWienerPath& path, DriftClock clock) {
  return solve_timechanged_em(coeffs, path, coeffs.x0, clock);
}

SolutionPath solve_timechanged_em(const SDECoefficients& coeffs, const TimeChangedQWienerPath& path, const HVector& x0,
                                  DriftClock clock) {
  coeffs.validate(path.basis());
  const auto t = path.t();
  const auto e = path.inverse().values();
  const auto& w = path.w_at_E();
  const Eigen::VectorXd& sl = path.basis().sqrt_lambda();
  SolutionPath out{std::vector<double>(t.begin(), t.end()), Eigen::MatrixXd(w.rows(), x0.size()), {}};
  HVector x = x0;
  out.values.row(0) = x.transpose();
  for (Eigen::Index m = 0; m + 1 < w.rows(); ++m) {
    const auto mu = static_cast<std::size_t>(m);
    const double dc = clock == DriftClock::operational ? e[mu + 1] - e[mu] : t[mu + 1] - t[mu];
    const Eigen::VectorXd dw = (w.row(m + 1) - w.row(m)).transpose();
    // No clock movement and no noise: the state is carried over bitwise.
    if (dc == 0.0 && dw.isZero(0.0)) {
      out.values.row(m + 1) = out.values.row(m);
      continue;
    }
    const double s = clock == DriftClock::operational ? e[mu] : t[mu];
    HVector step = coeffs.B.at(s, x) * dw.cwiseProduct(sl);
    if (dc != 0.0) step += drift(coeffs, s, x) * dc;
    x += step;
    check_blow_up(x, t[mu + 1], mu + 1, "time-changed Euler-Maruyama");
    out.values.row(m + 1) = x.transpose();
  }
  return out;
}

SolutionPath compose_solution(const SolutionPath& y, const InversePath& inverse) {
  const auto e = inverse.values();
  const auto& tau = y.grid;
  if (!e.empty() && e.back() > tau.back()) {
    std::ostringstream msg;
    msg << "inverse path reaches " << e.back() << " beyond the classical solution horizon " << tau.back();
    throw HorizonError(msg.str());
  }
  SolutionPath out{std::vector<double>(inverse.t().begin(), inverse.t().end()),
                   Eigen::MatrixXd(static_cast<Eigen::Index>(e.size()), y.values.cols()), y.warnings};
  for (std::size_t m = 0; m < e.size(); ++m) {
    const auto it = std::upper_bound(tau.begin(), tau.end(), e[m]);
    const std::size_t k = static_cast<std::size_t>(it - tau.begin()) - 1;
    const auto r = static_cast<Eigen::Index>(m);
    if (tau[k] == e[m]) {
      out.values.row(r) = y.values.row(static_cast<Eigen::Index>(k));
    } else {
      const double a = (e[m] - tau[k]) / (tau[k + 1] - tau[k]);
      out.values.row(r) = (1.0 - a) * y.values.row(static_cast<Eigen::Index>(k)) +
                          a * y.values.row(static_cast<Eigen::Index>(k + 1));
    }
  }
  return out;
}

SolutionPath solve_dual(const SDECoefficients& coeffs, const QWienerPath& qpath, const InversePath& inverse) {
  return compose_solution(solve_classical_em(coeffs, qpath), inverse);
}

DualityReport duality_check(const SDECoefficients& coeffs, const QWienerPath& qpath, const InversePath& inverse) {
  DualityReport rep;
  rep.x = solve_timechanged_em(coeffs, compose_time_change(qpath, inverse));
  rep.y_of_e = solve_dual(coeffs, qpath, inverse);
  for (Eigen::Index m = 0; m < rep.x.values.rows(); ++m) {
    rep.sup_gap = std::max(rep.sup_gap, (rep.x.values.row(m) - rep.y_of_e.values.row(m)).norm());
  }
  return rep;
}

RefinementReport duality_refinement(const SDECoefficients& coeffs, const RefinementSetup& setup) {
  if (setup.mc < 1) throw ParameterError("refinement needs mc >= 1");
  coeffs.validate(setup.basis);
  const auto gaps = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    std::vector<double> g;
    for (const auto& lv : coupled_levels(setup, i)) g.push_back(duality_check(coeffs, lv.qpath, lv.inverse).sup_gap);
    return g;
  });
  RefinementReport rep;
  const auto steps = refinement_t_steps(setup);
  std::vector<double> h, rms;
  for (std::size_t l = 0; l < setup.levels; ++l) {
    std::vector<double> g(setup.mc), g2(setup.mc);
    for (std::size_t i = 0; i < setup.mc; ++i) {
      g[i] = gaps[i][l];
      g2[i] = g[i] * g[i];
    }
    RefinementRow row;
    row.level = l;
    row.tau_step = setup.h0 / std::pow(2.0, static_cast<double>(l));
    row.t_steps = steps[l];
    row.rms_gap = std::sqrt(summarize(g2).mean);
    row.mean_gap = summarize(g).mean;
    rep.rows.push_back(row);
    h.push_back(row.tau_step);
    rms.push_back(row.mean_gap);
  }
  bool positive = setup.levels >= 2;
  for (double r : rms) positive = positive && r > 0.0;
  rep.fitted_order = positive ? fitted_order(h, rms) : 0.0;
  return rep;
}

SolutionPath solve_mild(const Semigroup& semigroup, const HSIntegrand& B, const TimeChangedQWienerPath& path,
                        const HVector& u0) {
  const auto d = static_cast<Eigen::Index>(semigroup.mu().size());
  if (u0.size() != d || B.rows() != d) throw ParameterError("mild solution dimensions must match the semigroup");
  if (B.cols() != static_cast<Eigen::Index>(path.basis().dim())) {
    throw ParameterError("diffusion columns must match the number of noise modes");
  }
  const auto t = path.t();
  const auto& w = path.w_at_E();
  const Eigen::VectorXd& sl = path.basis().sqrt_lambda();
  SolutionPath out{std::vector<double>(t.begin(), t.end()), Eigen::MatrixXd(w.rows(), d), {}};
  if (!semigroup.contraction()) {
    out.warnings.emplace_back("semigroup is not a contraction (some mu_j < 0)");
  }
  HVector u = u0;
  out.values.row(0) = u.transpose();
  for (Eigen::Index m = 0; m + 1 < w.rows(); ++m) {
    const auto mu = static_cast<std::size_t>(m);
    const Eigen::VectorXd dw = (w.row(m + 1) - w.row(m)).transpose();
    if (!dw.isZero(0.0)) u += B.at(t[mu], u) * dw.cwiseProduct(sl);
    u = semigroup.apply(t[mu + 1] - t[mu], u);
    check_blow_up(u, t[mu + 1], mu + 1, "mild solution");
    out.values.row(m + 1) = u.transpose();
  }
  return out;
}

std::vector<MildVarianceRow> mild_variance_check(const Semigroup& semigroup, const SpectralBasis& basis, double beta,
                                                 std::span<const double> t_grid, std::size_t mc, std::uint64_t seed,
                                                 double d_tau, unsigned workers) {
  if (mc < 2) throw ParameterError("mild variance check needs mc >= 2");
  const std::size_t J = basis.dim();
  if (semigroup.mu().size() != J) throw ParameterError("semigroup and basis dimensions differ");
  const BetaIndex b(beta);
  const std::vector<double> grid(t_grid.begin(), t_grid.end());
  const auto d = static_cast<Eigen::Index>(J);
  const HSOperator id = HSOperator::Identity(d, d);
  const auto B = HSIntegrand::time_function([id](double) { return id; }, d, d);

  const auto samples = run_replications(mc, workers, [&](std::size_t i) {
    RngStream rng(seed, 0x3D1u, i);
    RngStream clock = rng.split(0);
    RngStream noise = rng.split(1);
    InversePath inv = b.degenerate() ? identity_inverse(grid)
                                     : invert_path(simulate_subordinator_until(b, grid.back(), d_tau, clock), grid);
    const auto path = sample_tc_qwiener_given(basis, std::move(inv), noise);
    const auto u = solve_mild(semigroup, B, path, HVector::Zero(d));
    const auto e = path.inverse().values();
    const double T = grid.back();
    std::vector<double> out(2 * J);
    for (std::size_t j = 0; j < J; ++j) {
      const double uj = u.values(u.values.rows() - 1, static_cast<Eigen::Index>(j));
      double s = 0.0;
      for (std::size_t m = 0; m + 1 < e.size(); ++m) {
        s += std::exp(-2.0 * semigroup.mu()[j] * (T - grid[m])) * (e[m + 1] - e[m]);
      }
      out[2 * j] = uj * uj;
      out[2 * j + 1] = basis.lambda()[j] * s;
    }
    return out;
  });

  std::vector<MildVarianceRow> rows;
  std::vector<double> a(mc), o(mc);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < mc; ++i) {
      a[i] = samples[i][2 * j];
      o[i] = samples[i][2 * j + 1];
    }
    const Estimate ea = summarize(a), eo = summarize(o), diff = paired_difference(a, o);
    rows.push_back(MildVarianceRow{j, ea.mean, ea.se, eo.mean, eo.se, z_score(diff, 0.0)});
  }
  return rows;
}

}  // namespace subdiff
