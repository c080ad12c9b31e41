#include "subdiff/fpk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "subdiff/errors.hpp"
#include "subdiff/parallel.hpp"
#include "subdiff/stats.hpp"
#include "subdiff/subordinator.hpp"

namespace subdiff {

TestFunctional TestFunctional::linear(HVector h) {
  TestFunctional f;
  f.kind_ = Kind::linear;
  f.h_ = std::move(h);
  return f;
}

TestFunctional TestFunctional::quadratic(HVector h) {
  TestFunctional f;
  f.kind_ = Kind::quadratic;
  f.h_ = std::move(h);
  return f;
}

TestFunctional TestFunctional::cylindrical(HVector h, Scalar g, Scalar dg, Scalar d2g) {
  if (!g || !dg || !d2g) throw ParameterError("cylindrical functional needs g, g' and g''");
  TestFunctional f;
  f.kind_ = Kind::cylindrical;
  f.h_ = std::move(h);
  f.g_ = std::move(g);
  f.dg_ = std::move(dg);
  f.d2g_ = std::move(d2g);
  return f;
}

namespace {
double project(const HVector& h, const HVector& x) {
  if (h.size() != x.size()) throw ParameterError("test functional direction does not match the state dimension");
  return h.dot(x);
}
}  // namespace

double TestFunctional::value(const HVector& x) const {
  const double p = project(h_, x);
  switch (kind_) {
    case Kind::linear: return p;
    case Kind::quadratic: return p * p;
    case Kind::cylindrical: return g_(p);
  }
  return 0.0;
}

HVector TestFunctional::gradient(const HVector& x) const {
  const double p = project(h_, x);
  switch (kind_) {
    case Kind::linear: return h_;
    case Kind::quadratic: return 2.0 * p * h_;
    case Kind::cylindrical: return dg_(p) * h_;
  }
  return h_;
}

double TestFunctional::second(const HVector& x) const {
  const double p = project(h_, x);
  switch (kind_) {
    case Kind::linear: return 0.0;
    case Kind::quadratic: return 2.0;
    case Kind::cylindrical: return d2g_(p);
  }
  return 0.0;
}

namespace {

std::vector<double> l1_weights(std::size_t n, double beta) {
  std::vector<double> b(n > 0 ? n : 1);
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double kk = static_cast<double>(k);
    b[k] = std::pow(kk + 1.0, 1.0 - beta) - (k == 0 ? 0.0 : std::pow(kk, 1.0 - beta));
  }
  return b;
}

// Plain L1 on node values, unit step, without the dt^{-beta}/Gamma(2-beta) factor.
std::vector<double> l1_sums(std::span<const double> f, const std::vector<double>& b) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < i; ++k) s += b[k] * (f[i - k] - f[i - k - 1]);
    d[i] = s;
  }
  return d;
}

}  // namespace

std::vector<double> caputo_derivative(std::span<const double> f, double dt, double beta, CaputoStart start) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("Caputo order must lie in (0, 1]");
  if (!(dt > 0.0)) throw ParameterError("Caputo grid step must be positive");
  const std::size_t n = f.size();
  const auto b = l1_weights(n, beta);
  const double scale = std::pow(dt, -beta) / std::tgamma(2.0 - beta);
  std::vector<double> d = l1_sums(f, b);
  for (auto& v : d) v *= scale;
  if (start == CaputoStart::plain || beta == 1.0) return d;

  const std::size_t K = std::min<std::size_t>({3, static_cast<std::size_t>(std::floor(1.0 / beta + 1e-12)), n - 1});
  if (K == 0) return d;
  // Work in unit-step time; the dt^{-beta} factor is applied at the end.
  Eigen::MatrixXd M(K, K);
  std::vector<std::vector<double>> defect(K);
  std::vector<double> g(n);
  for (std::size_t j = 0; j < K; ++j) {
    const double sigma = static_cast<double>(j + 1) * beta;
    for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(static_cast<double>(i), sigma);
    const auto l1 = l1_sums(g, b);
    const double exact = std::tgamma(1.0 + sigma) / std::tgamma(1.0 + sigma - beta);
    defect[j].resize(n);
    for (std::size_t i = 1; i < n; ++i) {
      defect[j][i] = exact * std::pow(static_cast<double>(i), sigma - beta) - l1[i] / std::tgamma(2.0 - beta);
    }
    for (std::size_t k = 0; k < K; ++k) M(j, static_cast<Eigen::Index>(k)) = std::pow(static_cast<double>(k + 1), sigma);
  }
  const auto lu = M.partialPivLu();
  Eigen::VectorXd rhs(K);
  const double unscale = std::pow(dt, -beta);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < K; ++j) rhs(static_cast<Eigen::Index>(j)) = defect[j][i];
    const Eigen::VectorXd w = lu.solve(rhs);
    double c = 0.0;
    for (std::size_t k = 0; k < K; ++k) c += w(static_cast<Eigen::Index>(k)) * (f[k + 1] - f[0]);
    d[i] += unscale * c;
  }
  return d;
}

std::vector<double> caputo_derivative(std::span<const double> f, std::span<const double> t_grid, double beta,
                                      CaputoStart start) {
  if (f.size() != t_grid.size()) throw ParameterError("Caputo values and grid differ in length");
  if (t_grid.size() < 2) return std::vector<double>(f.size(), 0.0);
  const double dt = t_grid[1] - t_grid[0];
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double step = t_grid[i] - t_grid[i - 1];
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
      throw ParameterError("Caputo L1 scheme needs a uniform grid");
    }
  }
  return caputo_derivative(f, dt, beta, start);
}

double apply_L0(const TestFunctional& phi, const HVector& x, const SDECoefficients& coeffs, const SpectralBasis& basis,
                double t) {
  const HVector grad = phi.gradient(x);
  double v = x.dot(coeffs.A.transpose() * grad);
  if (coeffs.F) v += coeffs.F(t, x).dot(grad);
  const double g2 = phi.second(x);
  if (g2 != 0.0) {
    // ||(C Q^{1/2})^* h||^2 = sum_j lambda_j (C^T h)_j^2
    const Eigen::VectorXd cth = coeffs.B.at(t, x).transpose() * phi.h();
    v += 0.5 * g2 * cth.cwiseProduct(basis.sqrt_lambda()).squaredNorm();
  }
  return v;
}

double EmpiricalMeasure::expectation(const TestFunctional& phi, std::size_t n) const {
  const auto& s = samples.at(n);
  if (s.rows() == 0) throw ParameterError("empirical measure has no samples");
  std::vector<double> v(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) v[static_cast<std::size_t>(i)] = phi.value(s.row(i).transpose());
  return summarize(v).mean;
}

EmpiricalMeasure sample_timechanged_measure(const SDECoefficients& coeffs, const SpectralBasis& basis,
                                            std::span<const double> t_grid, const SamplerSetup& setup) {
  if (setup.mc < 1) throw ParameterError("sampler needs mc >= 1");
  if (t_grid.empty() || t_grid.front() != 0.0) throw ParameterError("output grid must start at 0");
  coeffs.validate(basis);
  const BetaIndex beta(setup.beta);
  const std::vector<double> grid(t_grid.begin(), t_grid.end());
  const double T = grid.back();

  const auto paths = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    RngStream rng(setup.seed, 0xF9Fu, i);
    RngStream clock = rng.split(0);
    RngStream noise = rng.split(1);
    RngStream init = rng.split(2);
    std::vector<double> tau;
    InversePath inv = identity_inverse(grid);
    if (beta.degenerate()) {
      tau = uniform_grid(T, static_cast<std::size_t>(std::ceil(T / setup.d_tau - 1e-9)));
    } else {
      const auto sub = simulate_subordinator_until(beta, T, setup.d_tau, clock);
      inv = invert_path(sub, grid);
      tau.assign(sub.tau().begin(), sub.tau().end());
    }
    const auto q = simulate_qwiener(basis, std::move(tau), noise);
    const auto y = solve_classical_em(coeffs, q, coeffs.initial(init));
    return compose_solution(y, inv).values;
  });

  EmpiricalMeasure m;
  m.t = grid;
  const Eigen::Index d = coeffs.dim();
  m.samples.assign(grid.size(), Eigen::MatrixXd(static_cast<Eigen::Index>(setup.mc), d));
  for (std::size_t i = 0; i < setup.mc; ++i) {
    for (std::size_t n = 0; n < grid.size(); ++n) {
      m.samples[n].row(static_cast<Eigen::Index>(i)) = paths[i].row(static_cast<Eigen::Index>(n));
    }
  }
  return m;
}

FpkReport fractional_fpk_residual(const EmpiricalMeasure& measure, const SDECoefficients& coeffs,
                                  const TestFunctional& phi, const SpectralBasis& basis, double beta) {
  const std::size_t nt = measure.t.size();
  const std::size_t mc = measure.size();
  if (nt < 2 || mc < 2) throw ParameterError("FPK residual needs at least two times and two samples");
  // per-path residual curves
  std::vector<std::vector<double>> resid(nt, std::vector<double>(mc));
  std::vector<std::vector<double>> lhs(nt, std::vector<double>(mc)), rhs(nt, std::vector<double>(mc));
  std::vector<double> f(nt);
  for (std::size_t i = 0; i < mc; ++i) {
    for (std::size_t n = 0; n < nt; ++n) f[n] = phi.value(measure.samples[n].row(static_cast<Eigen::Index>(i)).transpose());
    const auto d = caputo_derivative(f, measure.t, beta, CaputoStart::corrected);
    for (std::size_t n = 0; n < nt; ++n) {
      const HVector x = measure.samples[n].row(static_cast<Eigen::Index>(i)).transpose();
      lhs[n][i] = d[n];
      // time-homogeneous test problems: L0 does not depend on t
      rhs[n][i] = apply_L0(phi, x, coeffs, basis, measure.t[n]);
      resid[n][i] = lhs[n][i] - rhs[n][i];
    }
  }
  FpkReport rep;
  for (std::size_t n = 1; n < nt; ++n) {
    const Estimate r = summarize(resid[n]);
    FpkRow row{measure.t[n], summarize(lhs[n]).mean, summarize(rhs[n]).mean, r.mean, r.se};
    rep.max_abs_z = std::max(rep.max_abs_z, z_score(r, 0.0));
    rep.rows.push_back(row);
  }
  rep.assumptions.emplace_back("noise and subordinator are independent by construction");
  rep.assumptions.emplace_back("coefficients are time-homogeneous, so L0 is evaluated without a clock argument");
  return rep;
}

FpkReport fractional_fpk_residual(const SDECoefficients& coeffs, const TestFunctional& phi, const SpectralBasis& basis,
                                  std::span<const double> t_grid, const SamplerSetup& setup, double se_target) {
  const auto measure = sample_timechanged_measure(coeffs, basis, t_grid, setup);
  FpkReport rep = fractional_fpk_residual(measure, coeffs, phi, basis, setup.beta);
  if (se_target > 0.0) {
    double worst = 0.0;
    for (const auto& r : rep.rows) worst = std::max(worst, r.se);
    if (worst > se_target) {
      std::ostringstream msg;
      msg << "Monte Carlo budget too small: largest SE " << worst << " exceeds the target " << se_target;
      rep.warnings.push_back(msg.str());
    }
  }
  return rep;
}

SubordinationReport subordination_identity_check(const SDECoefficients& coeffs, const TestFunctional& phi,
                                                 const SpectralBasis& basis, double t, std::size_t t_steps,
                                                 const SamplerSetup& setup) {
  if (setup.mc < 2) throw ParameterError("subordination check needs mc >= 2");
  if (!(t > 0.0) || t_steps < 1) throw ParameterError("subordination check needs t > 0 and t_steps >= 1");
  coeffs.validate(basis);
  const BetaIndex beta(setup.beta);
  const auto grid = uniform_grid(t, t_steps);

  const auto lhs = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    RngStream rng(setup.seed, 0x5B1u, i);
    RngStream clock = rng.split(0);
    RngStream noise = rng.split(1);
    RngStream init = rng.split(2);
    InversePath inv = beta.degenerate() ? identity_inverse(grid)
                                        : invert_path(simulate_subordinator_until(beta, t, setup.d_tau, clock), grid);
    const auto path = sample_tc_qwiener_given(basis, std::move(inv), noise);
    const auto x = solve_timechanged_em(coeffs, path, coeffs.initial(init));
    return phi.value(x.values.row(x.values.rows() - 1).transpose());
  });

  const auto rhs = run_replications(setup.mc, setup.workers, [&](std::size_t i) {
    RngStream rng(setup.seed, 0x5B2u, i);
    RngStream clock = rng.split(0);
    RngStream noise = rng.split(1);
    RngStream init = rng.split(2);
    const double e = beta.degenerate() ? t : sample_inverse_marginal(beta, t, clock);
    std::vector<double> tau{0.0};
    while (tau.back() < e) tau.push_back(std::min(e, tau.back() + setup.d_tau));
    if (tau.size() == 1) return phi.value(coeffs.initial(init));
    const auto q = simulate_qwiener(basis, std::move(tau), noise);
    const auto y = solve_classical_em(coeffs, q, coeffs.initial(init));
    return phi.value(y.values.row(y.values.rows() - 1).transpose());
  });

  const Estimate l = summarize(lhs), r = summarize(rhs);
  SubordinationReport rep;
  rep.lhs = l.mean;
  rep.lhs_se = l.se;
  rep.rhs = r.mean;
  rep.rhs_se = r.se;
  rep.se = std::hypot(l.se, r.se);
  rep.z = rep.se > 0.0 ? std::abs(l.mean - r.mean) / rep.se : (l.mean == r.mean ? 0.0 : INFINITY);
  return rep;
}

double mode_characteristic_function(double lambda, double beta, double u, double t) {
  if (!(lambda > 0.0)) throw ParameterError("mode eigenvalue must be positive");
  if (!(t >= 0.0)) throw ParameterError("time must be nonnegative");
  if (u == 0.0 || t == 0.0) return 1.0;
  return mittag_leffler(beta, -lambda * u * u * std::pow(t, beta) / 2.0);
}

std::vector<CharFunctionRow> char_function_check(const SpectralBasis& basis, double beta, double t,
                                                 std::span<const double> u_values, std::size_t mc, std::uint64_t seed,
                                                 unsigned workers) {
  if (mc < 2) throw ParameterError("characteristic-function check needs mc >= 2");
  const BetaIndex b(beta);
  const std::size_t J = basis.dim(), nu = u_values.size();
  const auto samples = run_replications(mc, workers, [&](std::size_t i) {
    RngStream rng(seed, 0xCF0u, i);
    const double e = sample_inverse_marginal(b, t, rng);
    std::vector<double> out(J * nu);
    for (std::size_t j = 0; j < J; ++j) {
      const double z = std::sqrt(basis.lambda()[j] * e) * rng.normal();
      for (std::size_t k = 0; k < nu; ++k) out[j * nu + k] = std::cos(u_values[k] * z);
    }
    return out;
  });
  std::vector<CharFunctionRow> rows;
  std::vector<double> v(mc);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < nu; ++k) {
      for (std::size_t i = 0; i < mc; ++i) v[i] = samples[i][j * nu + k];
      const Estimate est = summarize(v);
      CharFunctionRow row;
      row.mode = j;
      row.u = u_values[k];
      row.empirical = est.mean;
      row.se = est.se;
      row.analytic = mode_characteristic_function(basis.lambda()[j], beta, u_values[k], t);
      row.z = z_score(est, row.analytic);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace subdiff
