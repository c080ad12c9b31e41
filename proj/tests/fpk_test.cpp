#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "subdiff/errors.hpp"
#include "subdiff/fpk.hpp"
#include "subdiff/stats.hpp"
#include "subdiff/subordinator.hpp"

using namespace subdiff;

namespace {

SpectralBasis ou_basis() {
  return make_basis(0, LambdaRule::explicit_values({0.5, 0.3, 0.2})).with_generator({0.5, 1.0, 2.0});
}

SDECoefficients ou_problem(const SpectralBasis& basis) { return diagonal_ou(basis, Eigen::Vector3d(1.0, -1.0, 0.5)); }

SDECoefficients noise_only(const SpectralBasis& basis) {
  SDECoefficients c = diagonal_ou(basis, HVector::Zero(static_cast<Eigen::Index>(basis.dim())));
  c.A.setZero();
  return c;
}

// Independent oracle: Caputo derivative of t^p is Gamma(p+1)/Gamma(p+1-beta) t^{p-beta}.
double caputo_power(double p, double beta, double t) {
  return std::tgamma(p + 1.0) / std::tgamma(p + 1.0 - beta) * std::pow(t, p - beta);
}

std::vector<double> sample(std::size_t n, double dt, double (*f)(double)) {
  std::vector<double> v(n + 1);
  for (std::size_t i = 0; i <= n; ++i) v[i] = f(static_cast<double>(i) * dt);
  return v;
}

}  // namespace

TEST(CaputoTest, ConstantHasZeroDerivative) {
  const std::vector<double> f(33, 2.5);
  for (double beta : {0.3, 0.5, 1.0}) {
    for (auto start : {CaputoStart::plain, CaputoStart::corrected}) {
      for (double d : caputo_derivative(f, 0.1, beta, start)) EXPECT_DOUBLE_EQ(d, 0.0);
    }
  }
}

TEST(CaputoTest, LinearFunctionIsExact) {
  const auto f = sample(64, 1.0 / 64, [](double t) { return t; });
  const auto d = caputo_derivative(f, 1.0 / 64, 0.5);
  EXPECT_NEAR(d.back(), 1.128379, 1e-6);
  EXPECT_NEAR(d.back(), 1.0 / std::tgamma(1.5), 1e-12);
  const auto dc = caputo_derivative(f, 1.0 / 64, 0.5, CaputoStart::corrected);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_NEAR(dc[i], caputo_power(1.0, 0.5, i / 64.0), 1e-10);
}

TEST(CaputoTest, BetaOneIsBackwardDifference) {
  const auto f = sample(10, 0.1, [](double t) { return std::sin(t); });
  const auto d = caputo_derivative(f, 0.1, 1.0);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_NEAR(d[i], (f[i] - f[i - 1]) / 0.1, 1e-12);
}

TEST(CaputoTest, SquareConvergesAtTwoMinusBeta) {
  for (double beta : {0.3, 0.5, 0.7}) {
    std::vector<double> err;
    for (std::size_t n : {16u, 32u, 64u, 128u}) {
      const auto f = sample(n, 1.0 / n, [](double t) { return t * t; });
      err.push_back(std::abs(caputo_derivative(f, 1.0 / n, beta).back() - caputo_power(2.0, beta, 1.0)));
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
      EXPECT_NEAR(std::log2(err[k - 1] / err[k]), 2.0 - beta, 0.1) << "beta " << beta;
    }
  }
}

TEST(CaputoTest, MittagLefflerEigenfunction) {
  const double beta = 0.5;
  const std::size_t n = 200;
  const double dt = 1.0 / n;
  for (double a : {0.5, 1.0, 2.0}) {
    std::vector<double> f(n + 1);
    for (std::size_t i = 0; i <= n; ++i) f[i] = mittag_leffler(beta, -a * std::pow(i * dt, beta));
    const auto plain = caputo_derivative(f, dt, beta);
    const auto corrected = caputo_derivative(f, dt, beta, CaputoStart::corrected);
    double worst = 0.0, worst_late = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      worst = std::max(worst, std::abs(corrected[i] + a * f[i]));
      if (i >= n / 2) worst_late = std::max(worst_late, std::abs(plain[i] + a * f[i]));
    }
    EXPECT_LT(worst, 5e-3 * a) << "a " << a;
    EXPECT_LT(worst_late, 2e-2 * a) << "a " << a;
  }
}

TEST(CaputoTest, CorrectedStartRemovesSingularError) {
  const double beta = 0.5;
  const auto f = sample(20, 0.05, [](double t) { return 1.0 - 2.0 * std::sqrt(t) + 0.5 * t; });
  const auto plain = caputo_derivative(f, 0.05, beta);
  const auto corrected = caputo_derivative(f, 0.05, beta, CaputoStart::corrected);
  const double exact1 = -2.0 * caputo_power(0.5, beta, 0.05) + 0.5 * caputo_power(1.0, beta, 0.05);
  EXPECT_GT(std::abs(plain[1] - exact1), 0.1);
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double t = 0.05 * i;
    EXPECT_NEAR(corrected[i], -2.0 * caputo_power(0.5, beta, t) + 0.5 * caputo_power(1.0, beta, t), 1e-9);
  }
}

TEST(CaputoTest, RejectsBadInput) {
  const std::vector<double> f{0.0, 1.0, 2.0};
  const std::vector<double> grid{0.0, 0.1, 0.3};
  EXPECT_THROW((void)caputo_derivative(f, grid, 0.5), ParameterError);
  EXPECT_THROW((void)caputo_derivative(f, 0.1, 0.0), ParameterError);
  EXPECT_THROW((void)caputo_derivative(f, 0.1, 1.2), ParameterError);
  EXPECT_THROW((void)caputo_derivative(f, -0.1, 0.5), ParameterError);
  const std::vector<double> ok{0.0, 0.1, 0.2};
  EXPECT_NO_THROW((void)caputo_derivative(f, ok, 0.5));
}

TEST(TestFunctionalTest, DerivativesMatchFiniteDifferences) {
  const HVector h = Eigen::Vector3d(0.3, -1.0, 2.0);
  const HVector x = Eigen::Vector3d(0.7, 0.2, -0.4);
  const auto phi = TestFunctional::cylindrical(
      h, [](double p) { return std::sin(p); }, [](double p) { return std::cos(p); },
      [](double p) { return -std::sin(p); });
  const double eps = 1e-6;
  for (Eigen::Index j = 0; j < 3; ++j) {
    HVector xp = x, xm = x;
    xp(j) += eps;
    xm(j) -= eps;
    EXPECT_NEAR((phi.value(xp) - phi.value(xm)) / (2 * eps), phi.gradient(x)(j), 1e-8);
  }
  const auto q = TestFunctional::quadratic(h);
  EXPECT_NEAR(q.value(x), std::pow(h.dot(x), 2), 1e-14);
  EXPECT_EQ(q.second(x), 2.0);
  EXPECT_EQ(TestFunctional::linear(h).second(x), 0.0);
  EXPECT_THROW((void)TestFunctional::linear(h).value(HVector::Zero(2)), ParameterError);
}

TEST(ApplyL0Test, Examples) {
  const auto basis = ou_basis();
  const HVector x = Eigen::Vector3d(1.5, -0.5, 2.0);
  const auto free = noise_only(basis);
  EXPECT_EQ(apply_L0(TestFunctional::linear(Eigen::Vector3d(1, 2, 3)), x, free, basis), 0.0);

  const HVector h = Eigen::Vector3d(1.0, -2.0, 0.5);
  const double trace = 0.5 * 1.0 + 0.3 * 4.0 + 0.2 * 0.25;
  EXPECT_NEAR(apply_L0(TestFunctional::quadratic(h), x, free, basis), trace, 1e-12);
  EXPECT_NEAR(apply_L0(TestFunctional::quadratic(h), HVector::Zero(3), free, basis), trace, 1e-12);

  const auto ou = ou_problem(basis);
  EXPECT_NEAR(apply_L0(TestFunctional::linear(Eigen::Vector3d(1, 0, 0)), x, ou, basis), -0.5 * 1.5, 1e-12);
  // quadratic under OU: 2 <x,h> <Ax,h> + trace
  const double ax_h = -0.5 * 1.5 * 1.0 + -1.0 * -0.5 * -2.0 + -2.0 * 2.0 * 0.5;
  EXPECT_NEAR(apply_L0(TestFunctional::quadratic(h), x, ou, basis), 2.0 * h.dot(x) * ax_h + trace, 1e-12);
}

TEST(FpkResidualTest, OuLinearFractional) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.beta = 0.5;
  s.mc = 4000;
  s.seed = 11;
  const auto grid = uniform_grid(1.0, 20);
  const auto rep = fractional_fpk_residual(ou_problem(basis), TestFunctional::linear(Eigen::Vector3d(1, 1, 1)), basis,
                                           grid, s);
  ASSERT_EQ(rep.rows.size(), 20u);
  EXPECT_LT(rep.max_abs_z, 3.0);
  EXPECT_FALSE(rep.assumptions.empty());
}

TEST(FpkResidualTest, TimeChangedWienerQuadratic) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.beta = 0.5;
  s.mc = 4000;
  s.seed = 12;
  const HVector h = Eigen::Vector3d(1.0, 1.0, 1.0) / std::sqrt(basis.trace());
  const auto grid = uniform_grid(1.0, 20);
  const auto rep = fractional_fpk_residual(noise_only(basis), TestFunctional::quadratic(h), basis, grid, s);
  for (const auto& r : rep.rows) EXPECT_NEAR(r.rhs, 1.0, 1e-12);
  EXPECT_LT(rep.max_abs_z, 3.0);
}

TEST(FpkResidualTest, ClassicalLimit) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.beta = 1.0;
  s.mc = 4000;
  s.seed = 13;
  const auto grid = uniform_grid(1.0, 20);
  const auto ou = fractional_fpk_residual(ou_problem(basis), TestFunctional::linear(Eigen::Vector3d(1, 0, 0)), basis,
                                          grid, s);
  EXPECT_LT(ou.max_abs_z, 3.0);
  const auto sq = fractional_fpk_residual(noise_only(basis), TestFunctional::quadratic(Eigen::Vector3d(1, 1, 0)), basis,
                                          grid, s);
  EXPECT_LT(sq.max_abs_z, 3.0);
}

TEST(FpkResidualTest, MartingaleHasZeroGenerator) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.mc = 2000;
  s.seed = 14;
  const auto grid = uniform_grid(1.0, 10);
  const auto rep = fractional_fpk_residual(noise_only(basis), TestFunctional::linear(Eigen::Vector3d(1, -1, 2)), basis,
                                           grid, s);
  for (const auto& r : rep.rows) EXPECT_EQ(r.rhs, 0.0);
  EXPECT_LT(rep.max_abs_z, 3.0);
}

TEST(FpkResidualTest, WarnsWhenBudgetTooSmall) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.mc = 50;
  s.seed = 15;
  const auto grid = uniform_grid(1.0, 5);
  const auto rep = fractional_fpk_residual(ou_problem(basis), TestFunctional::linear(Eigen::Vector3d(1, 0, 0)), basis,
                                           grid, s, 1e-4);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(FpkResidualTest, DeterministicAcrossWorkers) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.mc = 64;
  s.seed = 16;
  const auto grid = uniform_grid(1.0, 5);
  const auto a = sample_timechanged_measure(ou_problem(basis), basis, grid, s);
  s.workers = 3;
  const auto b = sample_timechanged_measure(ou_problem(basis), basis, grid, s);
  for (std::size_t n = 0; n < grid.size(); ++n) EXPECT_EQ(a.samples[n], b.samples[n]);
  EXPECT_EQ(a.expectation(TestFunctional::linear(Eigen::Vector3d(1, 0, 0)), 0), 1.0);
}

TEST(SubordinationTest, ClassicalLimit) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.beta = 1.0;
  s.mc = 4000;
  s.seed = 21;
  s.d_tau = 1e-2;
  const auto rep =
      subordination_identity_check(ou_problem(basis), TestFunctional::linear(Eigen::Vector3d(1, 0, 0)), basis, 1.0, 100, s);
  EXPECT_LT(rep.z, 3.0);
  EXPECT_NEAR(rep.lhs, std::exp(-0.5), 4.0 * rep.lhs_se + 5e-3);
}

TEST(SubordinationTest, WienerSecondMoment) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.beta = 0.5;
  s.mc = 4000;
  s.seed = 22;
  s.d_tau = 1e-2;
  const double t = 1.0;
  double lhs = 0.0, rhs = 0.0, var = 0.0;
  for (Eigen::Index j = 0; j < 3; ++j) {
    HVector e = HVector::Zero(3);
    e(j) = 1.0;
    s.seed = 22 + static_cast<std::uint64_t>(j);
    const auto rep = subordination_identity_check(noise_only(basis), TestFunctional::quadratic(e), basis, t, 100, s);
    EXPECT_LT(rep.z, 3.5);
    lhs += rep.lhs;
    rhs += rep.rhs;
    var += rep.lhs_se * rep.lhs_se;
  }
  const double exact = basis.trace() * std::pow(t, 0.5) / std::tgamma(1.5);
  EXPECT_LT(std::abs(lhs - exact) / std::sqrt(var), 3.0);
  EXPECT_NEAR(rhs, exact, 0.1 * exact);
}

TEST(SubordinationTest, OuLinear) {
  const auto basis = ou_basis();
  SamplerSetup s;
  s.beta = 0.5;
  s.mc = 20000;
  s.seed = 23;
  s.d_tau = 1e-2;
  const auto rep =
      subordination_identity_check(ou_problem(basis), TestFunctional::linear(Eigen::Vector3d(1, 1, 1)), basis, 1.0, 200, s);
  EXPECT_LT(rep.z, 3.0);
  EXPECT_GT(rep.se, 0.0);
}

TEST(CharFunctionTest, AnalyticValues) {
  EXPECT_EQ(mode_characteristic_function(0.7, 0.5, 0.0, 2.0), 1.0);
  EXPECT_NEAR(mode_characteristic_function(0.7, 1.0, 1.3, 2.0), std::exp(-0.7 * 1.69 * 2.0 / 2.0), 1e-12);
  EXPECT_NEAR(mode_characteristic_function(1.0, 0.5, 1.0, 1.0), std::exp(0.25) * std::erfc(0.5), 1e-10);
  EXPECT_NEAR(mode_characteristic_function(1.0, 0.5, 1.0, 1.0), 0.615690, 1e-6);
  EXPECT_THROW((void)mode_characteristic_function(0.0, 0.5, 1.0, 1.0), ParameterError);
}

TEST(CharFunctionTest, EmpiricalMatchesMittagLeffler) {
  const auto basis = ou_basis();
  const std::vector<double> u{0.5, 1.0, 2.0};
  const auto rows = char_function_check(basis, 0.5, 1.0, u, 20000, 31, 1);
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& r : rows) EXPECT_LT(std::abs(r.z), 3.0) << "mode " << r.mode << " u " << r.u;
  const auto single = char_function_check(make_basis(0, LambdaRule::explicit_values({1.0})), 0.5, 1.0,
                                          std::vector<double>{1.0}, 20000, 32, 1);
  EXPECT_NEAR(single[0].analytic, 0.615690, 1e-6);
  EXPECT_LT(std::abs(single[0].z), 3.0);
}
