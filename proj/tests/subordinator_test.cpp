#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "subdiff/errors.hpp"
#include "subdiff/stats.hpp"
#include "subdiff/subordinator.hpp"

using namespace subdiff;

namespace {

// 1 / Gamma(1.5)
constexpr double kInvGamma15 = 1.1283791670955126;

// CDF of the one-sided 1/2-stable law with Laplace transform exp(-sqrt(u))
// (a Levy law with scale 1/2).
double levy_half_cdf(double x) { return std::erfc(std::sqrt(1.0 / (4.0 * x))); }

// Median by bisection on the CDF.
double levy_half_median() {
  double lo = 1e-6, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (levy_half_cdf(mid) < 0.5 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

// e^{x^2} erfc(x) = E_{1/2}(-x), directly for moderate x and by the
// asymptotic expansion beyond.
double ml_half_oracle(double x) {
  if (x < 6.0) return std::exp(x * x) * std::erfc(x);
  double term = 1.0, sum = 1.0;
  for (int n = 1; n < 30; ++n) {
    term *= -(2.0 * n - 1.0) / (2.0 * x * x);
    sum += term;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

}  // namespace

TEST(BetaIndex, RejectsOutOfRange) {
  EXPECT_THROW(BetaIndex(0.0), ParameterError);
  EXPECT_THROW(BetaIndex(1.5), ParameterError);
  EXPECT_THROW(BetaIndex(-0.2), ParameterError);
  EXPECT_NO_THROW(BetaIndex(1.0));
  EXPECT_TRUE(BetaIndex(1.0).degenerate());
}

TEST(StableIncrement, DegenerateBetaIsDeterministic) {
  RngStream rng(1, 0, 0);
  EXPECT_EQ(sample_stable_increment(BetaIndex(1.0), 0.1, rng), 0.1);
}

TEST(StableIncrement, RejectsNonpositiveStep) {
  RngStream rng(1, 0, 0);
  EXPECT_THROW(sample_stable_increment(BetaIndex(0.5), 0.0, rng), ParameterError);
  EXPECT_THROW(sample_stable_increment(BetaIndex(0.5), -1.0, rng), ParameterError);
}

TEST(StableIncrement, LaplaceTransformAtUnitStep) {
  RngStream rng(11, 0, 0);
  std::vector<double> v(100000);
  for (auto& x : v) x = std::exp(-sample_stable_increment(BetaIndex(0.5), 1.0, rng));
  EXPECT_LT(z_score(summarize(v), std::exp(-1.0)), 3.0);
}

// Laplace law: E exp(-u dU) = exp(-dtau u^beta).
TEST(StableIncrement, LaplaceLawAcrossArguments) {
  for (double beta : {0.3, 0.5, 0.7, 0.9}) {
    for (double u : {0.5, 1.0, 2.0}) {
      const double dtau = 0.3;
      RngStream rng(12, static_cast<std::uint64_t>(beta * 100), static_cast<std::uint64_t>(u * 10));
      std::vector<double> v(50000);
      for (auto& x : v) x = std::exp(-u * sample_stable_increment(BetaIndex(beta), dtau, rng));
      EXPECT_LT(z_score(summarize(v), std::exp(-dtau * std::pow(u, beta))), 4.0)
          << "beta=" << beta << " u=" << u;
    }
  }
}

TEST(SubordinatorPath, DegenerateIsIdentity) {
  RngStream rng(1, 0, 0);
  const auto p = simulate_subordinator_path(BetaIndex(1.0), 1.0, 0.125, rng);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_DOUBLE_EQ(p.values()[k], p.tau()[k]);
}

TEST(SubordinatorPath, IncrementsStrictlyPositive) {
  RngStream rng(2, 0, 0);
  const auto p = simulate_subordinator_path(BetaIndex(0.5), 5.0, 0.01, rng);
  for (std::size_t k = 1; k < p.size(); ++k) EXPECT_GT(p.values()[k], p.values()[k - 1]);
}

TEST(SubordinatorPath, RejectsBadGrid) {
  RngStream rng(1, 0, 0);
  EXPECT_THROW(simulate_subordinator_path(BetaIndex(0.5), 1.0, 2.0, rng), ParameterError);
  EXPECT_THROW(simulate_subordinator_path(BetaIndex(0.5), -1.0, 0.1, rng), ParameterError);
  EXPECT_THROW(SubordinatorPath({0.0, 1.0}, {0.0, -1.0}), ParameterError);
}

TEST(SubordinatorPath, MedianOfUnitValueMatchesStableLaw) {
  const double median_oracle = levy_half_median();
  EXPECT_NEAR(median_oracle, 1.0990, 1e-3);
  std::vector<double> u1(20000);
  for (std::size_t i = 0; i < u1.size(); ++i) {
    RngStream rng(3, 0, i);
    u1[i] = simulate_subordinator_path(BetaIndex(0.5), 1.0, 0.05, rng).max_value();
  }
  std::nth_element(u1.begin(), u1.begin() + u1.size() / 2, u1.end());
  EXPECT_NEAR(u1[u1.size() / 2] / median_oracle, 1.0, 0.05);
}

TEST(SubordinatorPath, CoarsenKeepsNodes) {
  RngStream rng(4, 0, 0);
  const auto p = simulate_subordinator_path(BetaIndex(0.6), 1.0, 0.125, rng);
  const auto c = coarsen(p, 2);
  ASSERT_EQ(c.size(), 5u);
  for (std::size_t k = 0; k < c.size(); ++k) EXPECT_EQ(c.values()[k], p.values()[2 * k]);
}

TEST(InvertPath, IdentityPathInvertsExactly) {
  RngStream rng(1, 0, 0);
  const auto p = simulate_subordinator_path(BetaIndex(1.0), 2.0, 0.01, rng);
  const auto grid = uniform_grid(1.0, 100);
  const auto e = invert_path(p, grid);
  for (std::size_t m = 0; m < grid.size(); ++m) EXPECT_NEAR(e.values()[m], grid[m], 1e-12);
}

TEST(InvertPath, ConstantAcrossAJump) {
  const SubordinatorPath p({0.0, 0.5, 1.0, 1.5}, {0.0, 0.0, 10.0, 10.0});
  const std::vector<double> t{0.0, 0.5, 3.0, 9.99};
  const auto e = invert_path(p, t);
  EXPECT_EQ(e.values()[0], 0.0);
  EXPECT_EQ(e.values()[1], 1.0);
  EXPECT_EQ(e.values()[2], 1.0);
  EXPECT_EQ(e.values()[3], 1.0);
}

TEST(InvertPath, HorizonExceededThrows) {
  const SubordinatorPath p({0.0, 1.0}, {0.0, 2.0});
  const std::vector<double> t{0.0, 3.0};
  EXPECT_THROW(invert_path(p, t), HorizonError);
}

TEST(InvertPath, MeanOfUnitTimeMatchesMoment) {
  const auto grid = uniform_grid(1.0, 10);
  std::vector<double> e1(10000);
  for (std::size_t i = 0; i < e1.size(); ++i) {
    RngStream rng(5, 0, i);
    const auto p = simulate_subordinator_until(BetaIndex(0.5), 1.0, 1e-3, rng);
    const auto e = invert_path(p, grid);
    e1[i] = e.values().back();
    for (std::size_t m = 1; m < grid.size(); ++m) ASSERT_GE(e.values()[m], e.values()[m - 1]);
  }
  EXPECT_LT(z_score(summarize(e1), kInvGamma15), 3.0);
}

TEST(InverseMarginal, ZeroTimeIsZero) {
  RngStream rng(1, 0, 0);
  EXPECT_EQ(sample_inverse_marginal(BetaIndex(0.5), 0.0, rng), 0.0);
}

TEST(InverseMarginal, FirstAndSecondMoments) {
  RngStream rng(6, 0, 0);
  std::vector<double> m1(100000), m2(100000);
  for (std::size_t i = 0; i < m1.size(); ++i) {
    m1[i] = sample_inverse_marginal(BetaIndex(0.5), 1.0, rng);
    m2[i] = m1[i] * m1[i];
  }
  EXPECT_LT(z_score(summarize(m1), kInvGamma15), 3.0);
  EXPECT_LT(z_score(summarize(m2), 2.0), 3.0);
}

// Moment law across the parameter grid at 4 SE.
TEST(InverseMarginal, MomentLaw) {
  for (double beta : {0.3, 0.5, 0.7, 0.9}) {
    for (double t : {0.5, 1.0, 2.0}) {
      RngStream rng(7, static_cast<std::uint64_t>(beta * 10), static_cast<std::uint64_t>(t * 10));
      std::vector<double> s(40000);
      for (auto& x : s) x = sample_inverse_marginal(BetaIndex(beta), t, rng);
      for (int n : {1, 2, 3}) {
        std::vector<double> p(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) p[i] = std::pow(s[i], n);
        EXPECT_LT(z_score(summarize(p), inverse_moment(BetaIndex(beta), t, n)), 4.0)
            << "beta=" << beta << " t=" << t << " n=" << n;
      }
    }
  }
}

TEST(InverseMarginal, SelfSimilarityKs) {
  const double beta = 0.6, t = 2.5;
  std::vector<double> a(10000), b(10000);
  RngStream ra(8, 0, 0), rb(8, 0, 1);
  for (auto& x : a) x = sample_inverse_marginal(BetaIndex(beta), t, ra);
  for (auto& x : b) x = std::pow(t, beta) * sample_inverse_marginal(BetaIndex(beta), 1.0, rb);
  EXPECT_LT(ks_two_sample(a, b), ks_critical_1pct(a.size(), b.size()));
}

TEST(InverseMoment, ClosedForms) {
  EXPECT_NEAR(inverse_moment(BetaIndex(1.0), 1.7, 1), 1.7, 1e-14);
  EXPECT_NEAR(inverse_moment(BetaIndex(1.0), 1.7, 3), 1.7 * 1.7 * 1.7, 1e-13);
  EXPECT_NEAR(inverse_moment(BetaIndex(0.5), 1.0, 1), kInvGamma15, 1e-14);
  EXPECT_NEAR(inverse_moment(BetaIndex(0.5), 1.0, 2), 2.0, 1e-13);
  EXPECT_EQ(inverse_moment(BetaIndex(0.5), 0.0, 2), 0.0);
  EXPECT_THROW(inverse_moment(BetaIndex(0.5), 1.0, 0), ParameterError);
  EXPECT_THROW(inverse_moment(BetaIndex(0.01), 1e10, 200), NumericError);
}

TEST(MittagLeffler, SpotValues) {
  EXPECT_EQ(mittag_leffler(0.5, 0.0), 1.0);
  EXPECT_NEAR(mittag_leffler(1.0, 1.0), std::exp(1.0), 1e-15);
  EXPECT_NEAR(mittag_leffler(0.5, -1.0), std::exp(1.0) * std::erfc(1.0), 1e-12);
  EXPECT_NEAR(mittag_leffler(0.5, -1.0), 0.427584, 1e-6);
  EXPECT_NEAR(mittag_leffler(0.5, -0.5), 0.615690, 1e-6);
}

TEST(MittagLeffler, HalfIndexAgainstErfcOracle) {
  for (double x = 0.0; x <= 50.0; x += 0.25) {
    const double expect = ml_half_oracle(x);
    EXPECT_NEAR(mittag_leffler(0.5, -x) / expect, 1.0, 1e-8) << "x=" << x;
  }
  for (double x = 0.0; x <= 5.0; x += 0.25) {
    // E_{1/2}(x) = e^{x^2} erfc(-x)
    EXPECT_NEAR(mittag_leffler(0.5, x) / (std::exp(x * x) * std::erfc(-x)), 1.0, 1e-12);
  }
}

TEST(MittagLeffler, UnitIndexIsExp) {
  for (double z = -5.0; z <= 5.0; z += 0.1) {
    EXPECT_NEAR(mittag_leffler(1.0, z), std::exp(z), 1e-12 * std::exp(z));
  }
}

TEST(MittagLeffler, SeriesAndIntegralRoutesAgree) {
  MLParams integral_only;
  integral_only.switch_radius = 1e-6;
  for (double beta : {0.35, 0.6, 0.85}) {
    for (double z : {-0.3, -1.0, -2.5}) {
      EXPECT_NEAR(mittag_leffler(beta, z), mittag_leffler(beta, z, integral_only),
                  1e-10 * mittag_leffler(beta, z))
          << "beta=" << beta << " z=" << z;
    }
  }
}

TEST(MittagLeffler, CompletelyMonotoneOnNegatives) {
  for (double beta : {0.3, 0.5, 0.7, 0.9}) {
    double prev = mittag_leffler(beta, 0.0);
    for (double z = -0.1; z >= -50.0; z -= 0.1) {
      const double v = mittag_leffler(beta, z);
      ASSERT_LE(v, prev) << "beta=" << beta << " z=" << z;
      ASSERT_GE(v, 0.0);
      prev = v;
    }
  }
}

TEST(MittagLeffler, BadParameters) {
  EXPECT_THROW(mittag_leffler(0.0, -1.0), ParameterError);
  MLParams bad;
  bad.series_terms = 0;
  EXPECT_THROW(mittag_leffler(0.5, -1.0, bad), ParameterError);
  MLParams tiny;
  tiny.series_terms = 3;
  EXPECT_THROW(mittag_leffler(0.5, 4.0, tiny), NumericError);
}

TEST(LaplaceSubordination, ConstantFunction) {
  const std::vector<double> s{0.5, 1.0, 2.0};
  const auto r = laplace_subordination_check([](double) { return 1.0; }, BetaIndex(0.5), s, 200, 1);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(row.lhs, 1.0 / row.s, 1e-9);
    EXPECT_NEAR(row.rhs, 1.0 / row.s, 1e-9);
  }
  EXPECT_LT(r.max_rel_err, 1e-9);
}

TEST(LaplaceSubordination, IdentityFunction) {
  const std::vector<double> s{1.0};
  const auto r = laplace_subordination_check([](double x) { return x; }, BetaIndex(0.5), s, 100000, 2);
  // both sides equal s^{-beta-1}
  EXPECT_NEAR(r.rows[0].rhs, 1.0, 1e-9);
  EXPECT_LT(r.max_rel_err, 0.02);
}

TEST(LaplaceSubordination, ExponentialFunctionMatchesMittagLefflerTransform) {
  const double a = 0.8, beta = 0.5;
  const std::vector<double> s{0.5, 1.0, 3.0};
  const auto r = laplace_subordination_check([a](double x) { return std::exp(-a * x); },
                                             BetaIndex(beta), s, 20000, 3);
  boost::math::quadrature::exp_sinh<double> quad;
  for (const auto& row : r.rows) {
    const double expect = std::pow(row.s, beta - 1.0) / (std::pow(row.s, beta) + a);
    EXPECT_NEAR(row.rhs, expect, 1e-8);
    const double ml_transform = quad.integrate(
        [&](double t) { return std::exp(-row.s * t) * mittag_leffler(beta, -a * std::pow(t, beta)); });
    EXPECT_NEAR(ml_transform, expect, 1e-7);
    EXPECT_LT(std::abs(row.lhs - expect), 4.0 * row.lhs_se + 1e-9);
  }
}
