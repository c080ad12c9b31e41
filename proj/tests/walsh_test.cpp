#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "subdiff/errors.hpp"
#include "subdiff/stats.hpp"
#include "subdiff/walsh.hpp"

using namespace subdiff;

namespace {

KernelSpace default_space(std::size_t P = 8) {
  const double dx = 1.0 / static_cast<double>(P);
  return KernelSpace(SpatialGrid::uniform(P, dx), Kernel::gaussian(dx));
}

std::vector<std::size_t> all_cells(std::size_t P) {
  std::vector<std::size_t> c(P);
  for (std::size_t i = 0; i < P; ++i) c[i] = i;
  return c;
}

}  // namespace

TEST(SpatialGridTest, Validation) {
  EXPECT_THROW(SpatialGrid(Eigen::MatrixXd::Zero(2, 1), 0.1), ParameterError);
  EXPECT_THROW(SpatialGrid::uniform(4, 0.0), ParameterError);
  EXPECT_THROW(SpatialGrid(Eigen::MatrixXd::Zero(2, 3), 0.1), ParameterError);
  const auto g = SpatialGrid::uniform(4, 0.5, 1.0);
  EXPECT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g.points()(3, 0), 2.5);
}

TEST(KernelSpaceTest, SinglePoint) {
  const KernelSpace s(SpatialGrid::uniform(1, 0.3), Kernel::gaussian(1.0));
  ASSERT_EQ(s.dim(), 1u);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 2.0);
  EXPECT_NEAR(s.inner(g, g), 4.0 * 1.0 * 0.09, 1e-15);
}

TEST(KernelSpaceTest, GaussianSpectrumIsNonNegative) {
  for (auto kernel : {Kernel::gaussian(1.0 / 16), Kernel::exponential(0.2)}) {
    const KernelSpace s(SpatialGrid::uniform(16, 1.0 / 16), kernel);
    const double scale = s.eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_GE(s.eigenvalues().minCoeff(), -1e-12 * scale);
    EXPECT_TRUE(s.gram().isApprox(s.gram().transpose(), 0.0));
    // sum_k (G f_k)(G f_k)^T = G F F^T G = G for a full-rank basis
    Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(16, 16);
    for (std::size_t k = 0; k < s.dim(); ++k) recon += (s.gram() * s.f(k)) * (s.gram() * s.f(k)).transpose();
    EXPECT_LT((recon - s.gram()).norm(), 1e-12 * s.gram().norm());
  }
}

TEST(KernelSpaceTest, Orthonormality) {
  for (std::size_t P : {2u, 8u, 16u}) {
    const auto s = default_space(P);
    const Eigen::MatrixXd gram_f = s.basis().transpose() * s.gram() * s.basis();
    EXPECT_LT((gram_f - Eigen::MatrixXd::Identity(s.dim(), s.dim())).cwiseAbs().maxCoeff(), 1e-10) << "P " << P;
  }
}

TEST(KernelSpaceTest, TranslationInvariance) {
  const auto g = SpatialGrid::uniform(12, 0.1);
  const KernelSpace a(g, Kernel::gaussian(0.15));
  const KernelSpace b(g.shifted(Eigen::VectorXd::Constant(1, 3.7)), Kernel::gaussian(0.15));
  EXPECT_LT((a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(KernelSpaceTest, RankDeficiencyWarns) {
  // very wide kernel on a fine grid is numerically low rank
  const KernelSpace s(SpatialGrid::uniform(16, 0.01), Kernel::gaussian(10.0));
  EXPECT_LT(s.dim(), 16u);
  EXPECT_FALSE(s.warnings().empty());
}

TEST(KernelSpaceTest, TwoDimensionalGrid) {
  Eigen::MatrixXd pts(4, 2);
  pts << 0, 0, 0, 1, 1, 0, 1, 1;
  const KernelSpace s(SpatialGrid(pts, 1.0), Kernel::exponential(1.0));
  EXPECT_EQ(s.dim(), 4u);
  EXPECT_NEAR(s.gram()(0, 3), std::exp(-std::sqrt(2.0)), 1e-15);
}

TEST(JOperatorTest, SpectralProperties) {
  const auto s = default_space(8);
  const auto J = JOperator::dyadic(s);
  const Eigen::MatrixXd Q = J.q();
  for (std::size_t j = 0; j < s.dim(); ++j) {
    EXPECT_LT((Q * s.f(j) - J.lambda()[j] * s.f(j)).norm(), 1e-10);
  }
  // operator trace on K equals the matrix trace
  EXPECT_NEAR(Q.trace(), J.trace(), 1e-12);
  EXPECT_NEAR(J.trace(), 1.0 - std::ldexp(1.0, -static_cast<int>(s.dim())), 1e-15);
  // J is K-self-adjoint: <J a, b>_K = <a, J b>_K
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(8, -1.0, 2.0);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(8, 0.5, -0.3);
  EXPECT_NEAR(s.inner(J.matrix() * a, b), s.inner(a, J.matrix() * b), 1e-14);
  EXPECT_TRUE(J.warnings().empty());
}

TEST(JOperatorTest, ZeroEigenvalueUsesPseudoInverse) {
  const auto s = default_space(4);
  JOperator J(s, {0.5, 0.0, 0.25, 0.125});
  EXPECT_FALSE(J.warnings().empty());
  EXPECT_LT((J.pseudo_inverse() * J.matrix() * s.f(1)).norm(), 1e-14);
  EXPECT_LT((J.pseudo_inverse() * J.matrix() * s.f(2) - s.f(2)).norm(), 1e-10);
  EXPECT_THROW(JOperator(s, {0.5, 0.25}), ParameterError);
  EXPECT_THROW(JOperator(s, {0.5, -1.0, 0.1, 0.1}), ParameterError);
}

TEST(FieldNoiseTest, NodeLookup) {
  const auto s = default_space(4);
  RngStream rng(1, 0, 0);
  const auto noise = simulate_field_noise(s, 0.5, uniform_grid(1.0, 8), 1e-3, rng);
  EXPECT_EQ(noise.node(0.0), 0u);
  EXPECT_EQ(noise.node(0.375), 3u);
  EXPECT_EQ(noise.node(1.0), 8u);
  EXPECT_THROW((void)noise.node(0.3), ParameterError);
  EXPECT_THROW((void)noise.node(1.5), HorizonError);
}

TEST(IntegralTest, ZeroAndSingleMode) {
  const auto s = default_space(8);
  RngStream rng(2, 0, 0);
  const auto noise = simulate_field_noise(s, 0.5, uniform_grid(1.0, 16), 1e-3, rng);
  for (double v : cylindrical_integral(s, {}, noise)) EXPECT_EQ(v, 0.0);
  for (double v : cylindrical_integral(s, {FieldElementary::constant(0.0, 1.0, all_cells(8), 0.0)}, noise)) {
    EXPECT_EQ(v, 0.0);
  }
  EXPECT_EQ(martingale_measure_integral(s, FieldElementary::constant(0.0, 1.0, {}, 3.0), noise), 0.0);

  // g = f_1 on (0, T]: the integral is w_1(E_T). f_1 is not an indicator, so
  // build it as a sum of per-cell elementaries.
  FieldIntegrand g;
  for (std::size_t c = 0; c < 8; ++c) g.push_back(FieldElementary::constant(0.0, 1.0, {c}, s.f(0)(c)));
  const auto I = cylindrical_integral(s, g, noise);
  EXPECT_NEAR(I.back(), noise.w(16, 0), 1e-10);
}

TEST(IntegralTest, MartingaleMeasureSingleModeSpace) {
  const KernelSpace s(SpatialGrid::uniform(1, 0.5), Kernel::gaussian(1.0));
  RngStream rng(3, 0, 0);
  const auto noise = simulate_field_noise(s, 0.5, uniform_grid(1.0, 4), 1e-3, rng);
  const double coord = s.inner(Eigen::VectorXd::Ones(1), s.f(0));
  const double v = martingale_measure_integral(s, FieldElementary::constant(0.25, 0.75, {0}, 1.0), noise);
  EXPECT_NEAR(v, coord * (noise.w(3, 0) - noise.w(1, 0)), 1e-14);
  EXPECT_THROW((void)martingale_measure_integral(s, FieldElementary::constant(0.75, 0.25, {0}, 1.0), noise),
               ParameterError);
  EXPECT_THROW((void)martingale_measure_integral(s, FieldElementary::constant(0.25, 2.0, {0}, 1.0), noise),
               HorizonError);
}

TEST(IntegralTest, MartingaleMeasureAdditivity) {
  const auto s = default_space(8);
  RngStream rng(4, 0, 0);
  const auto noise = simulate_field_noise(s, 0.5, uniform_grid(1.0, 8), 1e-3, rng);
  const std::vector<std::size_t> A{0, 2, 5}, B{1, 7}, AB{0, 1, 2, 5, 7};
  for (std::size_t m = 0; m < noise.size(); ++m) {
    EXPECT_NEAR(martingale_measure(s, noise, AB, m),
                martingale_measure(s, noise, A, m) + martingale_measure(s, noise, B, m), 1e-12);
  }
}

TEST(IntegralTest, AnticipatingIntegrandRejected) {
  const auto s = default_space(4);
  RngStream rng(5, 0, 0);
  const auto noise = simulate_field_noise(s, 0.5, uniform_grid(1.0, 8), 1e-3, rng);
  FieldElementary e = FieldElementary::constant(0.25, 0.5, {0, 1}, 1.0);
  const Eigen::VectorXd ind = s.indicator(std::vector<std::size_t>{0});
  e.x = [&s, ind](const FieldNoise& n) { return cylindrical_value(s, n, ind, 8); };
  e.measurable_at = 1.0;
  EXPECT_FALSE(e.adapted());
  EXPECT_THROW((void)cylindrical_integral(s, {e}, noise), PreconditionError);
}

TEST(IntegralTest, CylindricalCovariance) {
  // E[W~_{E_s}(phi) W~_{E_t}(psi)] = E[E_{s^t}] <phi, psi>_K, E[E_t] = t^beta / Gamma(1 + beta)
  const auto s = default_space(8);
  const auto grid = uniform_grid(1.0, 4);
  const Eigen::VectorXd phi = Eigen::VectorXd::LinSpaced(8, 1.0, -1.0);
  const Eigen::VectorXd psi = s.indicator(std::vector<std::size_t>{1, 2, 3, 6});
  const std::size_t n = 20000;
  std::vector<double> prod(n), mab(n);
  const std::vector<std::size_t> A{0, 1, 2}, B{2, 3, 4, 5};
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(6, 0, i);
    const auto noise = simulate_field_noise(s, 0.5, grid, 1e-2, rng);
    prod[i] = cylindrical_value(s, noise, phi, 2) * cylindrical_value(s, noise, psi, 4);
    mab[i] = martingale_measure(s, noise, A, 4) * martingale_measure(s, noise, B, 4);
  }
  const double e_half = std::pow(0.5, 0.5) / std::tgamma(1.5);
  const double e_one = 1.0 / std::tgamma(1.5);
  EXPECT_LT(std::abs(z_score(summarize(prod), e_half * s.inner(phi, psi))), 4.0);
  const double cov_ab = e_one * s.inner(s.indicator(A), s.indicator(B));
  const auto est = summarize(mab);
  EXPECT_LT(std::abs(z_score(est, cov_ab)), 3.0);
  // worthiness surrogate: dominated by E[E_t] |1_A|^T G |1_B|
  EXPECT_LE(std::abs(est.mean), cov_ab + 3.0 * est.se);
}

TEST(TripleEqualityTest, RandomElementaryIntegrands) {
  TripleSetup setup;
  setup.seed = 7;
  const auto rep = triple_equality_report(setup);
  EXPECT_EQ(rep.rows.size(), 100u);
  EXPECT_EQ(rep.out_of_class, 0u);
  EXPECT_LE(rep.max_gap, 1e-9);
}

TEST(TripleEqualityTest, ClassicalClock) {
  TripleSetup setup;
  setup.seed = 8;
  setup.beta = 1.0;
  setup.trials = 20;
  EXPECT_LE(triple_equality_report(setup).max_gap, 1e-9);
}

TEST(TripleEqualityTest, ExponentialKernelAndZeroLambda) {
  const KernelSpace s(SpatialGrid::uniform(6, 0.2), Kernel::exponential(0.3));
  RngStream rng(9, 0, 0);
  const auto noise = simulate_field_noise(s, 0.5, uniform_grid(1.0, 10), 1e-3, rng);
  RngStream gen(9, 1, 0);
  const auto g = random_field_integrand(s, noise, 5, gen);
  const auto a = cylindrical_integral(s, g, noise);
  const auto b = martingale_measure_integral(s, g, noise);
  const auto c = qwiener_integral_via_J(s, JOperator::dyadic(s), g, noise);
  for (std::size_t m = 0; m < a.size(); ++m) {
    EXPECT_NEAR(a[m], b[m], 1e-10);
    EXPECT_NEAR(a[m], c[m], 1e-10);
  }
  // a zero lambda drops that mode from the J route only
  std::vector<double> l(s.dim(), 0.25);
  l[0] = 0.0;
  const auto d = qwiener_integral_via_J(s, JOperator(s, l), g, noise);
  double gap = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) gap = std::max(gap, std::abs(a[m] - d[m]));
  EXPECT_GT(gap, 1e-6);
}

TEST(TripleEqualityTest, AnticipatingTrialsFlagged) {
  TripleSetup setup;
  setup.seed = 10;
  setup.trials = 10;
  const auto rep = triple_equality_report(setup, [](const KernelSpace& s, const FieldNoise& noise, RngStream& rng) {
    auto g = random_field_integrand(s, noise, 2, rng);
    g.front().measurable_at = g.front().b;
    return g;
  });
  EXPECT_EQ(rep.out_of_class, 10u);
  EXPECT_TRUE(rep.rows.empty());
}

TEST(TripleEqualityTest, DeterministicAcrossWorkers) {
  TripleSetup setup;
  setup.seed = 11;
  setup.trials = 12;
  const auto a = triple_equality_report(setup);
  setup.workers = 4;
  const auto b = triple_equality_report(setup);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].gap13, b.rows[i].gap13);
}
