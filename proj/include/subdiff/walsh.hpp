#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subdiff/rng.hpp"
#include "subdiff/spectral.hpp"
#include "subdiff/subordinator.hpp"

namespace subdiff {

// Points x_1..x_P in R^N (N = 1 or 2) with a common cell weight dx.
class SpatialGrid {
 public:
  SpatialGrid(Eigen::MatrixXd points, double cell_weight);

  // P points x0, x0 + dx, ... on the line.
  static SpatialGrid uniform(std::size_t P, double dx, double x0 = 0.0);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  [[nodiscard]] Eigen::Index dimension() const noexcept { return points_.cols(); }
  [[nodiscard]] const Eigen::MatrixXd& points() const noexcept { return points_; }
  [[nodiscard]] double cell_weight() const noexcept { return dx_; }
  [[nodiscard]] SpatialGrid shifted(const Eigen::VectorXd& offset) const;

 private:
  Eigen::MatrixXd points_;
  double dx_;
};

struct Kernel {
  enum class Kind { gaussian, exponential };
  Kind kind = Kind::gaussian;
  double scale = 1.0;  // sigma for gaussian, length for exponential

  static Kernel gaussian(double sigma);
  static Kernel exponential(double length);
  [[nodiscard]] double operator()(double r) const;
};

// Discrete covariance-kernel space: vectors gamma in R^P with
// <gamma, psi>_K = gamma^T G psi, G_ab = f(x_a - x_b) dx^2.
// The ONB f_k = e_k / sqrt(nu_k) is built from eigenpairs of G with
// nu_k > rank_tol * nu_max.
class KernelSpace {
 public:
  static constexpr double kPsdTolerance = 1e-10;
  static constexpr double kRankTolerance = 1e-10;

  KernelSpace(const SpatialGrid& grid, const Kernel& kernel);

  [[nodiscard]] std::size_t points() const noexcept { return static_cast<std::size_t>(G_.rows()); }
  // Number of K-basis vectors.
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
  [[nodiscard]] const Eigen::MatrixXd& gram() const noexcept { return G_; }
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return nu_; }
  // Columns are f_1..f_dim, ordered by decreasing nu.
  [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return basis_; }
  [[nodiscard]] Eigen::VectorXd f(std::size_t k) const { return basis_.col(static_cast<Eigen::Index>(k)); }
  [[nodiscard]] double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  // Coordinates <phi, f_k>_K for all k.
  [[nodiscard]] Eigen::VectorXd coordinates(const Eigen::VectorXd& phi) const;
  [[nodiscard]] Eigen::VectorXd indicator(std::span<const std::size_t> cells) const;
  [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  Eigen::MatrixXd G_;
  Eigen::VectorXd nu_;
  Eigen::MatrixXd basis_;
  std::vector<std::string> warnings_;
};

// J = sum_j sqrt(lambda_j) f_j <f_j, .>_K as a P x P matrix acting on
// coordinates in R^P. lambda_j = 0 is allowed; J^{-1} is then the
// pseudo-inverse that drops those directions.
class JOperator {
 public:
  JOperator(const KernelSpace& space, std::vector<double> lambda);

  // lambda_j = 2^{-j}, j = 1..space.dim().
  static JOperator dyadic(const KernelSpace& space);

  [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return J_; }
  [[nodiscard]] const Eigen::MatrixXd& pseudo_inverse() const noexcept { return Jinv_; }
  // Q = J J^* (K-adjoint), which is J^2 here since J is K-self-adjoint.
  [[nodiscard]] Eigen::MatrixXd q() const;
  [[nodiscard]] const std::vector<double>& lambda() const noexcept { return lambda_; }
  [[nodiscard]] double trace() const noexcept;
  [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::vector<double> lambda_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd Jinv_;
  std::vector<std::string> warnings_;
};

// Coordinate Brownian paths w_k sampled at E(t_m) for one shared inverse
// path; row m, column k.
struct FieldNoise {
  InversePath inverse;
  Eigen::MatrixXd w;

  [[nodiscard]] std::span<const double> t() const noexcept { return inverse.t(); }
  [[nodiscard]] std::size_t size() const noexcept { return inverse.size(); }
  // Index of the grid node equal to t (within 1e-12 relative); HorizonError
  // past the last node, ParameterError off the grid.
  [[nodiscard]] std::size_t node(double t) const;
};

FieldNoise sample_field_noise(const KernelSpace& space, InversePath inverse, RngStream& rng);
// Subordinator (split 0) and coordinates (split 1); beta = 1 uses E_t = t.
FieldNoise simulate_field_noise(const KernelSpace& space, double beta, std::span<const double> t_grid, double d_tau,
                                const RngStream& rng);

// Time-changed cylindrical Wiener process W~_{E_t}(phi) = sum_k <phi, f_k>_K w_k(E_t), at node m.
double cylindrical_value(const KernelSpace& space, const FieldNoise& noise, const Eigen::VectorXd& phi,
                         std::size_t m);
// Time-changed martingale measure M_{E_t}(A) at node m.
double martingale_measure(const KernelSpace& space, const FieldNoise& noise, std::span<const std::size_t> cells,
                          std::size_t m);

// g(t, x) = X 1_{(a, b]}(t) 1_A(x). X may depend on the noise; it must be
// measurable at time `measurable_at`, which for an adapted integrand is <= a.
struct FieldElementary {
  double a = 0.0;
  double b = 0.0;
  std::vector<std::size_t> cells;
  std::function<double(const FieldNoise&)> x;
  double measurable_at = 0.0;

  static FieldElementary constant(double a, double b, std::vector<std::size_t> cells, double x);
  [[nodiscard]] bool adapted() const noexcept { return measurable_at <= a; }
};

// Finite sum of elementary integrands.
using FieldIntegrand = std::vector<FieldElementary>;

[[nodiscard]] bool adapted(const FieldIntegrand& g) noexcept;

// Integral path over the noise grid via the K-valued step function
// g(s) = sum_e X_e 1_{A_e} 1_{(a_e, b_e]}(s) against dW~_{E_s}(f_k).
std::vector<double> cylindrical_integral(const KernelSpace& space, const FieldIntegrand& g, const FieldNoise& noise);
// Elementary integral X (M_{E_b}(A) - M_{E_a}(A)) at the horizon.
double martingale_measure_integral(const KernelSpace& space, const FieldElementary& e, const FieldNoise& noise);
// Path version summed over the terms of g.
std::vector<double> martingale_measure_integral(const KernelSpace& space, const FieldIntegrand& g,
                                                const FieldNoise& noise);
// sum_j (Phi^g o J^{-1})(J f_j) dw_j(E) with Phi^g_s(eta) = <g(s), eta>_K,
// J^{-1} and J applied as matrices.
std::vector<double> qwiener_integral_via_J(const KernelSpace& space, const JOperator& J, const FieldIntegrand& g,
                                           const FieldNoise& noise);

struct TripleRow {
  std::size_t trial = 0;
  double gap12 = 0.0, gap13 = 0.0, gap23 = 0.0;  // sup over the path
};

struct TripleReport {
  std::vector<TripleRow> rows;
  double max_gap = 0.0;
  std::size_t out_of_class = 0;  // trials skipped because g was not adapted
};

struct TripleSetup {
  std::size_t points = 8;
  double dx = 0.125;
  Kernel kernel = Kernel::gaussian(0.125);
  double beta = 0.5;
  std::size_t t_steps = 32;
  double horizon = 1.0;
  double d_tau = 1e-3;
  std::size_t trials = 100;
  std::size_t terms = 4;  // elementary terms per random integrand
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

// Random adapted elementary integrand on a node grid: random (a, b], random
// cell subsets, X = c0 + c1 W~_{E_a}(1_B) measurable at a.
FieldIntegrand random_field_integrand(const KernelSpace& space, const FieldNoise& noise, std::size_t terms,
                                      RngStream& rng);

TripleReport triple_equality_report(const TripleSetup& setup);
// Caller-supplied integrands (one per trial, built against that trial's noise).
TripleReport triple_equality_report(
    const TripleSetup& setup,
    const std::function<FieldIntegrand(const KernelSpace&, const FieldNoise&, RngStream&)>& make_g);

}  // namespace subdiff
