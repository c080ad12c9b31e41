#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "subdiff/spectral.hpp"
#include "subdiff/subordinator.hpp"

namespace subdiff {

// Operator-valued integrand. Every kind is evaluated at the left endpoint of
// a grid interval and may only look at the state there, which keeps it
// adapted by construction.
class HSIntegrand {
 public:
  enum class Kind { elementary, time_function, path_functional };
  using TimeRule = std::function<HSOperator(double)>;
  using StateRule = std::function<HSOperator(double, const HVector&)>;

  // Phi = values[i] on (breakpoints[i], breakpoints[i+1]], zero elsewhere.
  static HSIntegrand elementary(std::vector<double> breakpoints, std::vector<HSOperator> values);
  // Deterministic Phi(s).
  static HSIntegrand time_function(TimeRule rule, Eigen::Index rows, Eigen::Index cols);
  // Phi(s, state at s).
  static HSIntegrand path_functional(StateRule rule, Eigen::Index rows, Eigen::Index cols);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] Eigen::Index rows() const noexcept { return rows_; }
  [[nodiscard]] Eigen::Index cols() const noexcept { return cols_; }
  // Breakpoints of an elementary integrand (empty for other kinds).
  [[nodiscard]] std::span<const double> breakpoints() const noexcept { return breaks_; }
  // Value used for an increment starting at s. For elementary integrands this
  // is values[i] with breakpoints[i] <= s < breakpoints[i+1].
  [[nodiscard]] HSOperator at(double s, const HVector& state) const;

  [[nodiscard]] HSIntegrand scaled(double a) const;
  // a * this + b * other as a path functional (or elementary when both are
  // elementary with the same breakpoints).
  [[nodiscard]] HSIntegrand combine(double a, const HSIntegrand& other, double b) const;

 private:
  Kind kind_ = Kind::time_function;
  Eigen::Index rows_ = 0, cols_ = 0;
  std::vector<double> breaks_;
  std::vector<HSOperator> values_;
  StateRule rule_;
};

// Integral values on a grid: row m is the H-vector at grid point m.
struct IntegralPath {
  std::vector<double> grid;
  Eigen::MatrixXd values;
};

// Which time the integrand is evaluated at on the physical grid: t_m itself,
// or the operational time E(t_m).
enum class IntegrandClock { physical, operational };

// int_0^t Phi dW_{E_s} by left-point sums: sum_m Phi(t_m) (lambda^{1/2} .* dw(E)_m).
// Path functionals see W_{E_{t_m}} as their state.
IntegralPath integrate_tc(const HSIntegrand& phi, const TimeChangedQWienerPath& path,
                          IntegrandClock clock = IntegrandClock::physical);

// Classical int_0^tau Phi dW_s on the tau-grid of the Q-Wiener path.
IntegralPath integrate_classical(const HSIntegrand& phi, const QWienerPath& qpath);

// Elementary integrand on [0, horizon] with `pieces` intervals of random
// length and independent standard normal d x d matrix values.
HSIntegrand random_elementary_integrand(RngStream& rng, Eigen::Index d, double horizon, std::size_t pieces = 4);

struct IsometryReport {
  double lhs = 0.0, lhs_se = 0.0;  // E ||int Phi dW_E||^2
  double rhs = 0.0, rhs_se = 0.0;  // E int ||Phi||^2_{L2(K_Q,H)} dE
  double diff = 0.0, diff_se = 0.0;  // paired estimate of lhs - rhs
  double z = 0.0;                    // |diff| / diff_se
  std::size_t n = 0;
};

struct IsometrySetup {
  SpectralBasis basis;
  double beta = 0.5;
  std::vector<double> t_grid{};  // integration grid; include every breakpoint
  double d_tau = 1e-2;         // operational step of the clock simulation
  std::size_t mc = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// Both sides of the isometry on shared inverse paths, for a batch of
// integrands evaluated on the same noise. The identity holds conditionally on
// the clock, so d_tau affects only the law of E, not the agreement.
std::vector<IsometryReport> ito_isometry_batch(std::span<const HSIntegrand> phis, const IsometrySetup& setup);
IsometryReport ito_isometry_report(const HSIntegrand& phi, const IsometrySetup& setup);

// Left and right sides of a change-of-variable formula on the physical grid.
struct ChangeOfVariableResult {
  IntegralPath left;
  IntegralPath right;
  double max_gap = 0.0;  // sup over the grid of ||left - right||_H
};

// left(t) = int_0^{E_t} Phi(s) dW_s, right(t) = int_0^t Phi(E_s) dW_{E_s}.
// The inverse must take values on the nodes of qpath's tau-grid.
ChangeOfVariableResult change_of_variable_1(const HSIntegrand& phi, const QWienerPath& qpath,
                                            const InversePath& inverse);

// left(t) = int_0^t Phi(s) dW_{E_s}, right(t) = int_0^{E_t} Phi(U(s-)) dW_s.
// On the grid U(s-) for the increment over (tau_k, tau_{k+1}] is U(tau_k).
ChangeOfVariableResult change_of_variable_2(const HSIntegrand& phi, const QWienerPath& qpath,
                                            const SubordinatorPath& subordinator,
                                            const InversePath& inverse);

// Refinement ladder with tied steps: level l uses tau-step h0 2^-l and
// n0 2^{l/beta} physical steps on [0, horizon] (rounded). Paths are generated
// once at the finest level and coarsened, so levels share noise.
struct RefinementSetup {
  SpectralBasis basis;
  double beta = 0.5;
  double horizon = 1.0;
  std::size_t levels = 4;
  double h0 = 1.0 / 16.0;
  std::size_t n0 = 16;
  std::size_t mc = 200;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct RefinementRow {
  std::size_t level = 0;
  double tau_step = 0.0;
  std::size_t t_steps = 0;
  double rms_gap = 0.0;   // sqrt(mean over paths of sup-gap^2)
  double mean_gap = 0.0;  // mean over paths of sup-gap
};

struct RefinementReport {
  std::vector<RefinementRow> rows;
  double fitted_order = 0.0;  // slope of log rms_gap against log tau_step
};

std::vector<std::size_t> refinement_t_steps(const RefinementSetup& setup);

// Shared coupled sample for one replication of a refinement study.
struct CoupledLevel {
  SubordinatorPath subordinator;
  QWienerPath qpath;
  InversePath inverse;
};
std::vector<CoupledLevel> coupled_levels(const RefinementSetup& setup, std::size_t replication);

RefinementReport change_of_variable_refinement(int which, const HSIntegrand& phi, const RefinementSetup& setup);

// F(x) = sum_j a_j x_j + b_j x_j^2 + c_j x_j^3, or ||x||^2.
struct ItoFunctional {
  enum class Kind { norm_sq, coordinate_poly };
  Kind kind = Kind::norm_sq;
  Eigen::VectorXd a, b, c;

  static ItoFunctional norm_sq();
  static ItoFunctional coordinate_poly(Eigen::VectorXd a, Eigen::VectorXd b, Eigen::VectorXd c);

  [[nodiscard]] double value(const HVector& x) const;
  [[nodiscard]] HVector gradient(const HVector& x) const;
  // Hessian is diagonal for both kinds.
  [[nodiscard]] HVector hessian_diag(const HVector& x) const;
};

// dX = psi(t,X) dt + gamma(t,X) dE_t + phi(t,X) dW_{E_t}, X(0) = x0.
// Empty psi / gamma mean zero.
struct ItoProcess {
  HVector x0;
  std::function<HVector(double, const HVector&)> psi{};
  std::function<HVector(double, const HVector&)> gamma{};
  HSIntegrand phi = HSIntegrand::time_function([](double) { return HSOperator(); }, 0, 0);
};

struct ItoResidualPath {
  std::vector<double> t;
  std::vector<double> residual;
  double max_abs = 0.0;
};

// X by Euler steps on the physical grid of `path`, then
//   F(X(t)) - F(X(0)) - int F_x psi ds - int_0^{E_t} F_x gamma (U(s-)) ds
//   - int F_x phi dW_E - 1/2 int_0^{E_t} tr(F_xx (phi Q^{1/2})(phi Q^{1/2})^*)(U(s-)) ds
// The dE integrals are computed in operational time through U(s-), where the
// state at physical time U(tau_k) is the last grid value at or before it.
ItoResidualPath ito_formula_residual(const ItoFunctional& F, const ItoProcess& X,
                                     const TimeChangedQWienerPath& path, const SubordinatorPath& subordinator);

RefinementReport ito_formula_refinement(const ItoFunctional& F, const ItoProcess& X, const RefinementSetup& setup);

}  // namespace subdiff
