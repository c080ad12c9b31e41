#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subdiff/integrator.hpp"
#include "subdiff/spectral.hpp"
#include "subdiff/subordinator.hpp"

namespace subdiff {

// dY = (A Y + F(t, Y)) dt + B(t, Y) dW_t, and its time-changed counterpart
// dX = (A X + F(E_t, X)) dE_t + B(E_t, X) dW_{E_t}.
struct SDECoefficients {
  Eigen::MatrixXd A;
  std::function<HVector(double, const HVector&)> F;  // empty means zero
  HSIntegrand B = HSIntegrand::time_function([](double) { return HSOperator(); }, 0, 0);
  HVector x0;
  std::function<HVector(RngStream&)> x0_sampler;  // optional random initial state

  [[nodiscard]] Eigen::Index dim() const noexcept { return x0.size(); }
  // x0_sampler(rng) when set, otherwise x0.
  [[nodiscard]] HVector initial(RngStream& rng) const;
  void validate(const SpectralBasis& basis) const;
};

// A = -diag(mu).
Eigen::MatrixXd diagonal_generator(std::span<const double> mu);

// Diagonal OU test problem: A = -diag(mu), F = 0, B = I.
SDECoefficients diagonal_ou(const SpectralBasis& basis, HVector x0);

// S(t) = diag(exp(-mu_j t)).
class Semigroup {
 public:
  explicit Semigroup(std::vector<double> mu);
  [[nodiscard]] std::span<const double> mu() const noexcept { return mu_; }
  [[nodiscard]] Eigen::VectorXd factors(double t) const;
  [[nodiscard]] HVector apply(double t, const HVector& x) const;
  [[nodiscard]] bool contraction() const noexcept;

 private:
  std::vector<double> mu_;
};

struct SolutionPath {
  std::vector<double> grid;
  Eigen::MatrixXd values;  // row m is the state at grid[m]
  std::vector<std::string> warnings;
};

inline constexpr double kBlowUpThreshold = 1e8;

// Euler-Maruyama on the tau-grid of the Q-Wiener path.
SolutionPath solve_classical_em(const SDECoefficients& coeffs, const QWienerPath& qpath);
SolutionPath solve_classical_em(const SDECoefficients& coeffs, const QWienerPath& qpath, const HVector& x0);

// Clock of the drift in the time-changed scheme: dE_t (the time-changed SDE)
// or dt (the equation whose mild solution is the semigroup convolution).
enum class DriftClock { operational, physical };

// X_{m+1} = X_m + (A X_m + F(s_m, X_m)) dC_m + B(s_m, X_m) dW_{E,m}, where
// dC = dE and s = E(t_m) for the operational clock, dC = dt and s = t_m for
// the physical one.
SolutionPath solve_timechanged_em(const SDECoefficients& coeffs, const TimeChangedQWienerPath& path,
                                  DriftClock clock = DriftClock::operational);
SolutionPath solve_timechanged_em(const SDECoefficients& coeffs, const TimeChangedQWienerPath& path,
                                  const HVector& x0, DriftClock clock = DriftClock::operational);

// Y(E_t): classical solution on the tau-grid composed with the inverse path
// (linear interpolation between tau nodes).
SolutionPath compose_solution(const SolutionPath& y, const InversePath& inverse);

// Recommended solver for the time-changed SDE: classical EM on the tau-grid
// of `qpath`, then composition with `inverse`.
SolutionPath solve_dual(const SDECoefficients& coeffs, const QWienerPath& qpath, const InversePath& inverse);

struct DualityReport {
  double sup_gap = 0.0;  // sup_t ||X(t) - Y(E_t)||
  SolutionPath x;        // direct time-changed EM
  SolutionPath y_of_e;   // composed classical solution
};

// Direct EM on the composed path vs the classical solution composed with E,
// on the same Brownian and subordinator realization.
DualityReport duality_check(const SDECoefficients& coeffs, const QWienerPath& qpath, const InversePath& inverse);

// Sup-gap of duality_check along a tied refinement ladder (see RefinementSetup).
RefinementReport duality_refinement(const SDECoefficients& coeffs, const RefinementSetup& setup);

// u_{m+1} = S(dt_m)(u_m + B(t_m, u_m) dW_{E,m}); equals the left-point
// stochastic convolution S(t)u0 + sum S(t - t_m) B dW_{E,m}.
SolutionPath solve_mild(const Semigroup& semigroup, const HSIntegrand& B, const TimeChangedQWienerPath& path,
                        const HVector& u0);

// Per-mode check of the mild solution with B = I: Var u_j(t) against
// lambda_j E[sum_m exp(-2 mu_j (t - t_m)) dE_m] on the same inverse paths.
struct MildVarianceRow {
  std::size_t mode = 0;
  double variance = 0.0, variance_se = 0.0;
  double oracle = 0.0, oracle_se = 0.0;
  double z = 0.0;  // paired
};
std::vector<MildVarianceRow> mild_variance_check(const Semigroup& semigroup, const SpectralBasis& basis, double beta,
                                                 std::span<const double> t_grid, std::size_t mc, std::uint64_t seed,
                                                 double d_tau = 1e-3, unsigned workers = 1);

}  // namespace subdiff
