#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subdiff/sde.hpp"
#include "subdiff/spectral.hpp"

namespace subdiff {

// Cylindrical test functional phi(x) = g(<x, h>) with closed-form derivatives:
// D phi = g'(<x,h>) h, D^2 phi = g''(<x,h>) h (x) h.
class TestFunctional {
 public:
  enum class Kind { linear, quadratic, cylindrical };
  using Scalar = std::function<double(double)>;

  static TestFunctional linear(HVector h);
  static TestFunctional quadratic(HVector h);
  static TestFunctional cylindrical(HVector h, Scalar g, Scalar dg, Scalar d2g);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] const HVector& h() const noexcept { return h_; }
  [[nodiscard]] double value(const HVector& x) const;
  [[nodiscard]] HVector gradient(const HVector& x) const;
  // g''(<x,h>); the Hessian is this times h h^T.
  [[nodiscard]] double second(const HVector& x) const;

 private:
  Kind kind_ = Kind::linear;
  HVector h_;
  Scalar g_, dg_, d2g_;
};

// L1 discretization of the Caputo derivative of order beta in (0, 1] from
// samples on a uniform grid with step dt:
//   D f(t_n) ~ dt^{-beta} / Gamma(2 - beta) sum_{k<n} b_k (f_{n-k} - f_{n-k-1}),
//   b_k = (k+1)^{1-beta} - k^{1-beta}.
// beta = 1 gives the backward difference. Entry 0 is set to 0.
//
// CaputoStart::corrected adds starting weights on f(t_1..t_K) - f(0) so the
// scheme is exact on t^{k beta}, k = 1..K (K = min(3, floor(1/beta))). This
// removes the O(1) error of plain L1 near t = 0 on curves of the form
// c + a t^beta + ..., which is how Mittag-Leffler moments start.
enum class CaputoStart { plain, corrected };
std::vector<double> caputo_derivative(std::span<const double> f, double dt, double beta,
                                      CaputoStart start = CaputoStart::plain);
// Same with an explicit grid, which must be uniform.
std::vector<double> caputo_derivative(std::span<const double> f, std::span<const double> t_grid, double beta,
                                      CaputoStart start = CaputoStart::plain);

// Kolmogorov operator on a cylindrical functional:
//   <x, A^* D phi> + <F(t,x), D phi> + 1/2 g''(<x,h>) ||(C Q^{1/2})^* h||^2,
// with C = B(t, x).
double apply_L0(const TestFunctional& phi, const HVector& x, const SDECoefficients& coeffs,
                const SpectralBasis& basis, double t = 0.0);

// Sample clouds of X at each output time.
struct EmpiricalMeasure {
  std::vector<double> t;
  std::vector<Eigen::MatrixXd> samples;  // samples[n] is (paths x dim) at t[n]

  [[nodiscard]] std::size_t size() const noexcept { return samples.empty() ? 0 : static_cast<std::size_t>(samples[0].rows()); }
  [[nodiscard]] double expectation(const TestFunctional& phi, std::size_t n) const;
};

struct SamplerSetup {
  double beta = 0.5;
  double d_tau = 1e-3;  // operational step of the clock and of the classical solve
  std::size_t mc = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// X(t_n) = Y(E(t_n)) for every path: classical EM on a tau-grid of step d_tau
// composed with the inverse of an independent subordinator (the duality
// solver). Noise and clock are independent by construction.
EmpiricalMeasure sample_timechanged_measure(const SDECoefficients& coeffs, const SpectralBasis& basis,
                                            std::span<const double> t_grid, const SamplerSetup& setup);

struct FpkRow {
  double t = 0.0;
  double lhs = 0.0;       // Caputo derivative of m(t) = E phi(X_t)
  double rhs = 0.0;       // E L0 phi(X_t)
  double residual = 0.0;  // lhs - rhs
  double se = 0.0;        // standard error of the per-path residual mean
};

struct FpkReport {
  std::vector<FpkRow> rows;  // rows for t > 0
  double max_abs_z = 0.0;    // max |residual| / se
  std::vector<std::string> assumptions;
  std::vector<std::string> warnings;
};

// Weak-form fractional FPK residual D^beta E phi(X_t) - E L0 phi(X_t) on a
// uniform grid. The residual is formed per path (the Caputo operator is
// linear), so its SE accounts for the correlation of the two sides.
// A warning is added when the largest SE exceeds se_target (if positive).
FpkReport fractional_fpk_residual(const SDECoefficients& coeffs, const TestFunctional& phi, const SpectralBasis& basis,
                                  std::span<const double> t_grid, const SamplerSetup& setup, double se_target = 0.0);
FpkReport fractional_fpk_residual(const EmpiricalMeasure& measure, const SDECoefficients& coeffs,
                                  const TestFunctional& phi, const SpectralBasis& basis, double beta);

struct SubordinationReport {
  double lhs = 0.0, lhs_se = 0.0;  // E phi(X(t)) by direct time-changed EM
  double rhs = 0.0, rhs_se = 0.0;  // E phi(Y(E')) with E' from the marginal law
  double se = 0.0;                 // pooled sqrt(lhs_se^2 + rhs_se^2)
  double z = 0.0;
};

// lhs: direct time-changed EM on a physical grid with `t_steps` steps.
// rhs: classical EM with step d_tau up to an independent draw of E_t.
SubordinationReport subordination_identity_check(const SDECoefficients& coeffs, const TestFunctional& phi,
                                                 const SpectralBasis& basis, double t, std::size_t t_steps,
                                                 const SamplerSetup& setup);

// E_beta(-lambda u^2 t^beta / 2): characteristic function of lambda^{1/2} w(E_t).
double mode_characteristic_function(double lambda, double beta, double u, double t);

struct CharFunctionRow {
  std::size_t mode = 0;
  double u = 0.0;
  double empirical = 0.0, se = 0.0;
  double analytic = 0.0;
  double z = 0.0;
};

// Empirical E cos(u lambda_j^{1/2} w_j(E_t)) per mode and u, with E_t from
// the marginal law.
std::vector<CharFunctionRow> char_function_check(const SpectralBasis& basis, double beta, double t,
                                                 std::span<const double> u_values, std::size_t mc,
                                                 std::uint64_t seed, unsigned workers = 1);

}  // namespace subdiff
