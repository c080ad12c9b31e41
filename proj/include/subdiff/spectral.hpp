#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "subdiff/rng.hpp"
#include "subdiff/subordinator.hpp"

namespace subdiff {

// Elements of H (and K) in Q-eigencoordinates.
using HVector = Eigen::VectorXd;
// Operators K -> H in eigencoordinates: column j is the image of f_j.
using HSOperator = Eigen::MatrixXd;

// Rule generating the eigenvalues of Q.
struct LambdaRule {
  enum class Kind { power, geometric, explicit_list };
  Kind kind = Kind::power;
  double p = 2.0;      // power: lambda_j = j^{-p}
  double ratio = 0.5;  // geometric: lambda_j = ratio^j
  std::vector<double> values;

  static LambdaRule power_law(double p);
  static LambdaRule geometric_law(double ratio);
  static LambdaRule explicit_values(std::vector<double> values);
};

// Truncated eigenbasis of Q: eigenvalues lambda_1..lambda_J and, for diagonal
// test problems, eigenvalues mu_j of -A.
class SpectralBasis {
 public:
  SpectralBasis(std::vector<double> lambda, double tail_mass = 0.0,
                std::vector<double> generator_mu = {});

  [[nodiscard]] std::size_t dim() const noexcept { return lambda_.size(); }
  [[nodiscard]] std::span<const double> lambda() const noexcept { return lambda_; }
  [[nodiscard]] const Eigen::VectorXd& sqrt_lambda() const noexcept { return sqrt_lambda_; }
  [[nodiscard]] double trace() const noexcept { return trace_; }
  // sum of lambda_j over j > J under the generating rule (0 for explicit lists)
  [[nodiscard]] double tail_mass() const noexcept { return tail_; }
  [[nodiscard]] std::span<const double> generator_mu() const noexcept { return mu_; }
  [[nodiscard]] bool has_generator() const noexcept { return !mu_.empty(); }

  [[nodiscard]] SpectralBasis with_generator(std::vector<double> mu) const;
  // Same basis rescaled so that trace() == 1 (the tail is scaled too).
  [[nodiscard]] SpectralBasis normalized() const;

 private:
  std::vector<double> lambda_;
  Eigen::VectorXd sqrt_lambda_;
  double trace_ = 0.0;
  double tail_ = 0.0;
  std::vector<double> mu_;
};

SpectralBasis make_basis(std::size_t dim_J, const LambdaRule& rule);

// ||Phi||^2_{L2(K_Q, H)} = sum_j lambda_j ||Phi f_j||^2.
double hs_norm_sq(const HSOperator& phi, const SpectralBasis& basis);

// Squared K-norm of a vector given in eigencoordinates of W (sum_j lambda_j w_j^2).
double k_norm_sq(const Eigen::Ref<const Eigen::VectorXd>& w, const SpectralBasis& basis);

// Q-Wiener path on an operational-time grid. Row k of w() holds the
// standard Brownian coordinates w_j(tau_k); W_tau = sum_j lambda_j^{1/2} w_j(tau) f_j.
class QWienerPath {
 public:
  QWienerPath(std::vector<double> tau_grid, Eigen::MatrixXd w, SpectralBasis basis);

  [[nodiscard]] std::span<const double> tau() const noexcept { return tau_; }
  [[nodiscard]] const Eigen::MatrixXd& w() const noexcept { return w_; }
  [[nodiscard]] const SpectralBasis& basis() const noexcept { return basis_; }
  [[nodiscard]] std::size_t size() const noexcept { return tau_.size(); }
  // W at grid node k as an element of H.
  [[nodiscard]] HVector value(std::size_t k) const;

 private:
  std::vector<double> tau_;
  Eigen::MatrixXd w_;
  SpectralBasis basis_;
};

// W_{E_t} on a physical grid: row m of w_at_E() is w(E(t_m)).
class TimeChangedQWienerPath {
 public:
  TimeChangedQWienerPath(InversePath inverse, Eigen::MatrixXd w_at_E, SpectralBasis basis);

  [[nodiscard]] std::span<const double> t() const noexcept { return inverse_.t(); }
  [[nodiscard]] const InversePath& inverse() const noexcept { return inverse_; }
  [[nodiscard]] const Eigen::MatrixXd& w_at_E() const noexcept { return w_; }
  [[nodiscard]] const SpectralBasis& basis() const noexcept { return basis_; }
  [[nodiscard]] std::size_t size() const noexcept { return inverse_.size(); }
  [[nodiscard]] HVector value(std::size_t m) const;

 private:
  InversePath inverse_;
  Eigen::MatrixXd w_;
  SpectralBasis basis_;
};

// Independent standard Brownian coordinates on tau_grid (tau_grid[0] == 0).
QWienerPath simulate_qwiener(const SpectralBasis& basis, std::vector<double> tau_grid,
                             RngStream& rng);

// Keeps every `factor`-th node; exact for Brownian coordinates.
QWienerPath coarsen(const QWienerPath& qpath, std::size_t factor);

enum class Interpolation { linear, bridge };

// w_j(E(t_m)) from the tau-grid path. Values of E that fall on grid nodes are
// copied; values between nodes are linearly interpolated, or with
// Interpolation::bridge drawn from the Brownian bridge between the
// neighbouring known points (needs rng). Equal consecutive E values always
// give equal rows.
TimeChangedQWienerPath compose_time_change(const QWienerPath& qpath, const InversePath& inverse,
                                           Interpolation mode = Interpolation::linear,
                                           RngStream* rng = nullptr);

// Everything needed to rebuild a coupled time-changed path.
struct TimeChangedSample {
  SubordinatorPath subordinator;
  QWienerPath qpath;
  TimeChangedQWienerPath path;
};

// Subordinator on a tau-grid of step d_tau (extended past t_grid.back()),
// its inverse on t_grid, a Q-Wiener path on the same tau-grid, and the
// composition. Uses rng.split(0) for the clock and rng.split(1) for the noise.
TimeChangedSample simulate_tc_qwiener(const SpectralBasis& basis, BetaIndex beta,
                                      std::span<const double> t_grid, double d_tau,
                                      const RngStream& rng);

// Given an inverse path, draws w(E(t_m)) directly from independent Gaussian
// increments N(0, E(t_{m+1}) - E(t_m)). Exact in law; the underlying tau-path
// is not materialized.
TimeChangedQWienerPath sample_tc_qwiener_given(const SpectralBasis& basis, InversePath inverse,
                                               RngStream& rng);

// Cumulative sum over grid increments of ||Delta W_E||^2_K at each t_m.
std::vector<double> realized_quadratic_variation(const TimeChangedQWienerPath& path);

// Per-mode version: entry (m, j) is lambda_j * sum (Delta w_j)^2 up to t_m.
Eigen::MatrixXd realized_quadratic_variation_by_mode(const TimeChangedQWienerPath& path);

struct QuadraticVariationReport {
  double rel_rms = 0.0;  // mean over paths of the relative RMS over the grid
  double rel_rms_se = 0.0;
  std::size_t steps = 0;
  std::size_t paths = 0;
};

// Per path: sqrt(sum_m (QV(t_m) - trQ E(t_m))^2 / sum_m (trQ E(t_m))^2) on a
// uniform grid of `steps` steps, with E from a subordinator of step d_tau.
QuadraticVariationReport quadratic_variation_check(const SpectralBasis& basis, double beta, double horizon,
                                                   std::size_t steps, std::size_t paths, double d_tau,
                                                   std::uint64_t seed, unsigned workers = 1);
// Same check on several grids from one set of clocks; the noise for a grid
// depends only on (seed, path, steps), so each entry equals the single-grid
// check with the same arguments.
std::vector<QuadraticVariationReport> quadratic_variation_ladder(const SpectralBasis& basis, double beta,
                                                                 double horizon, std::span<const std::size_t> steps,
                                                                 std::size_t paths, double d_tau, std::uint64_t seed,
                                                                 unsigned workers = 1);

struct FourthMomentRow {
  double t1 = 0.0, t2 = 0.0;
  double lhs = 0.0, lhs_se = 0.0;       // E||W_{E_t2} - W_{E_t1}||^4
  double mean_dE_sq = 0.0;              // E[(E_t2 - E_t1)^2] on the same paths
  double rhs_three_trace_sq = 0.0;      // 3 (tr Q)^2 E[dE^2]
  double rhs_exact = 0.0;               // ((tr Q)^2 + 2 tr Q^2) E[dE^2]
  double rel_err_three_trace_sq = 0.0;  // relative to rhs_three_trace_sq
  double rel_err_exact = 0.0;
};

struct FourthMomentReport {
  std::vector<FourthMomentRow> rows;
};

// Coupled Monte Carlo of the increment fourth moment. Per replication i the
// inverse path is drawn from RngStream(seed, experiment, i). The Gaussian
// conditional identity gives E[||dW||^4 | dE] = ((trQ)^2 + 2 trQ^2) dE^2,
// which equals 3 (trQ)^2 dE^2 only for a single mode; both are reported.
FourthMomentReport increment_fourth_moment_check(const SpectralBasis& basis, BetaIndex beta,
                                                 std::span<const std::pair<double, double>> t_pairs,
                                                 std::size_t mc, std::uint64_t seed,
                                                 double d_tau = 1e-3, unsigned workers = 1);

// Columns t, E_t, w_1..w_J.
void write_path_csv(std::ostream& os, const TimeChangedQWienerPath& path);

}  // namespace subdiff
