#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "subdiff/rng.hpp"

namespace subdiff {

// Stability index of the subordinator. 1.0 is accepted as the degenerate
// deterministic clock U(tau) = tau, E(t) = t.
class BetaIndex {
 public:
  explicit BetaIndex(double beta);
  [[nodiscard]] double value() const noexcept { return beta_; }
  [[nodiscard]] bool degenerate() const noexcept { return beta_ == 1.0; }

 private:
  double beta_;
};

// Sample path of a beta-stable subordinator on an operational-time grid.
// Increments over (tau_{k-1}, tau_k] are attributed to the right endpoint.
class SubordinatorPath {
 public:
  SubordinatorPath(std::vector<double> tau_grid, std::vector<double> values);

  [[nodiscard]] std::span<const double> tau() const noexcept { return tau_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t size() const noexcept { return tau_.size(); }
  [[nodiscard]] double max_value() const noexcept { return values_.back(); }

 private:
  std::vector<double> tau_;
  std::vector<double> values_;
};

// Inverse (first-passage) path E(t) on a physical-time grid.
//
// Convention: E(t) is the smallest grid tau_k with U(tau_k) >= t. This is the
// grid version of inf{tau : U(tau) > t}; the two differ only when t equals a
// path value exactly. It gives E(0) = 0, keeps E constant while U jumps over
// an interval of t, and is right-continuous and nondecreasing in t.
class InversePath {
 public:
  InversePath(std::vector<double> t_grid, std::vector<double> values);

  [[nodiscard]] std::span<const double> t() const noexcept { return t_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t size() const noexcept { return t_.size(); }

 private:
  std::vector<double> t_;
  std::vector<double> values_;
};

struct MLParams {
  int series_terms = 2000;
  double switch_radius = 5.0;
};

// Uniform grid {0, h, 2h, ..., n h}.
std::vector<double> uniform_grid(double horizon, std::size_t steps);

// One increment S of the subordinator over an operational step dt:
// E[exp(-u S)] = exp(-dt u^beta). Uses Kanter's representation of the
// one-sided stable law; beta = 1 returns dt exactly.
double sample_stable_increment(BetaIndex beta, double dt, RngStream& rng);

// Path on the grid {0, d_tau, ..., tau_max} (last step may be shortened).
SubordinatorPath simulate_subordinator_path(BetaIndex beta, double tau_max, double d_tau,
                                            RngStream& rng);

// Path on a uniform grid of step d_tau, extended until the path strictly
// exceeds t_max so that any t <= t_max can be inverted.
SubordinatorPath simulate_subordinator_until(BetaIndex beta, double t_max, double d_tau,
                                             RngStream& rng);

// Keeps every `factor`-th node. Because increments add, the result is an
// exact subordinator path on the coarse grid.
SubordinatorPath coarsen(const SubordinatorPath& path, std::size_t factor);

// E(t_m) for each t_m of an increasing grid; throws HorizonError when
// t_grid exceeds the path's range.
InversePath invert_path(const SubordinatorPath& path, std::span<const double> t_grid);

// E(t) = t on the given grid.
InversePath identity_inverse(std::span<const double> t_grid);

// (t/S)^beta with S ~ U_beta(1): a draw from the marginal law of E_t.
double sample_inverse_marginal(BetaIndex beta, double t, RngStream& rng);

// E[E_t^n] = t^{n beta} n! / Gamma(n beta + 1).
double inverse_moment(BetaIndex beta, double t, int n);

// E_beta(z) = sum_k z^k / Gamma(beta k + 1) for real z.
//
// Strategy: beta = 1 is exp(z). For z >= 0, and for moderate negative z where
// the alternating series suffers little cancellation, the series is summed in
// long double. Otherwise (negative z with heavy cancellation, or beyond
// switch_radius) the completely monotone integral representation
//   E_beta(-x) = int_0^inf K(r) exp(-r x^{1/beta}) dr,
//   K(r) = sin(beta pi) r^{beta-1} / (pi (r^{2 beta} + 2 r^beta cos(beta pi) + 1)),
// is evaluated by double-exponential quadrature.
double mittag_leffler(double beta, double z, const MLParams& params = {});

struct LaplaceCheckRow {
  double s = 0.0;
  double lhs = 0.0;     // Monte Carlo + quadrature transform of t -> E[h(E_t)]
  double lhs_se = 0.0;
  double rhs = 0.0;     // s^{beta-1} * htilde(s^beta)
  double rel_err = 0.0;
};

struct LaplaceCheckReport {
  std::vector<LaplaceCheckRow> rows;
  double max_rel_err = 0.0;
};

// Checks the Laplace subordination identity
//   L{ t -> E[h(E_t)] }(s) = s^{beta-1} htilde(s^beta).
// E_t is sampled as t^beta E_1 (self-similarity) from `samples` draws; for
// each draw the t-integral is done by quadrature. htilde is computed by
// quadrature unless `h_transform` is supplied.
LaplaceCheckReport laplace_subordination_check(const std::function<double(double)>& h,
                                               BetaIndex beta, std::span<const double> s_grid,
                                               std::size_t samples, std::uint64_t seed,
                                               const std::function<double(double)>& h_transform = {});

}  // namespace subdiff
