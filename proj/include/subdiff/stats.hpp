#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace subdiff {

// Sample mean with its standard error.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Pairwise (cascade) summation; result depends only on the input order.
double pairwise_sum(std::span<const double> xs);

Estimate summarize(std::span<const double> xs);

// Estimate of E[a - b] from paired samples (the pooled SE of a coupled
// Monte Carlo comparison).
Estimate paired_difference(std::span<const double> a, std::span<const double> b);

// |estimate - target| expressed in standard errors; infinite when se == 0
// and the values differ.
double z_score(const Estimate& e, double target);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// Asymptotic 1% critical value of the two-sample KS statistic.
double ks_critical_1pct(std::size_t n, std::size_t m);

// Least-squares slope of y on x, with its standard error.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

// Empirical convergence order from errors measured at step sizes `steps`:
// the slope of log(error) against log(step).
double fitted_order(std::span<const double> steps, std::span<const double> errors);

}  // namespace subdiff
