#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mlmcmc::stats {

/// Pairwise (cascade) summation. The result depends only on the input order,
/// never on how work was split across threads.
double pairwise_sum(std::span<const double> xs);

double mean(std::span<const double> xs);

/// Unbiased sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> xs);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  /// Standard error of the slope (0 for two points).
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Needs >= 2 distinct x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

/// Two-sided Student t quantile for a (1 - alpha) interval, dof >= 1.
double student_t_quantile(double alpha, std::size_t dof);

/// Kolmogorov-Smirnov distance between an empirical sample and a CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace mlmcmc::stats
