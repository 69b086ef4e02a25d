#pragma once

// Multilevel estimator and its error decomposition.

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlmcmc/sampler.hpp"

namespace mlmcmc {

struct LevelStats {
  int level = 0;
  /// Sample mean of Y_l.
  double y_mean = 0.0;
  /// Batched-means estimate of N * Var(Y_hat_l), i.e. the asymptotic variance.
  double y_var_asymptotic = 0.0;
  /// Plain sample variance of the Y_l values.
  double y_var_sample = 0.0;
  /// Mean of |Y_l|.
  double abs_y_mean = 0.0;
  std::size_t n = 0;
  /// 1 at level 0 by convention.
  double sync_rate = 1.0;
  double cost_per_sample = 0.0;
  std::vector<double> raw_y;

  /// Batched-means standard error of y_mean.
  double standard_error() const;
};

struct ErrorReport {
  double statistical = 0.0;
  double bias_sq = 0.0;
  double total = 0.0;
  double tol = 0.0;
  bool converged = false;
};

/// Y_l^n = QoI_l(theta_fine^n) - QoI_{l-1}(theta_coarse^n); Y_0 = QoI_0.
/// Domain error when `level` does not match the run.
std::vector<double> y_series(const ChainRun& run, int level);

/// Batched-means asymptotic variance with b = floor(N/m) batches:
/// (m / (b - 1)) * sum_k (B_k - Ybar)^2, Ybar the mean of the batched part.
/// Domain error with fewer than two batches.
double batched_means_var(std::span<const double> series, std::size_t batch_size);

/// floor(sqrt(N)), at least 1.
std::size_t default_batch_size(std::size_t n);

/// Integrated autocorrelation time 1 + 2 sum_k rho_k, truncated at the first
/// non-positive rho_k and at max_lag; clipped below at 1. Constant series
/// give 1.
double iact(std::span<const double> series, std::size_t max_lag);

/// max(1, N / 50).
std::size_t default_max_lag(std::size_t n);

/// Telescoping sum of level means; domain error unless levels are 0..L.
double ml_estimate(std::span<const LevelStats> stats);

/// Statistics of one level from its run.
LevelStats level_stats(const ChainRun& run, double cost_per_sample);
LevelStats level_stats(const ChainRun& run, double cost_per_sample, std::size_t batch_size);

/// statistical = 2(L+1) sum sigma2_l / N_l;
/// bias_sq = 2 (|Y_hat_L| / (1 - s^-alpha_w))^2;
/// converged iff total <= tol^2. Needs L >= 1 and alpha_w > 0.
ErrorReport error_report(std::span<const LevelStats> stats, double alpha_w, int s, double tol);

nlohmann::json to_json(const LevelStats& s);
nlohmann::json to_json(const ErrorReport& r);

}  // namespace mlmcmc
