#pragma once

// Sample allocation, tolerance schedule, level selection, rate fitting and
// the continuation driver.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlmcmc/estimator.hpp"
#include "mlmcmc/model.hpp"

namespace mlmcmc {

/// Fitted models: weak error C_w s^{-alpha_w l}, variance C_beta s^{-beta l},
/// cost C_gamma s^{gamma l}, plus measured per-level sigma2 and costs.
struct TuningParams {
  double C_w = 0.0;
  double alpha_w = 0.0;
  double C_beta = 0.0;
  double beta = 0.0;
  double C_gamma = 0.0;
  double gamma = 0.0;
  int s = 2;
  /// Measured sigma2_l for levels that have been run.
  std::vector<double> sigma2;
  /// Cost per sample for every admissible level (0..L_max).
  std::vector<double> cost;

  /// Measured sigma2 when available, variance model otherwise.
  double sigma2_at(int level) const;
  double cost_at(int level) const;
  double weak_error_at(int level) const;
};

nlohmann::json to_json(const TuningParams& p);

struct Schedule {
  double tol = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  int i_E = 0;
  /// tol_0 .. tol_{i_E}.
  std::vector<double> tolerances;

  /// tol_i for any i >= 0 (beyond i_E the schedule keeps shrinking by r2).
  double at(int i) const;
};

/// N_l = ceil(2 tol^-2 sqrt(sigma2_l / C_l) sum_j sqrt(sigma2_j C_j)), at
/// least 1. With `corrected`, the factor 2 becomes 4(L+1), which is the
/// exact minimizer under 2(L+1) sum sigma2_l/N_l <= tol^2/2.
std::vector<std::size_t> sample_sizes(std::span<const double> sigma2, std::span<const double> cost,
                                      double tol, bool corrected = false);

/// The same allocation before ceiling and flooring.
std::vector<double> sample_sizes_real(std::span<const double> sigma2, std::span<const double> cost,
                                      double tol, bool corrected = false);

Schedule tol_schedule(double tol0, double tol, double r1, double r2);

/// No L <= L_max meets the weak-error constraint.
class InfeasibleLevels : public std::runtime_error {
 public:
  InfeasibleLevels(double min_tol_at_lmax, int l_max);
  /// Smallest tol_i the constraint admits at L_max: sqrt(2) C_w s^{-alpha_w L_max}.
  double min_tol_at_lmax() const { return min_tol_; }
  int l_max() const { return l_max_; }

 private:
  double min_tol_;
  int l_max_;
};

/// Cost objective 2 tol^-2 2(L+1) (sum_{j<=L} sqrt(C_beta s^{-beta j} C_j))^2.
double level_objective(int L, double tol_i, const TuningParams& params);

/// Cheapest L in [L_prev, L_max] with C_w s^{-alpha_w L} <= tol_i / sqrt(2),
/// by exhaustive search.
int select_levels(int l_prev, int l_max, double tol_i, const TuningParams& params);

struct RateFit {
  double C = 0.0;
  double rate = 0.0;
  double r_squared = 1.0;
  /// Standard error of the rate (0 with two points).
  double rate_stderr = 0.0;
};

/// Least squares fit of log v_l = log C - rate * l * log s.
RateFit fit_rates(std::span<const std::pair<int, double>> values, int s);

enum class Regime { BetaAboveGamma, BetaEqualsGamma, BetaBelowGamma };

struct ComplexityRegime {
  Regime regime = Regime::BetaAboveGamma;
  std::string tag;
  /// Cost ~ tol^{tol_exponent} |log tol|^{log_power}.
  double tol_exponent = -2.0;
  int log_power = 1;
  std::string description;
};

/// Asymptotic cost class. `tie_tol` widens the beta == gamma case for
/// fitted (noisy) rates.
ComplexityRegime complexity_regime(double beta, double gamma, double alpha_w, double tie_tol = 0.0);

struct ContinuationConfig {
  double tol0 = 0.5;
  double tol = 0.1;
  double r1 = 2.0;
  double r2 = 1.1;
  /// Screening samples per level.
  std::size_t screening_samples = 1000;
  int L0 = 2;
  int L_max = 10;
  std::uint64_t master_seed = 0;
  std::size_t max_iterations = 20;
  bool corrected_allocation = false;
  /// Rates below this floor are replaced by the floor (C refit at fixed
  /// rate); protects level selection from noise-dominated weak-error fits.
  double alpha_w_floor = 0.25;
  /// Levels with fewer samples are left out of the rate fits.
  std::size_t min_fit_samples = 100;
  /// Rebuild adaptive proposals from the previous iteration's samples.
  bool warm_start_proposals = true;
  std::size_t threads = 1;
};

struct IterationRecord {
  int iteration = 0;
  double tol_i = 0.0;
  int L = 0;
  std::vector<std::size_t> samples;
  TuningParams params;
  double te = 0.0;
  double estimate = 0.0;
  /// Error estimate with the extrapolated bias |Y_hat_L|/(1 - s^-alpha_w).
  ErrorReport extrapolated;
  std::vector<LevelStats> stats;
  std::string proposal_source;
  std::uint64_t stream = 0;
};

nlohmann::json to_json(const IterationRecord& r);

struct ContinuationResult {
  double estimate = 0.0;
  /// statistical + 2 (C_w s^{-alpha_w L})^2 from the final iteration.
  ErrorReport report;
  Schedule schedule;
  std::vector<IterationRecord> history;
  std::vector<LevelStats> final_stats;
  TuningParams screening_params;
};

class ContinuationError : public std::runtime_error {
 public:
  ContinuationError(const std::string& what, std::vector<IterationRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<IterationRecord>& history() const { return history_; }

 private:
  std::vector<IterationRecord> history_;
};

/// Fits {C_w, alpha_w, C_beta, beta, C_gamma, gamma} from level statistics
/// (levels >= 1 with at least `min_samples` samples) and records sigma2 /
/// costs. Shorter levels get the fitted variance model instead of their
/// own estimate.
TuningParams fit_tuning_params(std::span<const LevelStats> stats, const Problem& problem, int l_max,
                               double alpha_w_floor, std::size_t min_samples = 1);

/// Continuation ML-MCMC. Throws ContinuationError on non-convergence within
/// max_iterations and InfeasibleLevels (wrapped in ContinuationError) when
/// no admissible level count meets a tolerance.
ContinuationResult continuation(const Problem& problem, const ContinuationConfig& cfg);

}  // namespace mlmcmc
