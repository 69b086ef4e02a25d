#pragma once

// Study drivers behind the command-line tool: configuration, the rate,
// continuation, oracle and comparison studies, and their output files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlmcmc/estimator.hpp"
#include "mlmcmc/model.hpp"
#include "mlmcmc/oracle.hpp"
#include "mlmcmc/tuner.hpp"

namespace mlmcmc::experiments {

extern const char* const kVersion;

/// Invalid configuration; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  std::string problem = "nested";
  std::string mode = "run";
  /// Finest level for run / rates / baseline-compare / oracle-check.
  int levels = 6;
  std::size_t samples = 50000;
  std::optional<std::size_t> burnin;
  std::size_t replicas = 20;
  double tol = 0.1;
  double tol0 = 0.5;
  double r1 = 2.0;
  double r2 = 1.1;
  std::size_t screening_samples = 1000;
  int L0 = 2;
  int L_max = 10;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  bool emit_trajectories = false;
  std::size_t threads = 1;
  bool paper_scale = false;
  bool corrected_allocation = false;
  std::string init_policy = "diagonal";
  int grid_n = 64;
  /// Explicit oracle grid bounds; chosen automatically when unset.
  std::optional<double> grid_a;
  std::optional<double> grid_b;
  int k_max = 10;
  std::size_t mse_samples = 500;
  std::size_t mse_replicas = 10000;
};

/// Reads a flat JSON object over the defaults. Unknown keys and wrong types
/// are ConfigErrors.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& c);

/// Checks every field the mode reads. Throws ConfigError.
void validate(const RunConfig& c);

/// The configured problem, with enough levels for the mode.
Problem make_problem(const RunConfig& c);

/// Mean over replicas with a 95% Student-t interval.
struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

Interval t_interval(std::span<const double> values);

struct LevelSummary {
  int level = 0;
  std::size_t n = 0;
  Interval mean_abs_y;
  /// |mean over replicas of Y_hat_l| with the interval of the signed mean.
  double abs_mean_y = 0.0;
  Interval mean_y;
  Interval var_y;
  Interval sigma2;
  Interval sync_rate;
  /// Fine-chain marginal mean pooled over replicas and its standard error
  /// (batched means within each replica).
  double marginal_mean = 0.0;
  double marginal_se = 0.0;
  std::optional<double> exact_marginal;
};

struct RatesResult {
  std::vector<LevelSummary> levels;
  /// Fits over levels >= 1 of mean|Y| (alpha_w), |mean Y| (alpha_w_signed) and V[Y] (beta).
  RateFit alpha_w;
  RateFit alpha_w_signed;
  RateFit beta;
  /// 95% intervals of the per-replica fitted rates.
  Interval alpha_w_replicas;
  Interval beta_replicas;
};

/// Runs `replicas` independent hierarchies 0..levels with `samples` per
/// level. Replica r uses stream r of master_seed.
RatesResult rates_study(const Problem& problem, const RunConfig& c);

struct ContinuationRun {
  std::uint64_t seed = 0;
  bool converged = false;
  std::string error;
  ContinuationResult result;
  std::optional<double> squared_error;
};

struct ContinuationStudy {
  std::vector<ContinuationRun> runs;
  /// Mean squared error against the exact limit, when known.
  std::optional<double> mse;
  bool all_converged = false;
};

/// `replicas` continuation runs with seeds derived from master_seed.
ContinuationStudy continuation_study(const Problem& problem, const RunConfig& c);

struct CompareRow {
  int level = 0;
  std::string method;
  double marginal_mean = 0.0;
  double se = 0.0;
  double sync_rate = 1.0;
  std::size_t n = 0;
  std::optional<double> exact;
  /// (marginal_mean - exact) / se.
  std::optional<double> z;
};

/// Coupled IMH versus the sub-sampling baseline, levels 0..levels, one
/// replica each. Invalid argument for problems without fixed proposals.
std::vector<CompareRow> baseline_compare(const Problem& problem, const RunConfig& c);

/// Oracle reports for levels 1..levels.
std::vector<oracle::OracleReport> oracle_study(const Problem& problem, const RunConfig& c);

/// Output writers. Each returns true when the command's checks pass. JSON
/// files carry a "meta" block; each CSV gets a <name>.meta.json sidecar.
bool write_rates(const std::filesystem::path& dir, const RatesResult& r, const RunConfig& c);
bool write_continuation(const std::filesystem::path& dir, const ContinuationStudy& s, const RunConfig& c);
bool write_compare(const std::filesystem::path& dir, const std::vector<CompareRow>& rows, const RunConfig& c);
bool write_oracle(const std::filesystem::path& dir, const std::vector<oracle::OracleReport>& reports,
                  const RunConfig& c);

/// One multilevel run: levels.csv, summary.json and, when requested, one
/// trajectory CSV per level.
bool run_fixed(const Problem& problem, const RunConfig& c, const std::filesystem::path& dir);

nlohmann::json meta(const RunConfig& c);

}  // namespace mlmcmc::experiments
