#pragma once

// Chain runners: the level-0 single chain, the level-l coupled chains, and a
// driver that runs a full hierarchy 0..L once.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mlmcmc/kernel.hpp"
#include "mlmcmc/model.hpp"
#include "mlmcmc/point.hpp"

namespace mlmcmc {

/// Retained output of one chain. QoI values and outcomes are always kept;
/// parameter trajectories only on request.
struct ChainRun {
  int level = 0;
  std::uint64_t seed = 0;
  std::size_t burnin = 0;
  /// QoI_{l-1}(theta_coarse^n); empty at level 0.
  std::vector<double> qoi_coarse;
  /// QoI_l(theta_fine^n); at level 0 the single chain.
  std::vector<double> qoi_fine;
  /// Per retained step. Level 0 records accepted moves as BothAccepted and
  /// rejections as BothRejected.
  std::vector<OutcomeKind> outcomes;
  /// Per retained step, 1 when theta_coarse == theta_fine; empty at level 0.
  std::vector<std::uint8_t> synchronized;
  /// Full trajectories when requested (coarse empty at level 0).
  std::vector<Point> coarse_trajectory;
  std::vector<Point> fine_trajectory;
  /// Fine-chain samples kept for building later proposals (possibly thinned).
  std::vector<Point> fine_samples;
  Point final_fine;
  /// Accumulated evaluation cost, including burn-in.
  double work = 0.0;
  /// Accepted moves among retained steps (level 0: accepted proposals;
  /// level >= 1: steps where the fine chain moved).
  std::size_t accepted = 0;

  std::size_t size() const { return qoi_fine.size(); }
  double acceptance_rate() const;
};

enum class InitPolicy {
  /// theta0 ~ Q_l, both components equal.
  Diagonal,
  /// Both components start from a given point (e.g. the last fine state of
  /// level l-1).
  WarmStart,
};

struct InitSpec {
  InitPolicy policy = InitPolicy::Diagonal;
  std::optional<Point> start;

  static InitSpec diagonal() { return {}; }
  static InitSpec warm(Point p) { return {InitPolicy::WarmStart, std::move(p)}; }
};

struct ChainOptions {
  std::size_t samples = 1;
  std::size_t burnin = 0;
  std::uint64_t seed = 0;
  bool keep_trajectory = false;
  /// Keep up to this many evenly spaced fine samples (0 = none).
  std::size_t keep_fine_samples = 0;
};

/// max(1000, N / 10).
std::size_t default_burnin(std::size_t samples);

ChainRun run_level0(const LevelTarget& target, const ConditionalProposal& proposal,
                    const Point& start, const ChainOptions& opts);

ChainRun run_coupled(const Hierarchy& h, int level, const IndependentProposal& q,
                     const ChainOptions& opts, const InitSpec& init = InitSpec::diagonal());

/// Fraction of retained steps with theta_coarse == theta_fine. Domain error
/// for level-0 runs.
double sync_rate(const ChainRun& run);

/// Synchronization indicator averaged over consecutive windows of `window`
/// steps (last partial window dropped).
std::vector<double> sync_series(const ChainRun& run, std::size_t window);

/// CSV "step,theta_coarse_0..,theta_fine_0..,outcome". Requires a run made
/// with keep_trajectory.
void write_trajectory_csv(std::ostream& os, const ChainRun& run);

struct MultilevelOptions {
  std::uint64_t master_seed = 0;
  /// Distinguishes replicas / continuation iterations sharing a master seed.
  std::uint64_t stream = 0;
  StreamPurpose purpose = StreamPurpose::Chain;
  /// Burn-in per level; default_burnin(N_l) when unset.
  std::optional<std::size_t> burnin;
  /// Warm-start level l from the last fine state of level l-1 instead of a
  /// diagonal draw from Q_l. Forces sequential execution.
  bool warm_start = false;
  bool keep_trajectory = false;
  /// Fine samples retained per level for proposal construction.
  std::size_t keep_fine_samples = 0;
  /// Samples to build the level-l proposal from, indexed by l-1. Levels
  /// without an entry use the current run's level l-1 chain.
  std::vector<std::vector<Point>> proposal_pool;
  std::size_t threads = 1;
};

struct MultilevelRun {
  std::vector<ChainRun> levels;
};

/// Runs levels 0..samples.size()-1 once. Level l uses stream
/// derive_seed(master_seed, l, stream, purpose).
MultilevelRun run_multilevel(const Problem& problem, std::span<const std::size_t> samples,
                             const MultilevelOptions& opts);

}  // namespace mlmcmc
