#pragma once

// Posterior hierarchy, quantities of interest and proposals.
//
// Every density in a problem is a log-density relative to one shared
// reference measure (Lebesgue for the 1-D toys, the prior for Darcy). Only
// differences of log-densities ever enter an acceptance ratio, so
// normalizing constants are never needed.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlmcmc/point.hpp"
#include "mlmcmc/rng.hpp"

namespace mlmcmc {

/// Result of one forward evaluation at a level: -Phi_l(theta; y) and QoI_l(theta).
/// Computed together because for PDE problems both come from one solve.
struct Evaluation {
  double log_weight = 0.0;
  double qoi = 0.0;
};

struct LevelTarget {
  int level = 0;
  std::function<Evaluation(const Point&)> evaluate;
  /// Abstract work units per evaluation.
  double eval_cost = 1.0;
};

class Hierarchy {
 public:
  Hierarchy(std::vector<LevelTarget> targets, int refinement_factor,
            std::function<Point(Rng&)> reference_sampler);

  int max_level() const { return static_cast<int>(targets_.size()) - 1; }
  int refinement_factor() const { return refinement_factor_; }
  const LevelTarget& target(int level) const;
  const std::vector<LevelTarget>& targets() const { return targets_; }
  Point sample_reference(Rng& rng) const { return reference_sampler_(rng); }

 private:
  std::vector<LevelTarget> targets_;
  int refinement_factor_;
  std::function<Point(Rng&)> reference_sampler_;
};

/// Checked evaluation: range error for a bad level, domain error for a
/// non-finite point or a non-finite result.
Evaluation evaluate(const Hierarchy& h, int level, const Point& theta);

/// log of the unnormalized posterior density at `level`, i.e. -Phi_l(theta; y).
double log_target(const Hierarchy& h, int level, const Point& theta);

double qoi_eval(const Hierarchy& h, int level, const Point& theta);

/// State-independent proposal Q_l (levels >= 1).
struct IndependentProposal {
  std::function<double(const Point&)> log_density;
  std::function<Point(Rng&)> sampler;
};

/// State-dependent proposal Q(theta, .) used by the level-0 chain.
struct ConditionalProposal {
  /// log Q(from, to) relative to the problem's reference measure.
  std::function<double(const Point& from, const Point& to)> log_density;
  std::function<Point(const Point& from, Rng&)> sampler;
  /// Set only when log_density(a, b) == log_density(b, a) for all a, b.
  bool symmetric = false;
};

/// Heavy-tail diagnostic for an independent proposal.
///
/// Draws from the proposal and looks at the log importance weights
/// w = log_target - log_proposal. `log_weight_spread` is max(w) - median(w),
/// which does not depend on normalizing constants. Large values mean a few
/// tail draws dominate, i.e. the proposal is lighter-tailed than the target.
struct TailCheck {
  double log_weight_spread = 0.0;
  double threshold = 20.0;
  bool warning = false;
};

TailCheck check_proposal_tails(const LevelTarget& target, const IndependentProposal& q, Rng& rng,
                               std::size_t draws = 10000, double threshold_nats = 20.0);

/// Builds the level-l independent proposal. Adaptive problems use the fine
/// samples of level l-1 (possibly empty when none exist yet).
using ProposalFactory =
    std::function<IndependentProposal(int level, std::span<const Point> previous_level_samples)>;

/// A complete, runnable problem: hierarchy plus proposals.
struct Problem {
  std::string name;
  Hierarchy hierarchy;
  ConditionalProposal level0_proposal;
  ProposalFactory level_proposal;
  /// True when level_proposal reads the previous-level samples.
  bool adaptive_proposals = false;
  /// Starting point sampler for the level-0 chain (defaults to the reference).
  std::function<Point(Rng&)> level0_start;
  /// Exact E[QoI_l] when known in closed form.
  std::function<std::optional<double>(int level)> exact_level_mean;
  /// Exact limit E_{mu^y}[QoI] when known.
  std::optional<double> exact_limit;

  /// Cost of one level-l sample: one evaluation at level 0, two (coarse and
  /// fine) at l >= 1.
  double cost_per_sample(int level) const;
};

}  // namespace mlmcmc
