#pragma once

// One-step Markov transition kernels.
//
// Level 0 uses a plain Metropolis-Hastings step with a state-dependent
// proposal. Levels l >= 1 advance a pair (coarse, fine) with one shared
// independent proposal z ~ Q_l and one shared uniform u; each component
// accepts z iff u <= its own acceptance probability. The shared uniform is a
// maximal coupling of the two Bernoulli decisions, so the pair moves onto
// the diagonal with probability min(a_c, a_f) and each component on its own
// is an exact independent-MH chain for its level.

#include <cstdint>
#include <utility>

#include "mlmcmc/model.hpp"
#include "mlmcmc/point.hpp"
#include "mlmcmc/rng.hpp"

namespace mlmcmc {

/// Pair state of the level-l coupled chain with cached evaluations.
struct CoupledState {
  Point theta_coarse;
  Point theta_fine;
  double log_t_coarse = 0.0;  ///< log_target(l-1, theta_coarse)
  double log_t_fine = 0.0;    ///< log_target(l, theta_fine)
  double log_q_coarse = 0.0;  ///< log Q_l(theta_coarse)
  double log_q_fine = 0.0;    ///< log Q_l(theta_fine)
  double qoi_coarse = 0.0;
  double qoi_fine = 0.0;

  bool synchronized() const { return same_bits(theta_coarse, theta_fine); }
};

/// Both components placed at `theta`, caches filled from fresh evaluations.
CoupledState make_diagonal_state(const Hierarchy& h, int level, const IndependentProposal& q,
                                 const Point& theta);

/// Pair state from two (possibly different) points.
CoupledState make_coupled_state(const Hierarchy& h, int level, const IndependentProposal& q,
                                Point coarse, Point fine);

/// True when every cached value equals a fresh evaluation (to `tol`).
bool cache_consistent(const CoupledState& s, const Hierarchy& h, int level,
                      const IndependentProposal& q, double tol = 0.0);

enum class OutcomeKind : std::uint8_t { BothAccepted, FineOnly, CoarseOnly, BothRejected };

const char* to_string(OutcomeKind kind);

struct StepOutcome {
  OutcomeKind kind = OutcomeKind::BothRejected;
  Point proposal;
  double u = 0.0;
  double alpha_coarse = 0.0;
  double alpha_fine = 0.0;
};

/// Outcome implied by a shared uniform and the two acceptance probabilities.
OutcomeKind classify_outcome(double u, double alpha_coarse, double alpha_fine);

/// Independent-MH acceptance probability
/// min{1, exp[(log_t_prop - log_t_cur) + (log_q_cur - log_q_prop)]},
/// clamped in log space before exponentiating. Domain error on non-finite input.
double imh_accept_prob(double log_t_cur, double log_t_prop, double log_q_cur, double log_q_prop);

/// One step of the coupled chain at level >= 1. Range error at level 0.
/// Costs one target evaluation per component (two per step).
std::pair<CoupledState, StepOutcome> coupled_step(const Hierarchy& h, int level,
                                                  const IndependentProposal& q,
                                                  const CoupledState& s, Rng& rng);

struct SingleStepResult {
  Point theta;
  Evaluation eval;
  bool accepted = false;
  double alpha = 0.0;
};

/// One Metropolis-Hastings step with acceptance ratio
/// pi(z) Q(z, theta) / (pi(theta) Q(theta, z)). `current` must be the
/// evaluation of `target` at `theta`.
SingleStepResult single_level_step(const LevelTarget& target, const ConditionalProposal& q,
                                   const Point& theta, const Evaluation& current, Rng& rng);

/// Convenience overload that evaluates the current point itself.
SingleStepResult single_level_step(const LevelTarget& target, const ConditionalProposal& q,
                                   const Point& theta, Rng& rng);

}  // namespace mlmcmc
