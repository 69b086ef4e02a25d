#include "mlmcmc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mlmcmc {

namespace {

Evaluation checked(const LevelTarget& t, const Point& theta) {
  const Evaluation e = t.evaluate(theta);
  if (!std::isfinite(e.log_weight) || !std::isfinite(e.qoi)) {
    throw std::domain_error("non-finite target log-density or QoI at a proposed point");
  }
  return e;
}

double checked_log_q(const IndependentProposal& q, const Point& theta) {
  const double v = q.log_density(theta);
  if (!std::isfinite(v)) throw std::domain_error("proposal log-density is not finite");
  return v;
}

}  // namespace

const char* to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::BothAccepted: return "both_accepted";
    case OutcomeKind::FineOnly: return "fine_only";
    case OutcomeKind::CoarseOnly: return "coarse_only";
    case OutcomeKind::BothRejected: return "both_rejected";
  }
  return "unknown";
}

CoupledState make_coupled_state(const Hierarchy& h, int level, const IndependentProposal& q,
                                Point coarse, Point fine) {
  if (level < 1) throw std::out_of_range("coupled state requires level >= 1");
  CoupledState s;
  const Evaluation ec = evaluate(h, level - 1, coarse);
  const Evaluation ef = evaluate(h, level, fine);
  s.log_t_coarse = ec.log_weight;
  s.qoi_coarse = ec.qoi;
  s.log_t_fine = ef.log_weight;
  s.qoi_fine = ef.qoi;
  s.log_q_coarse = checked_log_q(q, coarse);
  s.log_q_fine = checked_log_q(q, fine);
  s.theta_coarse = std::move(coarse);
  s.theta_fine = std::move(fine);
  return s;
}

CoupledState make_diagonal_state(const Hierarchy& h, int level, const IndependentProposal& q,
                                 const Point& theta) {
  return make_coupled_state(h, level, q, theta, theta);
}

bool cache_consistent(const CoupledState& s, const Hierarchy& h, int level,
                      const IndependentProposal& q, double tol) {
  const auto close = [tol](double a, double b) { return std::abs(a - b) <= tol; };
  const Evaluation ec = evaluate(h, level - 1, s.theta_coarse);
  const Evaluation ef = evaluate(h, level, s.theta_fine);
  return close(ec.log_weight, s.log_t_coarse) && close(ec.qoi, s.qoi_coarse) &&
         close(ef.log_weight, s.log_t_fine) && close(ef.qoi, s.qoi_fine) &&
         close(q.log_density(s.theta_coarse), s.log_q_coarse) &&
         close(q.log_density(s.theta_fine), s.log_q_fine);
}

OutcomeKind classify_outcome(double u, double alpha_coarse, double alpha_fine) {
  const bool coarse = u <= alpha_coarse;
  const bool fine = u <= alpha_fine;
  if (coarse && fine) return OutcomeKind::BothAccepted;
  if (fine) return OutcomeKind::FineOnly;
  if (coarse) return OutcomeKind::CoarseOnly;
  return OutcomeKind::BothRejected;
}

double imh_accept_prob(double log_t_cur, double log_t_prop, double log_q_cur, double log_q_prop) {
  if (!std::isfinite(log_t_cur) || !std::isfinite(log_t_prop) || !std::isfinite(log_q_cur) ||
      !std::isfinite(log_q_prop)) {
    throw std::domain_error("imh_accept_prob: non-finite input");
  }
  const double log_ratio = (log_t_prop - log_t_cur) + (log_q_cur - log_q_prop);
  return std::exp(std::min(0.0, log_ratio));
}

std::pair<CoupledState, StepOutcome> coupled_step(const Hierarchy& h, int level,
                                                  const IndependentProposal& q,
                                                  const CoupledState& s, Rng& rng) {
  if (level < 1) throw std::out_of_range("coupled_step: level 0 uses single_level_step");
  const LevelTarget& coarse_target = h.target(level - 1);
  const LevelTarget& fine_target = h.target(level);

  StepOutcome out;
  out.proposal = q.sampler(rng);
  require_finite(out.proposal, "coupled_step proposal");
  const double log_q_z = checked_log_q(q, out.proposal);
  const Evaluation ec = checked(coarse_target, out.proposal);
  const Evaluation ef = checked(fine_target, out.proposal);

  out.alpha_coarse = imh_accept_prob(s.log_t_coarse, ec.log_weight, s.log_q_coarse, log_q_z);
  out.alpha_fine = imh_accept_prob(s.log_t_fine, ef.log_weight, s.log_q_fine, log_q_z);
  out.u = rng.uniform();
  out.kind = classify_outcome(out.u, out.alpha_coarse, out.alpha_fine);

  CoupledState next = s;
  const bool move_coarse =
      out.kind == OutcomeKind::BothAccepted || out.kind == OutcomeKind::CoarseOnly;
  const bool move_fine = out.kind == OutcomeKind::BothAccepted || out.kind == OutcomeKind::FineOnly;
  if (move_coarse) {
    next.theta_coarse = out.proposal;
    next.log_t_coarse = ec.log_weight;
    next.qoi_coarse = ec.qoi;
    next.log_q_coarse = log_q_z;
  }
  if (move_fine) {
    next.theta_fine = out.proposal;
    next.log_t_fine = ef.log_weight;
    next.qoi_fine = ef.qoi;
    next.log_q_fine = log_q_z;
  }
  return {std::move(next), std::move(out)};
}

SingleStepResult single_level_step(const LevelTarget& target, const ConditionalProposal& q,
                                   const Point& theta, const Evaluation& current, Rng& rng) {
  require_finite(theta, "single_level_step");
  Point z = q.sampler(theta, rng);
  require_finite(z, "single_level_step proposal");
  const Evaluation ez = checked(target, z);
  double log_ratio = ez.log_weight - current.log_weight;
  if (!q.symmetric) {
    const double back = q.log_density(z, theta);
    const double fwd = q.log_density(theta, z);
    if (!std::isfinite(back) || !std::isfinite(fwd)) {
      throw std::domain_error("single_level_step: non-finite proposal log-density");
    }
    log_ratio += back - fwd;
  }
  SingleStepResult r;
  r.alpha = std::exp(std::min(0.0, log_ratio));
  r.accepted = rng.uniform() <= r.alpha;
  if (r.accepted) {
    r.theta = std::move(z);
    r.eval = ez;
  } else {
    r.theta = theta;
    r.eval = current;
  }
  return r;
}

SingleStepResult single_level_step(const LevelTarget& target, const ConditionalProposal& q,
                                   const Point& theta, Rng& rng) {
  require_finite(theta, "single_level_step");
  return single_level_step(target, q, theta, checked(target, theta), rng);
}

}  // namespace mlmcmc
