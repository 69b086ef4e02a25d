#include "mlmcmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mlmcmc {

Hierarchy::Hierarchy(std::vector<LevelTarget> targets, int refinement_factor,
                     std::function<Point(Rng&)> reference_sampler)
    : targets_(std::move(targets)),
      refinement_factor_(refinement_factor),
      reference_sampler_(std::move(reference_sampler)) {
  if (targets_.empty()) throw std::invalid_argument("Hierarchy: no levels");
  if (refinement_factor_ < 2) throw std::invalid_argument("Hierarchy: refinement factor must be >= 2");
  if (!reference_sampler_) throw std::invalid_argument("Hierarchy: missing reference sampler");
  for (std::size_t l = 0; l < targets_.size(); ++l) {
    const auto& t = targets_[l];
    if (t.level != static_cast<int>(l)) {
      throw std::invalid_argument("Hierarchy: levels must be contiguous and sorted from 0");
    }
    if (!t.evaluate) throw std::invalid_argument("Hierarchy: level without evaluator");
    if (!(t.eval_cost > 0.0)) throw std::invalid_argument("Hierarchy: eval_cost must be positive");
    if (l > 0 && t.eval_cost < targets_[l - 1].eval_cost) {
      throw std::invalid_argument("Hierarchy: eval_cost must be non-decreasing in the level");
    }
  }
}

const LevelTarget& Hierarchy::target(int level) const {
  if (level < 0 || level > max_level()) {
    throw std::out_of_range("level " + std::to_string(level) + " outside 0.." +
                            std::to_string(max_level()));
  }
  return targets_[static_cast<std::size_t>(level)];
}

Evaluation evaluate(const Hierarchy& h, int level, const Point& theta) {
  const auto& t = h.target(level);
  require_finite(theta, "evaluate");
  const Evaluation e = t.evaluate(theta);
  if (!std::isfinite(e.log_weight) || !std::isfinite(e.qoi)) {
    throw std::domain_error("evaluate: non-finite log-weight or QoI at level " +
                            std::to_string(level));
  }
  return e;
}

double log_target(const Hierarchy& h, int level, const Point& theta) {
  return evaluate(h, level, theta).log_weight;
}

double qoi_eval(const Hierarchy& h, int level, const Point& theta) {
  return evaluate(h, level, theta).qoi;
}

TailCheck check_proposal_tails(const LevelTarget& target, const IndependentProposal& q, Rng& rng,
                               std::size_t draws, double threshold_nats) {
  if (draws == 0) throw std::domain_error("check_proposal_tails: need at least one draw");
  std::vector<double> logw(draws);
  for (auto& w : logw) {
    const Point z = q.sampler(rng);
    w = target.evaluate(z).log_weight - q.log_density(z);
  }
  const double wmax = *std::max_element(logw.begin(), logw.end());
  auto mid = logw.begin() + static_cast<std::ptrdiff_t>(draws / 2);
  std::nth_element(logw.begin(), mid, logw.end());
  const double wmedian = *mid;
  TailCheck out;
  out.log_weight_spread = wmax - wmedian;
  out.threshold = threshold_nats;
  out.warning = out.log_weight_spread > threshold_nats;
  return out;
}

double Problem::cost_per_sample(int level) const {
  const double fine = hierarchy.target(level).eval_cost;
  return level == 0 ? fine : fine + hierarchy.target(level - 1).eval_cost;
}

}  // namespace mlmcmc
