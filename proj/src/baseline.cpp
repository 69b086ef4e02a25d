#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "mlmcmc/estimator.hpp"
#include "mlmcmc/problems.hpp"

namespace mlmcmc {

namespace {

struct Draw {
  Point theta;
  Evaluation eval;
};

// A chain at one level that can be stepped on demand.
class LevelChain {
 public:
  virtual ~LevelChain() = default;
  /// Advances one step and returns the new state.
  virtual const Draw& step() = 0;
  virtual const Draw& current() const = 0;
  /// Accepted flag of the last step.
  virtual bool last_accepted() const = 0;
  /// Evaluation cost accumulated so far, including sub-chains.
  virtual double work() const = 0;
};

class RandomWalkChain final : public LevelChain {
 public:
  RandomWalkChain(const Problem& p, Point start, std::uint64_t seed)
      : target_(p.hierarchy.target(0)), q_(p.level0_proposal), rng_(seed) {
    state_.eval = target_.evaluate(start);
    state_.theta = std::move(start);
    work_ = target_.eval_cost;
  }

  const Draw& step() override {
    SingleStepResult r = single_level_step(target_, q_, state_.theta, state_.eval, rng_);
    state_.theta = std::move(r.theta);
    state_.eval = r.eval;
    accepted_ = r.accepted;
    work_ += target_.eval_cost;
    return state_;
  }
  const Draw& current() const override { return state_; }
  bool last_accepted() const override { return accepted_; }
  double work() const override { return work_; }

 private:
  const LevelTarget& target_;
  const ConditionalProposal& q_;
  Rng rng_;
  Draw state_;
  bool accepted_ = false;
  double work_ = 0.0;
};

// Level-l chain whose proposals are states of a level-(l-1) chain, `rate`
// coarse steps apart.
class SubsampledChain final : public LevelChain {
 public:
  SubsampledChain(const Problem& p, int level, std::unique_ptr<LevelChain> coarse, std::size_t rate,
                  std::uint64_t seed)
      : target_(p.hierarchy.target(level)), coarse_(std::move(coarse)), rate_(rate), rng_(seed) {
    const Draw& c = coarse_->current();
    fine_.theta = c.theta;
    fine_.eval = target_.evaluate(c.theta);
    coarse_at_fine_ = c.eval.log_weight;
    proposal_ = c;
    work_ = target_.eval_cost;
  }

  const Draw& step() override {
    for (std::size_t k = 0; k < rate_; ++k) coarse_->step();
    proposal_ = coarse_->current();
    const Evaluation fine_at_z = target_.evaluate(proposal_.theta);
    work_ += target_.eval_cost;
    // min{1, pi_l(z) pi_{l-1}(theta) / (pi_l(theta) pi_{l-1}(z))}
    const double alpha = imh_accept_prob(fine_.eval.log_weight, fine_at_z.log_weight,
                                         coarse_at_fine_, proposal_.eval.log_weight);
    accepted_ = rng_.uniform() <= alpha;
    if (accepted_) {
      fine_.theta = proposal_.theta;
      fine_.eval = fine_at_z;
      coarse_at_fine_ = proposal_.eval.log_weight;
    }
    return fine_;
  }
  const Draw& current() const override { return fine_; }
  bool last_accepted() const override { return accepted_; }
  double work() const override { return work_ + coarse_->work(); }
  /// Coarse state proposed at the last step.
  const Draw& coarse_proposal() const { return proposal_; }

 private:
  const LevelTarget& target_;
  std::unique_ptr<LevelChain> coarse_;
  std::size_t rate_;
  Rng rng_;
  Draw fine_;
  Draw proposal_;
  double coarse_at_fine_ = 0.0;
  bool accepted_ = false;
  double work_ = 0.0;
};

Point level0_start(const Problem& p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0, 0, StreamPurpose::Chain));
  return p.level0_start ? p.level0_start(rng) : p.hierarchy.sample_reference(rng);
}

// Chain at `level` built recursively; rates[k] is the rate feeding level k.
std::unique_ptr<LevelChain> build_chain(const Problem& p, int level,
                                        const std::vector<std::size_t>& rates, std::uint64_t seed) {
  if (level == 0) {
    return std::make_unique<RandomWalkChain>(p, level0_start(p, seed),
                                             derive_seed(seed, 0, 1, StreamPurpose::Baseline));
  }
  auto coarse = build_chain(p, level - 1, rates, seed);
  return std::make_unique<SubsampledChain>(p, level, std::move(coarse),
                                           rates[static_cast<std::size_t>(level)],
                                           derive_seed(seed, level, 1, StreamPurpose::Baseline));
}

}  // namespace

std::size_t subsampling_rate(double iact_value) {
  if (!std::isfinite(iact_value)) return 5;
  const double t = std::min(std::ceil(iact_value), 5.0);
  return static_cast<std::size_t>(std::max(1.0, t));
}

BaselineResult subsampling_baseline(const Problem& problem, std::span<const std::size_t> samples,
                                    const BaselineOptions& opts) {
  if (samples.empty()) throw std::domain_error("subsampling_baseline: no levels requested");
  const int top = static_cast<int>(samples.size()) - 1;
  if (top > problem.hierarchy.max_level()) {
    throw std::out_of_range("subsampling_baseline: level beyond hierarchy max");
  }
  if (opts.pilot_steps < 100) throw std::domain_error("subsampling_baseline: pilot too short");

  // Rates from pilot runs of each coarse chain, bottom up.
  std::vector<std::size_t> rates(samples.size(), 1);
  std::vector<double> iacts(samples.size(), 1.0);
  for (int l = 1; l <= top; ++l) {
    const std::uint64_t pilot_seed = derive_seed(opts.master_seed, l, opts.replica + 1000003,
                                                 StreamPurpose::Baseline);
    auto pilot = build_chain(problem, l - 1, rates, pilot_seed);
    const std::size_t burn = default_burnin(opts.pilot_steps);
    for (std::size_t k = 0; k < burn; ++k) pilot->step();
    std::vector<double> q(opts.pilot_steps);
    for (double& v : q) v = pilot->step().eval.qoi;
    iacts[static_cast<std::size_t>(l)] = iact(q, default_max_lag(q.size()));
    rates[static_cast<std::size_t>(l)] = subsampling_rate(iacts[static_cast<std::size_t>(l)]);
  }

  BaselineResult out;
  for (int l = 0; l <= top; ++l) {
    const std::size_t n = samples[static_cast<std::size_t>(l)];
    if (n < 1) throw std::domain_error("subsampling_baseline: need at least one sample per level");
    const std::size_t burn = opts.burnin ? *opts.burnin : default_burnin(n);
    const std::uint64_t seed = derive_seed(opts.master_seed, l, opts.replica, StreamPurpose::Baseline);
    auto chain = build_chain(problem, l, rates, seed);
    auto* sub = dynamic_cast<SubsampledChain*>(chain.get());

    BaselineLevel bl;
    bl.rate = rates[static_cast<std::size_t>(l)];
    bl.coarse_iact = iacts[static_cast<std::size_t>(l)];
    ChainRun& run = bl.run;
    run.level = l;
    run.seed = seed;
    run.burnin = burn;
    for (std::size_t step = 0; step < n + burn; ++step) {
      const Draw& d = chain->step();
      if (step < burn) continue;
      run.qoi_fine.push_back(d.eval.qoi);
      const bool acc = chain->last_accepted();
      if (acc) ++run.accepted;
      run.outcomes.push_back(acc ? OutcomeKind::BothAccepted : OutcomeKind::BothRejected);
      if (sub != nullptr) {
        const Draw& c = sub->coarse_proposal();
        run.qoi_coarse.push_back(c.eval.qoi);
        run.synchronized.push_back(same_bits(c.theta, d.theta) ? 1 : 0);
      }
    }
    run.final_fine = chain->current().theta;
    run.work = chain->work();
    out.stats.push_back(level_stats(run, problem.cost_per_sample(l)));
    out.levels.push_back(std::move(bl));
  }
  out.estimate = ml_estimate(out.stats);
  return out;
}

}  // namespace mlmcmc
