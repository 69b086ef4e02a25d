#include "mlmcmc/sampler.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mlmcmc/parallel.hpp"

namespace mlmcmc {

namespace {

class SampleKeeper {
 public:
  SampleKeeper(std::size_t total, std::size_t wanted)
      : wanted_(wanted), stride_(wanted == 0 ? 0 : std::max<std::size_t>(1, total / wanted)) {}

  void offer(std::size_t step, const Point& theta, std::vector<Point>& out) const {
    if (wanted_ == 0 || out.size() >= wanted_) return;
    if (step % stride_ == 0) out.push_back(theta);
  }

 private:
  std::size_t wanted_;
  std::size_t stride_;
};

void reserve_run(ChainRun& run, const ChainOptions& opts, bool coupled) {
  run.qoi_fine.reserve(opts.samples);
  run.outcomes.reserve(opts.samples);
  if (coupled) {
    run.qoi_coarse.reserve(opts.samples);
    run.synchronized.reserve(opts.samples);
  }
  if (opts.keep_trajectory) {
    run.fine_trajectory.reserve(opts.samples);
    if (coupled) run.coarse_trajectory.reserve(opts.samples);
  }
}

}  // namespace

double ChainRun::acceptance_rate() const {
  if (outcomes.empty()) return 0.0;
  return static_cast<double>(accepted) / static_cast<double>(outcomes.size());
}

std::size_t default_burnin(std::size_t samples) { return std::max<std::size_t>(1000, samples / 10); }

ChainRun run_level0(const LevelTarget& target, const ConditionalProposal& proposal,
                    const Point& start, const ChainOptions& opts) {
  if (opts.samples < 1) throw std::domain_error("run_level0: need at least one sample");
  require_finite(start, "run_level0 start");
  Rng rng(opts.seed);
  ChainRun run;
  run.level = target.level;
  run.seed = opts.seed;
  run.burnin = opts.burnin;
  reserve_run(run, opts, false);
  const SampleKeeper keeper(opts.samples, opts.keep_fine_samples);

  Point theta = start;
  Evaluation current = target.evaluate(theta);
  const std::size_t total = opts.samples + opts.burnin;
  for (std::size_t step = 0; step < total; ++step) {
    SingleStepResult r = single_level_step(target, proposal, theta, current, rng);
    theta = std::move(r.theta);
    current = r.eval;
    if (step < opts.burnin) continue;
    const std::size_t n = step - opts.burnin;
    run.qoi_fine.push_back(current.qoi);
    run.outcomes.push_back(r.accepted ? OutcomeKind::BothAccepted : OutcomeKind::BothRejected);
    if (r.accepted) ++run.accepted;
    if (opts.keep_trajectory) run.fine_trajectory.push_back(theta);
    keeper.offer(n, theta, run.fine_samples);
  }
  run.work = static_cast<double>(total) * target.eval_cost;
  run.final_fine = std::move(theta);
  return run;
}

ChainRun run_coupled(const Hierarchy& h, int level, const IndependentProposal& q,
                     const ChainOptions& opts, const InitSpec& init) {
  if (level < 1) throw std::out_of_range("run_coupled: level must be >= 1");
  if (opts.samples < 1) throw std::domain_error("run_coupled: need at least one sample");
  Rng rng(opts.seed);
  ChainRun run;
  run.level = level;
  run.seed = opts.seed;
  run.burnin = opts.burnin;
  reserve_run(run, opts, true);
  const SampleKeeper keeper(opts.samples, opts.keep_fine_samples);

  Point start;
  if (init.policy == InitPolicy::WarmStart) {
    if (!init.start) throw std::invalid_argument("run_coupled: warm start without a point");
    start = *init.start;
  } else {
    start = q.sampler(rng);
  }
  CoupledState state = make_diagonal_state(h, level, q, start);

  const std::size_t total = opts.samples + opts.burnin;
  for (std::size_t step = 0; step < total; ++step) {
    auto [next, outcome] = coupled_step(h, level, q, state, rng);
    state = std::move(next);
    if (step < opts.burnin) continue;
    const std::size_t n = step - opts.burnin;
    run.qoi_coarse.push_back(state.qoi_coarse);
    run.qoi_fine.push_back(state.qoi_fine);
    run.outcomes.push_back(outcome.kind);
    run.synchronized.push_back(state.synchronized() ? 1 : 0);
    if (outcome.kind == OutcomeKind::BothAccepted || outcome.kind == OutcomeKind::FineOnly) {
      ++run.accepted;
    }
    if (opts.keep_trajectory) {
      run.coarse_trajectory.push_back(state.theta_coarse);
      run.fine_trajectory.push_back(state.theta_fine);
    }
    keeper.offer(n, state.theta_fine, run.fine_samples);
  }
  run.work = static_cast<double>(total) *
             (h.target(level).eval_cost + h.target(level - 1).eval_cost);
  run.final_fine = std::move(state.theta_fine);
  return run;
}

double sync_rate(const ChainRun& run) {
  if (run.level == 0) throw std::domain_error("sync_rate: level-0 run has a single chain");
  if (run.synchronized.empty()) throw std::domain_error("sync_rate: empty run");
  std::size_t count = 0;
  for (auto s : run.synchronized) count += s;
  return static_cast<double>(count) / static_cast<double>(run.synchronized.size());
}

std::vector<double> sync_series(const ChainRun& run, std::size_t window) {
  if (run.level == 0) throw std::domain_error("sync_series: level-0 run has a single chain");
  if (window == 0) throw std::domain_error("sync_series: window must be positive");
  std::vector<double> out;
  for (std::size_t start = 0; start + window <= run.synchronized.size(); start += window) {
    std::size_t count = 0;
    for (std::size_t i = start; i < start + window; ++i) count += run.synchronized[i];
    out.push_back(static_cast<double>(count) / static_cast<double>(window));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const ChainRun& run) {
  if (run.fine_trajectory.size() != run.size()) {
    throw std::invalid_argument("write_trajectory_csv: run was made without keep_trajectory");
  }
  const bool coupled = run.level > 0;
  const std::size_t dim = run.fine_trajectory.empty() ? 0 : run.fine_trajectory.front().dim();
  os << "step";
  if (coupled) {
    for (std::size_t d = 0; d < dim; ++d) os << ",theta_coarse_" << d;
  }
  for (std::size_t d = 0; d < dim; ++d) os << ",theta_fine_" << d;
  os << ",outcome\r\n";
  const auto old_precision = os.precision(17);
  for (std::size_t n = 0; n < run.size(); ++n) {
    os << n;
    if (coupled) {
      for (double c : run.coarse_trajectory[n].coords()) os << ',' << c;
    }
    for (double c : run.fine_trajectory[n].coords()) os << ',' << c;
    os << ',' << to_string(run.outcomes[n]) << "\r\n";
  }
  os.precision(old_precision);
}

MultilevelRun run_multilevel(const Problem& problem, std::span<const std::size_t> samples,
                             const MultilevelOptions& opts) {
  if (samples.empty()) throw std::domain_error("run_multilevel: no levels requested");
  const int top = static_cast<int>(samples.size()) - 1;
  if (top > problem.hierarchy.max_level()) {
    throw std::out_of_range("run_multilevel: requested level " + std::to_string(top) +
                            " beyond hierarchy max " +
                            std::to_string(problem.hierarchy.max_level()));
  }
  const bool sequential = opts.warm_start || problem.adaptive_proposals;
  std::size_t keep = opts.keep_fine_samples;
  if (problem.adaptive_proposals) keep = std::max<std::size_t>(keep, 1000);

  MultilevelRun out;
  out.levels.resize(samples.size());

  auto chain_options = [&](int level) {
    ChainOptions co;
    co.samples = samples[static_cast<std::size_t>(level)];
    co.burnin = opts.burnin ? *opts.burnin : default_burnin(co.samples);
    co.seed = derive_seed(opts.master_seed, level, opts.stream, opts.purpose);
    co.keep_trajectory = opts.keep_trajectory;
    co.keep_fine_samples = keep;
    return co;
  };

  auto run_level = [&](int level) {
    const ChainOptions co = chain_options(level);
    if (level == 0) {
      Rng start_rng(derive_seed(co.seed, 0, 0, StreamPurpose::Chain));
      const Point start = problem.level0_start ? problem.level0_start(start_rng)
                                               : problem.hierarchy.sample_reference(start_rng);
      out.levels[0] = run_level0(problem.hierarchy.target(0), problem.level0_proposal, start, co);
      return;
    }
    std::span<const Point> pool;
    const auto idx = static_cast<std::size_t>(level - 1);
    if (idx < opts.proposal_pool.size() && !opts.proposal_pool[idx].empty()) {
      pool = opts.proposal_pool[idx];
    } else if (problem.adaptive_proposals) {
      pool = out.levels[idx].fine_samples;
    }
    const IndependentProposal q = problem.level_proposal(level, pool);
    InitSpec init = InitSpec::diagonal();
    if (opts.warm_start) init = InitSpec::warm(out.levels[idx].final_fine);
    out.levels[static_cast<std::size_t>(level)] = run_coupled(problem.hierarchy, level, q, co, init);
  };

  if (sequential) {
    for (int l = 0; l <= top; ++l) run_level(l);
  } else {
    parallel_for(samples.size(), opts.threads,
                 [&](std::size_t l) { run_level(static_cast<int>(l)); });
  }
  return out;
}

}  // namespace mlmcmc
