#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mlmcmc/problems.hpp"

namespace mlmcmc {

double gaussian_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

GaussianSpec nested_gaussian_spec() {
  GaussianSpec g;
  g.mean = [](int) { return 1.0; };
  g.var = [](int l) { return 1.0 + std::ldexp(1.0, -l); };
  g.proposal_mean = 1.0;
  g.proposal_var = 3.0;
  g.rwm_std = 1.0;
  return g;
}

GaussianSpec shifting_gaussian_spec() {
  GaussianSpec g;
  g.mean = [](int l) { return std::ldexp(1.0, 2 - l); };
  g.var = [](int) { return 1.0; };
  g.proposal_mean = 2.0;
  g.proposal_var = 3.0;
  g.rwm_std = 1.0;
  return g;
}

IndependentProposal gaussian_proposal(double mean, double var) {
  if (!(var > 0.0)) throw std::invalid_argument("gaussian_proposal: variance must be positive");
  const double sd = std::sqrt(var);
  IndependentProposal q;
  q.log_density = [mean, var](const Point& x) { return gaussian_log_pdf(x[0], mean, var); };
  q.sampler = [mean, sd](Rng& rng) { return Point{mean + sd * rng.normal()}; };
  return q;
}

ConditionalProposal random_walk_proposal(double step) {
  if (!(step > 0.0)) throw std::invalid_argument("random_walk_proposal: step must be positive");
  ConditionalProposal q;
  q.symmetric = true;
  const double var = step * step;
  q.log_density = [var](const Point& from, const Point& to) {
    double acc = 0.0;
    for (std::size_t d = 0; d < from.dim(); ++d) acc += gaussian_log_pdf(to[d], from[d], var);
    return acc;
  };
  q.sampler = [step](const Point& from, Rng& rng) {
    Point z = from;
    for (std::size_t d = 0; d < z.dim(); ++d) z[d] += step * rng.normal();
    return z;
  };
  return q;
}

ConditionalProposal random_walk_proposal(double step, DiagGaussian prior) {
  ConditionalProposal q = random_walk_proposal(step);
  q.symmetric = false;
  q.log_density = [var = step * step, prior = std::move(prior)](const Point& from,
                                                               const Point& to) {
    double acc = 0.0;
    for (std::size_t d = 0; d < from.dim(); ++d) acc += gaussian_log_pdf(to[d], from[d], var);
    return acc - prior.log_density(to);
  };
  return q;
}

Problem gaussian_problem(const std::string& name, const GaussianSpec& spec, int l_max) {
  if (l_max < 1) throw std::invalid_argument("gaussian_problem: L_max must be >= 1");
  if (!(spec.proposal_var > 0.0)) throw std::invalid_argument("gaussian_problem: proposal_var <= 0");
  std::vector<LevelTarget> targets;
  for (int l = 0; l <= l_max; ++l) {
    const double m = spec.mean(l);
    const double v = spec.var(l);
    if (!(v > 0.0)) throw std::invalid_argument("gaussian_problem: level variance must be positive");
    LevelTarget t;
    t.level = l;
    t.eval_cost = std::ldexp(1.0, l);
    t.evaluate = [m, v](const Point& x) {
      const double d = x[0] - m;
      return Evaluation{-0.5 * d * d / v, x[0]};
    };
    targets.push_back(std::move(t));
  }
  const double pm = spec.proposal_mean;
  const double psd = std::sqrt(spec.proposal_var);
  Hierarchy h(std::move(targets), 2, [pm, psd](Rng& rng) { return Point{pm + psd * rng.normal()}; });

  Problem p{.name = name,
            .hierarchy = std::move(h),
            .level0_proposal = random_walk_proposal(spec.rwm_std),
            .level_proposal = {},
            .adaptive_proposals = false,
            .level0_start = {},
            .exact_level_mean = {},
            .exact_limit = std::nullopt};
  const IndependentProposal q = gaussian_proposal(spec.proposal_mean, spec.proposal_var);
  p.level_proposal = [q](int, std::span<const Point>) { return q; };
  p.exact_level_mean = [mean = spec.mean](int l) -> std::optional<double> { return mean(l); };
  return p;
}

Problem nested_gaussians(int l_max) {
  Problem p = gaussian_problem("nested", nested_gaussian_spec(), l_max);
  p.exact_limit = 1.0;
  return p;
}

Problem shifting_gaussians(int l_max) {
  Problem p = gaussian_problem("shifting", shifting_gaussian_spec(), l_max);
  p.exact_limit = 0.0;
  return p;
}

}  // namespace mlmcmc
