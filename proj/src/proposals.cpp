#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mlmcmc/problems.hpp"
#include "mlmcmc/stats.hpp"

namespace mlmcmc {

namespace {

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  std::vector<double> shifted(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) shifted[i] = std::exp(v[i] - hi);
  return hi + std::log(stats::pairwise_sum(shifted));
}

std::vector<Point> thin(std::span<const Point> samples, std::size_t max_points) {
  if (max_points == 0 || samples.size() <= max_points) {
    return {samples.begin(), samples.end()};
  }
  std::vector<Point> out;
  out.reserve(max_points);
  for (std::size_t k = 0; k < max_points; ++k) out.push_back(samples[k * samples.size() / max_points]);
  return out;
}

}  // namespace

double DiagGaussian::log_density(const Point& x) const {
  if (x.dim() != mean.size()) throw std::invalid_argument("DiagGaussian: dimension mismatch");
  double acc = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) acc += gaussian_log_pdf(x[d], mean[d], std[d] * std[d]);
  return acc;
}

Point DiagGaussian::sample(Rng& rng) const {
  std::vector<double> c(mean.size());
  for (std::size_t d = 0; d < c.size(); ++d) c[d] = mean[d] + std[d] * rng.normal();
  return Point(std::move(c));
}

std::vector<double> silverman_bandwidths(std::span<const Point> samples, double floor) {
  if (samples.empty()) throw std::invalid_argument("silverman_bandwidths: no samples");
  const std::size_t dim = samples.front().dim();
  const double n = static_cast<double>(samples.size());
  const double d = static_cast<double>(dim);
  const double factor = std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) * std::pow(n, -1.0 / (d + 4.0));
  std::vector<double> h(dim, floor);
  if (samples.size() < 2) return h;
  std::vector<double> col(samples.size());
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < samples.size(); ++i) col[i] = samples[i][k];
    const double sd = std::sqrt(stats::sample_variance(col));
    h[k] = std::max(floor, factor * sd);
  }
  return h;
}

IndependentProposal kde_mixture_proposal(std::span<const Point> samples, const DiagGaussian& prior,
                                         const KdeOptions& opts) {
  const double w = opts.prior_weight;
  if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("kde_mixture_proposal: weight outside (0, 1]");
  if (w == 1.0) {
    IndependentProposal q;
    const bool rel_prior = opts.reference == Reference::Prior;
    q.log_density = [prior, rel_prior](const Point& x) {
      return rel_prior ? 0.0 : prior.log_density(x);
    };
    q.sampler = [prior](Rng& rng) { return prior.sample(rng); };
    return q;
  }
  if (samples.empty()) throw std::invalid_argument("kde_mixture_proposal: no samples");
  for (const Point& p : samples) {
    if (p.dim() != prior.mean.size()) throw std::invalid_argument("kde_mixture_proposal: dimension mismatch");
    require_finite(p, "kde_mixture_proposal sample");
  }

  struct Kde {
    std::vector<Point> centers;
    std::vector<double> bandwidth;
    DiagGaussian prior;
    double log_w;
    double log_1mw;
    bool rel_prior;
  };
  auto kde = std::make_shared<Kde>();
  kde->centers = thin(samples, opts.max_points);
  kde->bandwidth = silverman_bandwidths(kde->centers, opts.bandwidth_floor);
  kde->prior = prior;
  kde->log_w = std::log(w);
  kde->log_1mw = std::log1p(-w);
  kde->rel_prior = opts.reference == Reference::Prior;

  IndependentProposal q;
  q.log_density = [kde](const Point& x) {
    const std::size_t n = kde->centers.size();
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t d = 0; d < x.dim(); ++d) {
        const double h = kde->bandwidth[d];
        acc += gaussian_log_pdf(x[d], kde->centers[i][d], h * h);
      }
      terms[i] = acc;
    }
    const double log_kde = log_sum_exp(terms) - std::log(static_cast<double>(n));
    const double log_pr = kde->prior.log_density(x);
    const double a = kde->log_w + log_pr;
    const double b = kde->log_1mw + log_kde;
    const double hi = std::max(a, b);
    const double mix = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
    return kde->rel_prior ? mix - log_pr : mix;
  };
  q.sampler = [kde, w](Rng& rng) {
    if (rng.uniform() < w) return kde->prior.sample(rng);
    const std::size_t n = kde->centers.size();
    const auto i = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    Point z = kde->centers[i];
    for (std::size_t d = 0; d < z.dim(); ++d) z[d] += kde->bandwidth[d] * rng.normal();
    return z;
  };
  return q;
}

}  // namespace mlmcmc
