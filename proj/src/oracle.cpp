#include "mlmcmc/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

#include "mlmcmc/parallel.hpp"
#include "mlmcmc/rng.hpp"
#include "mlmcmc/stats.hpp"

namespace mlmcmc::oracle {

namespace {

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) throw std::domain_error("oracle: density vanishes on the whole grid");
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - hi);
  return hi + std::log(stats::pairwise_sum(e));
}

// Normalized probabilities and their logs of exp(logf) at the points xs.
void discretize(const std::function<double(double)>& logf, std::span<const double> xs,
                std::vector<double>& prob, std::vector<double>& logp) {
  logp.resize(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) logp[k] = logf(xs[k]);
  const double z = log_sum_exp(logp);
  prob.resize(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    logp[k] -= z;
    prob[k] = std::exp(logp[k]);
  }
}

std::vector<double> uniform_points(double a, double b, std::size_t m) {
  std::vector<double> xs(m);
  const double h = (b - a) / static_cast<double>(m);
  for (std::size_t k = 0; k < m; ++k) xs[k] = a + (static_cast<double>(k) + 0.5) * h;
  return xs;
}

std::vector<double> left_apply(const SparseKernel& P, std::span<const double> mu) {
  const Eigen::Map<const Eigen::VectorXd> m(mu.data(), static_cast<Eigen::Index>(mu.size()));
  const Eigen::VectorXd out = P.transpose() * m;
  return {out.data(), out.data() + out.size()};
}

double l1_distance(std::span<const double> p, std::span<const double> q) {
  std::vector<double> d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) d[i] = std::abs(p[i] - q[i]);
  return stats::pairwise_sum(d);
}

// Largest eigenvalue of a symmetric operator on the complement of `null`
// (unit vector), by Lanczos with full reorthogonalization.
double lanczos_max(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                   const Eigen::VectorXd& null, std::uint64_t seed, int max_steps = 300) {
  const Eigen::Index m = null.size();
  const Eigen::Index dim = std::min<Eigen::Index>(m - 1, max_steps);
  if (dim <= 0) return 0.0;
  auto deflate = [&](Eigen::VectorXd& v) { v -= null.dot(v) * null; };

  Rng rng(seed);
  Eigen::VectorXd v(m);
  for (Eigen::Index i = 0; i < m; ++i) v[i] = rng.normal();
  deflate(v);
  v.normalize();

  std::vector<Eigen::VectorXd> basis{v};
  std::vector<double> alpha, beta;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    Eigen::VectorXd w = op(basis.back());
    deflate(w);
    alpha.push_back(w.dot(basis.back()));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) w -= b.dot(w) * b;
      deflate(w);
    }
    const double b_next = w.norm();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    const auto k = static_cast<Eigen::Index>(alpha.size());
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), k);
    Eigen::VectorXd sub = k > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), k - 1))
                                : Eigen::VectorXd(0);
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    theta = es.eigenvalues()[k - 1];
    const double residual = b_next * std::abs(es.eigenvectors()(k - 1, k - 1));
    if (residual < 1e-11 * std::max(1.0, std::abs(theta)) || b_next < 1e-13) break;
    beta.push_back(b_next);
    basis.push_back(w / b_next);
  }
  return theta;
}

}  // namespace

GridDensities densities_for(const Problem& problem, int level) {
  if (level < 1 || level > problem.hierarchy.max_level()) {
    throw std::out_of_range("oracle: level must be in [1, L_max]");
  }
  if (problem.adaptive_proposals) {
    throw std::invalid_argument("oracle: adaptive proposals are not supported");
  }
  Rng probe(0);
  if (problem.hierarchy.sample_reference(probe).dim() != 1) {
    throw std::invalid_argument("oracle: only 1-D problems are supported");
  }
  const IndependentProposal q = problem.level_proposal(level, {});
  const Hierarchy* h = &problem.hierarchy;
  GridDensities d;
  d.log_coarse = [h, level](double x) { return h->target(level - 1).evaluate(Point{x}).log_weight; };
  d.log_fine = [h, level](double x) { return h->target(level).evaluate(Point{x}).log_weight; };
  d.log_proposal = [q](double x) { return q.log_density(Point{x}); };
  return d;
}

GridSpec auto_grid(const GridDensities& d, int n) {
  const std::vector<double> xs = uniform_points(-200.0, 200.0, 400000);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* f : {&d.log_coarse, &d.log_fine, &d.log_proposal}) {
    std::vector<double> p, logp;
    discretize(*f, xs, p, logp);
    std::vector<double> m1(xs.size()), m2(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) m1[k] = p[k] * xs[k];
    const double mean = stats::pairwise_sum(m1);
    for (std::size_t k = 0; k < xs.size(); ++k) m2[k] = p[k] * (xs[k] - mean) * (xs[k] - mean);
    const double sd = std::sqrt(stats::pairwise_sum(m2));
    lo = std::min(lo, mean - 6.5 * sd);
    hi = std::max(hi, mean + 6.5 * sd);
  }
  return {lo, hi, n};
}

double mass_outside(const std::function<double(double)>& log_density, const GridSpec& grid) {
  const double width = grid.b - grid.a;
  const std::vector<double> xs = uniform_points(grid.a - 20.0 * width, grid.b + 20.0 * width, 410000);
  std::vector<double> p, logp;
  discretize(log_density, xs, p, logp);
  std::vector<double> out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k] < grid.a || xs[k] > grid.b) out.push_back(p[k]);
  }
  return stats::pairwise_sum(out);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: size mismatch");
  return 0.5 * l1_distance(p, q);
}

int stationary_distribution(const SparseKernel& P, std::vector<double>& nu, double tol,
                            int max_iterations) {
  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<double> next = left_apply(P, nu);
    const double change = l1_distance(next, nu);
    nu = std::move(next);
    if (change < tol) {
      const double total = stats::pairwise_sum(nu);
      for (double& v : nu) v /= total;
      return it;
    }
  }
  throw std::runtime_error("stationary_distribution: power iteration did not converge");
}

std::vector<double> diagonal_start(const GridKernel& k) {
  std::vector<double> nu0(k.states(), 0.0);
  for (int i = 0; i < k.n(); ++i) nu0[k.state(i, i)] = k.proposal[static_cast<std::size_t>(i)];
  return nu0;
}

GridKernel build_grid_kernel(const GridDensities& d, const GridSpec& grid) {
  if (grid.n < 2 || grid.n > 128) throw std::domain_error("build_grid_kernel: n must be in [2, 128]");
  if (!(grid.b > grid.a)) throw std::domain_error("build_grid_kernel: empty interval");
  const char* names[] = {"coarse target", "fine target", "proposal"};
  const std::function<double(double)>* fs[] = {&d.log_coarse, &d.log_fine, &d.log_proposal};
  for (int c = 0; c < 3; ++c) {
    const double out = mass_outside(*fs[c], grid);
    if (out > 1e-6) {
      throw std::domain_error(std::string("build_grid_kernel: grid too coarse, ") + names[c] +
                              " has mass " + std::to_string(out) + " outside [" +
                              std::to_string(grid.a) + ", " + std::to_string(grid.b) + "]");
    }
  }

  GridKernel k;
  k.grid = grid;
  const int n = grid.n;
  for (int i = 0; i < n; ++i) k.x.push_back(grid.point(i));
  discretize(d.log_coarse, k.x, k.coarse, k.log_coarse);
  discretize(d.log_fine, k.x, k.fine, k.log_fine);
  discretize(d.log_proposal, k.x, k.proposal, k.log_proposal);

  auto alpha = [&](const std::vector<double>& lt, int from, int to) {
    const auto f = static_cast<std::size_t>(from);
    const auto t = static_cast<std::size_t>(to);
    const double log_ratio = lt[t] - lt[f] + k.log_proposal[f] - k.log_proposal[t];
    return std::exp(std::min(0.0, log_ratio));
  };
  k.alpha_coarse.resize(n, n);
  k.alpha_fine.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < n; ++t) {
      k.alpha_coarse(i, t) = alpha(k.log_coarse, i, t);
      k.alpha_fine(i, t) = alpha(k.log_fine, i, t);
    }
  }

  const auto states = static_cast<std::size_t>(n) * n;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(states * (2 * static_cast<std::size_t>(n) + 1));
  std::vector<double> moved(static_cast<std::size_t>(n) * 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto row = static_cast<Eigen::Index>(k.state(i, j));
      moved.clear();
      for (int t = 0; t < n; ++t) {
        const double w = k.proposal[static_cast<std::size_t>(t)];
        const double ac = k.alpha_coarse(i, t);
        const double af = k.alpha_fine(j, t);
        const double both = std::min(ac, af) * w;
        trip.emplace_back(row, static_cast<Eigen::Index>(k.state(t, t)), both);
        moved.push_back(both);
        if (ac > af) {
          trip.emplace_back(row, static_cast<Eigen::Index>(k.state(t, j)), (ac - af) * w);
          moved.push_back((ac - af) * w);
        } else if (af > ac) {
          trip.emplace_back(row, static_cast<Eigen::Index>(k.state(i, t)), (af - ac) * w);
          moved.push_back((af - ac) * w);
        }
      }
      trip.emplace_back(row, row, 1.0 - stats::pairwise_sum(moved));
    }
  }
  k.P.resize(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  k.P.setFromTriplets(trip.begin(), trip.end());
  k.P.prune(0.0);

  // Every state reaches the diagonal (the both-accept move has positive
  // probability), so the states reachable from it form the closed class.
  k.support.assign(states, 0);
  std::deque<std::size_t> queue;
  for (int i = 0; i < n; ++i) {
    k.support[k.state(i, i)] = 1;
    queue.push_back(k.state(i, i));
  }
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    for (SparseKernel::InnerIterator it(k.P, static_cast<Eigen::Index>(s)); it; ++it) {
      const auto c = static_cast<std::size_t>(it.col());
      if (it.value() > 0.0 && !k.support[c]) {
        k.support[c] = 1;
        queue.push_back(c);
      }
    }
  }

  k.nu = diagonal_start(k);
  k.power_iterations = stationary_distribution(k.P, k.nu);
  k.stationarity_residual = l1_distance(left_apply(k.P, k.nu), k.nu);
  return k;
}

std::vector<double> coarse_marginal(const GridKernel& k, std::span<const double> pair_dist) {
  std::vector<double> m(static_cast<std::size_t>(k.n()), 0.0);
  for (int i = 0; i < k.n(); ++i) {
    m[static_cast<std::size_t>(i)] = stats::pairwise_sum(pair_dist.subspan(k.state(i, 0), k.n()));
  }
  return m;
}

std::vector<double> fine_marginal(const GridKernel& k, std::span<const double> pair_dist) {
  std::vector<double> m(static_cast<std::size_t>(k.n()), 0.0);
  std::vector<double> col(static_cast<std::size_t>(k.n()));
  for (int j = 0; j < k.n(); ++j) {
    for (int i = 0; i < k.n(); ++i) col[static_cast<std::size_t>(i)] = pair_dist[k.state(i, j)];
    m[static_cast<std::size_t>(j)] = stats::pairwise_sum(col);
  }
  return m;
}

double offdiagonal_mass(const GridKernel& k) {
  std::vector<double> off;
  for (int i = 0; i < k.n(); ++i) {
    for (int j = 0; j < k.n(); ++j) {
      if (i != j) off.push_back(k.nu[k.state(i, j)]);
    }
  }
  return stats::pairwise_sum(off);
}

double max_desync_probability(const GridKernel& k) {
  double worst = 0.0;
  for (int i = 0; i < k.n(); ++i) {
    double leave = 0.0;
    for (SparseKernel::InnerIterator it(k.P, static_cast<Eigen::Index>(k.state(i, i))); it; ++it) {
      const auto c = static_cast<std::size_t>(it.col());
      if (c / static_cast<std::size_t>(k.n()) != c % static_cast<std::size_t>(k.n())) leave += it.value();
    }
    worst = std::max(worst, leave);
  }
  return worst;
}

Marginals marginalize(const GridKernel& k) {
  const int n = k.n();
  Marginals m;
  m.coarse = Eigen::MatrixXd::Zero(n, n);
  m.fine = Eigen::MatrixXd::Zero(n, n);
  auto row_marginals = [&](int i, int j, Eigen::VectorXd& to_coarse, Eigen::VectorXd& to_fine) {
    to_coarse.setZero(n);
    to_fine.setZero(n);
    for (SparseKernel::InnerIterator it(k.P, static_cast<Eigen::Index>(k.state(i, j))); it; ++it) {
      const auto c = static_cast<Eigen::Index>(it.col());
      to_coarse[c / n] += it.value();
      to_fine[c % n] += it.value();
    }
  };
  Eigen::VectorXd rc, rf;
  for (int i = 0; i < n; ++i) {
    row_marginals(i, i, rc, rf);
    m.coarse.row(i) = rc.transpose();
    m.fine.row(i) = rf.transpose();
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      row_marginals(i, j, rc, rf);
      m.spread_coarse = std::max(m.spread_coarse, (rc.transpose() - m.coarse.row(i)).cwiseAbs().maxCoeff());
      m.spread_fine = std::max(m.spread_fine, (rf.transpose() - m.fine.row(j)).cwiseAbs().maxCoeff());
    }
  }
  return m;
}

Eigen::MatrixXd imh_matrix(std::span<const double> target, std::span<const double> proposal) {
  if (target.size() != proposal.size()) throw std::invalid_argument("imh_matrix: size mismatch");
  const auto n = static_cast<Eigen::Index>(target.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a == i) continue;
      const double num = target[a] * proposal[i];
      const double den = target[i] * proposal[a];
      const double acc = num >= den ? 1.0 : num / den;
      M(i, a) = proposal[a] * acc;
      off += M(i, a);
    }
    M(i, i) = 1.0 - off;
  }
  return M;
}

std::vector<double> stationary_vector(const Eigen::MatrixXd& P, double tol, int max_iterations) {
  const Eigen::Index n = P.rows();
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::RowVectorXd next = v * P;
    const double change = (next - v).cwiseAbs().sum();
    v = next;
    if (change < tol) {
      v /= v.sum();
      return {v.data(), v.data() + n};
    }
  }
  throw std::runtime_error("stationary_vector: power iteration did not converge");
}

std::vector<double> apply(const SparseKernel& P, std::span<const double> f) {
  const Eigen::Map<const Eigen::VectorXd> v(f.data(), static_cast<Eigen::Index>(f.size()));
  const Eigen::VectorXd out = P * v;
  return {out.data(), out.data() + out.size()};
}

std::vector<double> apply_adjoint(const SparseKernel& P, std::span<const double> nu,
                                  std::span<const double> f) {
  std::vector<double> weighted(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) weighted[i] = nu[i] * f[i];
  std::vector<double> out = left_apply(P, weighted);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = nu[i] > 0.0 ? out[i] / nu[i] : 0.0;
  return out;
}

GapResult pseudo_spectral_gap(const SparseKernel& P, std::span<const double> nu, int k_max) {
  if (k_max < 1) throw std::domain_error("pseudo_spectral_gap: K_max must be >= 1");
  if (static_cast<std::size_t>(P.rows()) != nu.size() || P.rows() != P.cols()) {
    throw std::invalid_argument("pseudo_spectral_gap: size mismatch");
  }
  const auto m = static_cast<Eigen::Index>(nu.size());
  Eigen::VectorXd sqrt_nu(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(nu[static_cast<std::size_t>(i)] > 0.0)) {
      throw std::domain_error("pseudo_spectral_gap: stationary vector has a zero entry at state " +
                              std::to_string(i));
    }
    sqrt_nu[i] = std::sqrt(nu[static_cast<std::size_t>(i)]);
  }
  const Eigen::VectorXd nu_v = sqrt_nu.cwiseProduct(sqrt_nu);
  const Eigen::VectorXd null = sqrt_nu / sqrt_nu.norm();
  const SparseKernel Pt = P.transpose();

  GapResult r;
  r.gamma_ps = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    // D^{1/2} (P*)^k P^k D^{-1/2}, symmetric in the Euclidean inner product.
    auto op = [&](const Eigen::VectorXd& g) {
      Eigen::VectorXd f = g.cwiseQuotient(sqrt_nu);
      for (int t = 0; t < k; ++t) f = P * f;
      for (int t = 0; t < k; ++t) f = (Pt * nu_v.cwiseProduct(f)).cwiseQuotient(nu_v);
      return Eigen::VectorXd(f.cwiseProduct(sqrt_nu));
    };
    const double lam = lanczos_max(op, null, derive_seed(0, k, 0, StreamPurpose::Oracle));
    const double gap = (1.0 - lam) / k;
    r.per_k.push_back(gap);
    if (gap > r.gamma_ps) {
      r.gamma_ps = gap;
      r.argmax_k = k;
    }
  }
  return r;
}

GapResult pseudo_spectral_gap(const Eigen::MatrixXd& P, std::span<const double> nu, int k_max) {
  const SparseKernel sp = P.sparseView();
  return pseudo_spectral_gap(sp, nu, k_max);
}

GapResult pseudo_spectral_gap(const GridKernel& k, int k_max) {
  std::vector<Eigen::Index> index(k.states(), -1);
  std::vector<double> nu_sub;
  for (std::size_t s = 0; s < k.states(); ++s) {
    if (k.support[s]) {
      index[s] = static_cast<Eigen::Index>(nu_sub.size());
      nu_sub.push_back(k.nu[s]);
    }
  }
  const double total = stats::pairwise_sum(nu_sub);
  for (double& v : nu_sub) v /= total;
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t s = 0; s < k.states(); ++s) {
    if (!k.support[s]) continue;
    for (SparseKernel::InnerIterator it(k.P, static_cast<Eigen::Index>(s)); it; ++it) {
      const Eigen::Index c = index[static_cast<std::size_t>(it.col())];
      if (c < 0) throw std::logic_error("pseudo_spectral_gap: support is not closed");
      trip.emplace_back(index[s], c, it.value());
    }
  }
  const auto m = static_cast<Eigen::Index>(nu_sub.size());
  SparseKernel sub(m, m);
  sub.setFromTriplets(trip.begin(), trip.end());
  return pseudo_spectral_gap(sub, nu_sub, k_max);
}

double mse_bound(double gamma_ps, double density_ratio_sup, double var_f, std::size_t n) {
  if (!(gamma_ps > 0.0)) throw std::domain_error("mse_bound: gamma_ps must be positive");
  if (density_ratio_sup < 0.0) throw std::domain_error("mse_bound: density ratio sup must be >= 0");
  if (n < 1) throw std::domain_error("mse_bound: N must be >= 1");
  return (1.0 + 4.0 / gamma_ps) * (1.0 + 2.0 * density_ratio_sup) * var_f / static_cast<double>(n);
}

double density_ratio_sup(const GridKernel& k, std::span<const double> nu0) {
  double sup = 0.0;
  for (std::size_t s = 0; s < k.states(); ++s) {
    if (!k.support[s]) {
      if (nu0[s] > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    sup = std::max(sup, std::abs(nu0[s] / k.nu[s] - 1.0));
  }
  return sup;
}

TvResult tv_convergence(const SparseKernel& P, std::span<const double> nu, std::span<const double> nu0,
                        int steps, double floor) {
  TvResult r;
  std::vector<double> mu(nu0.begin(), nu0.end());
  r.tv.push_back(total_variation(mu, nu));
  for (int t = 1; t <= steps; ++t) {
    mu = left_apply(P, mu);
    r.tv.push_back(total_variation(mu, nu));
  }
  std::vector<double> ts, logs;
  for (int t = 1; t <= steps && r.tv[static_cast<std::size_t>(t)] > floor; ++t) {
    ts.push_back(t);
    logs.push_back(std::log(r.tv[static_cast<std::size_t>(t)]));
  }
  if (ts.size() >= 3) {
    const stats::LinearFit fit = stats::least_squares(ts, logs);
    r.rate = std::exp(fit.slope);
    r.r_squared = fit.r_squared;
    r.fit_first = static_cast<int>(ts.front());
    r.fit_last = static_cast<int>(ts.back());
  }
  return r;
}

MseCheck empirical_mse_check(const GridKernel& k, double gamma_ps, std::size_t n, std::size_t replicas,
                             std::uint64_t seed, const std::function<double(double, double)>& f,
                             std::size_t threads) {
  if (replicas < 1) throw std::domain_error("empirical_mse_check: need at least one replica");
  MseCheck c;
  c.n = n;
  c.replicas = replicas;
  c.gamma_ps = gamma_ps;
  const int g = k.n();
  std::vector<double> fv(k.states());
  std::vector<double> weighted(k.states());
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const std::size_t s = k.state(i, j);
      fv[s] = f(k.x[static_cast<std::size_t>(i)], k.x[static_cast<std::size_t>(j)]);
      weighted[s] = k.nu[s] * fv[s];
    }
  }
  c.exact_mean = stats::pairwise_sum(weighted);
  for (std::size_t s = 0; s < k.states(); ++s) {
    weighted[s] = k.nu[s] * (fv[s] - c.exact_mean) * (fv[s] - c.exact_mean);
  }
  c.variance = stats::pairwise_sum(weighted);
  c.ratio_sup = density_ratio_sup(k, diagonal_start(k));
  c.bound = mse_bound(gamma_ps, c.ratio_sup, c.variance, n);

  std::vector<double> cdf(k.proposal.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < cdf.size(); ++t) cdf[t] = acc += k.proposal[t];
  auto draw = [&](Rng& rng) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), g - 1));
  };

  std::vector<double> sq(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, 0, r, StreamPurpose::Oracle));
    int i = draw(rng);
    int j = i;
    std::vector<double> vals(n);
    for (std::size_t step = 0; step < n; ++step) {
      const int t = draw(rng);
      const double u = rng.uniform();
      if (u <= k.alpha_coarse(i, t)) i = t;
      if (u <= k.alpha_fine(j, t)) j = t;
      vals[step] = fv[k.state(i, j)];
    }
    const double err = stats::mean(vals) - c.exact_mean;
    sq[r] = err * err;
  });
  c.empirical = stats::mean(sq);
  c.pass = c.empirical <= c.bound;
  return c;
}

OracleReport run_oracle(const Problem& problem, int level, const OracleOptions& opts) {
  const GridDensities d = densities_for(problem, level);
  OracleReport r;
  r.level = level;
  r.grid = opts.grid ? *opts.grid : auto_grid(d, opts.grid_n);
  r.grid_n = r.grid.n;
  const GridKernel k = build_grid_kernel(d, r.grid);

  Eigen::VectorXd sums = k.P * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k.states()));
  r.row_sum_error = (sums.array() - 1.0).abs().maxCoeff();
  r.stationarity_residual = k.stationarity_residual;
  r.marginal_tv = std::max(total_variation(coarse_marginal(k, k.nu), k.coarse),
                           total_variation(fine_marginal(k, k.nu), k.fine));
  const Marginals m = marginalize(k);
  r.marginal_spread = std::max(m.spread_coarse, m.spread_fine);
  r.imh_match = std::max((m.coarse - imh_matrix(k.coarse, k.proposal)).cwiseAbs().maxCoeff(),
                         (m.fine - imh_matrix(k.fine, k.proposal)).cwiseAbs().maxCoeff());
  r.gap = pseudo_spectral_gap(k, opts.k_max);

  const auto mode = static_cast<int>(std::max_element(k.fine.begin(), k.fine.end()) - k.fine.begin());
  std::vector<double> point_mass(k.states(), 0.0);
  point_mass[k.state(mode, mode)] = 1.0;
  r.tv = tv_convergence(k.P, k.nu, point_mass, opts.tv_steps);
  r.offdiag_mass = offdiagonal_mass(k);
  r.max_desync = max_desync_probability(k);
  if (r.gap.gamma_ps > 0.0) {
    r.mse = empirical_mse_check(k, r.gap.gamma_ps, opts.mse_samples, opts.mse_replicas,
                                derive_seed(opts.seed, level, 0, StreamPurpose::Oracle),
                                [](double xc, double xf) { return xf - xc; }, opts.threads);
  }
  return r;
}

nlohmann::json to_json(const OracleReport& r) {
  return {{"level", r.level},
          {"grid_n", r.grid_n},
          {"grid", {r.grid.a, r.grid.b}},
          {"marginal_tv", r.marginal_tv},
          {"marginal_spread", r.marginal_spread},
          {"imh_match", r.imh_match},
          {"row_sum_error", r.row_sum_error},
          {"stationarity_residual", r.stationarity_residual},
          {"gamma_ps", r.gap.gamma_ps},
          {"argmax_k", r.gap.argmax_k},
          {"gap_per_k", r.gap.per_k},
          {"tv_fit_rate", r.tv.rate},
          {"tv_fit_r_squared", r.tv.r_squared},
          {"tv_fit_range", {r.tv.fit_first, r.tv.fit_last}},
          {"offdiag_mass", r.offdiag_mass},
          {"max_desync_probability", r.max_desync},
          {"mse_empirical", r.mse.empirical},
          {"mse_bound", r.mse.bound},
          {"mse_exact_mean", r.mse.exact_mean},
          {"mse_variance", r.mse.variance},
          {"mse_ratio_sup", r.mse.ratio_sup},
          {"mse_samples", r.mse.n},
          {"mse_replicas", r.mse.replicas},
          {"checks",
           {{"marginal", r.marginal_ok()},
            {"kernel", r.kernel_ok()},
            {"gap", r.gap_ok()},
            {"mse", r.mse_ok()},
            {"tv", r.tv_ok()}}}};
}

}  // namespace mlmcmc::oracle
