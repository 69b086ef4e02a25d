#pragma once

// Built-in benchmark problems, the KDE-mixture proposal, the Darcy forward
// solver, and the sub-sampling comparison sampler.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "mlmcmc/estimator.hpp"
#include "mlmcmc/model.hpp"
#include "mlmcmc/sampler.hpp"

namespace mlmcmc {

// ---------------------------------------------------------------------------
// 1-D Gaussian hierarchies

struct GaussianSpec {
  std::function<double(int)> mean;
  std::function<double(int)> var;
  double proposal_mean = 0.0;
  double proposal_var = 1.0;
  /// Level-0 random-walk step (standard deviation).
  double rwm_std = 1.0;
};

/// Posteriors N(1, 1 + 2^-l), proposal N(1, 3), level-0 RWM N(theta, 1).
GaussianSpec nested_gaussian_spec();
/// Posteriors N(2^{-l+2}, 1), proposal N(2, 3), level-0 RWM N(theta, 1).
GaussianSpec shifting_gaussian_spec();

/// Lebesgue-reference hierarchy with identity QoI and eval_cost 2^l.
Problem gaussian_problem(const std::string& name, const GaussianSpec& spec, int l_max);
Problem nested_gaussians(int l_max);
Problem shifting_gaussians(int l_max);

/// Log-density of N(mean, var) at x.
double gaussian_log_pdf(double x, double mean, double var);

// ---------------------------------------------------------------------------
// Proposals

/// Independent product Gaussian N(mean, diag(std^2)).
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> std;

  double log_density(const Point& x) const;
  Point sample(Rng& rng) const;
};

IndependentProposal gaussian_proposal(double mean, double var);

/// Symmetric random walk N(theta, step^2 I) with a Lebesgue reference.
ConditionalProposal random_walk_proposal(double step);

/// Random walk N(theta, step^2 I) whose density is expressed relative to the
/// prior reference measure: log N(to; from, step^2) - log prior(to).
ConditionalProposal random_walk_proposal(double step, DiagGaussian prior);

enum class Reference { Lebesgue, Prior };

struct KdeOptions {
  /// Weight of the prior component, in (0, 1].
  double prior_weight = 0.1;
  /// Per-coordinate bandwidth floor.
  double bandwidth_floor = 1e-3;
  /// Measure the returned log-density is relative to.
  Reference reference = Reference::Lebesgue;
  /// Samples beyond this are thinned evenly.
  std::size_t max_points = 1000;
};

/// w * prior + (1 - w) * Gaussian KDE of `samples` with Silverman's rule per
/// coordinate (floored). Needs at least one sample unless w == 1; with a
/// single sample every bandwidth is the floor.
IndependentProposal kde_mixture_proposal(std::span<const Point> samples, const DiagGaussian& prior,
                                         const KdeOptions& opts = {});

/// Silverman bandwidths, one per coordinate, floored.
std::vector<double> silverman_bandwidths(std::span<const Point> samples, double floor);

// ---------------------------------------------------------------------------
// Darcy flow

struct DarcySolution {
  int cells = 0;
  /// Cell-centered pressure, row-major with x1 fastest: u[j * cells + i].
  std::vector<double> u;
  std::vector<double> observations;
  double qoi = 0.0;
  int cg_iterations = 0;
};

/// -div(kappa grad u) = 1 on (0,1)^2, u = 0 on x1 in {0,1}, zero flux on
/// x2 in {0,1}; kappa = exp(t1 cos(pi x1) + t2/2 sin(pi x1) + t3/3 cos(2 pi x1)
/// + t4/4 sin(2 pi x1)). Cell-centered finite volumes with harmonic-mean face
/// permeabilities on cells x cells, observations by bilinear interpolation
/// at the 9x9 interior grid {k/10}, QoI by the midpoint rule.
///
/// The 5-point system is solved matrix-free by preconditioned CG (relative
/// residual 1e-10, at most 1e5 iterations). The preconditioner diagonalizes
/// the x2 Neumann Laplacian with a cosine basis and solves one tridiagonal
/// system per mode; it is exact when kappa depends on x1 alone.
class DarcySolver {
 public:
  static constexpr int kBaseCells = 16;
  static constexpr int kMaxLevel = 4;
  static constexpr int kObsPerSide = 9;

  explicit DarcySolver(int level);

  int level() const { return level_; }
  int cells() const { return cells_; }

  DarcySolution solve(const Point& theta) const;
  /// Same, with a caller-provided permeability function of x1.
  DarcySolution solve_with(const std::function<double(double)>& kappa) const;

  static double permeability(const Point& theta, double x1);
  /// Observation locations (x1, x2), 81 of them, x1 fastest.
  static std::vector<std::array<double, 2>> observation_points();
  /// Bilinear weights of observation `k` on this grid: (cell index, weight).
  std::vector<std::pair<int, double>> observation_stencil(std::size_t k) const;

 private:
  struct Basis;

  int level_;
  int cells_;
  std::shared_ptr<const Basis> basis_;
};

struct DarcySpec {
  int l_max = 3;
  double noise_std = 0.004;
  double rwm_std = 0.05;
  double kde_prior_weight = 0.1;
  /// Cost model exponent: eval_cost = 2^{gamma l}.
  double cost_gamma = 1.0;
  std::array<double, 4> theta_true{0.8, -0.6, 0.4, -0.2};
  std::uint64_t data_seed = 20240611;
  /// Level at which synthetic data are generated (one above the finest used).
  int data_level() const { return std::min(l_max + 1, DarcySolver::kMaxLevel); }
};

/// Synthetic observations: forward solve at spec.data_level() plus seeded noise.
std::vector<double> darcy_synthetic_data(const DarcySpec& spec);

/// Prior-reference hierarchy with log_weight = -Phi_l, eval_cost
/// 2^{cost_gamma l}, KDE-mixture proposals built from the
/// previous level's fine samples, level-0 RWM with step rwm_std.
Problem darcy_problem(const DarcySpec& spec);

// ---------------------------------------------------------------------------
// Sub-sampling comparison sampler

/// min(ceil(iact), 5), at least 1.
std::size_t subsampling_rate(double iact_value);

struct BaselineOptions {
  std::uint64_t master_seed = 0;
  std::uint64_t replica = 0;
  std::optional<std::size_t> burnin;
  /// Pilot steps of the coarse chain used to estimate its IACT.
  std::size_t pilot_steps = 2000;
};

struct BaselineLevel {
  ChainRun run;
  /// Sub-sampling rate used for the coarse proposals (1 at level 0).
  std::size_t rate = 1;
  /// IACT estimate behind `rate`.
  double coarse_iact = 1.0;
};

struct BaselineResult {
  std::vector<BaselineLevel> levels;
  std::vector<LevelStats> stats;
  double estimate = 0.0;
};

/// Sub-sampling ML-MCMC: level l's fine chain proposes the state of a
/// level-(l-1) chain taken t_l steps apart and accepts with
/// min{1, pi_l(z) pi_{l-1}(theta) / (pi_l(theta) pi_{l-1}(z))}. The
/// level-(l-1) chain is itself built the same way, recursively down to a
/// random-walk chain at level 0.
BaselineResult subsampling_baseline(const Problem& problem, std::span<const std::size_t> samples,
                                    const BaselineOptions& opts);

}  // namespace mlmcmc
