#pragma once

// Finite-state verification of the coupled kernel on a 1-D grid.
//
// The coupled chain is discretized to pair states (i, j) over an n-point
// midpoint grid: i indexes the coarse component, j the fine one, state id
// i * n + j. With a discrete proposal the transition matrix is exact, so
// stationarity, marginal correctness, convergence in total variation and
// the pseudo-spectral gap reduce to linear algebra.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "mlmcmc/model.hpp"

namespace mlmcmc::oracle {

using SparseKernel = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct GridSpec {
  double a = 0.0;
  double b = 1.0;
  int n = 64;

  double step() const { return (b - a) / n; }
  double point(int k) const { return a + (k + 0.5) * step(); }
};

/// Unnormalized log-densities on the real line.
struct GridDensities {
  std::function<double(double)> log_coarse;
  std::function<double(double)> log_fine;
  std::function<double(double)> log_proposal;
};

/// Densities of level `level` >= 1 of a 1-D problem with a fixed proposal.
/// Invalid argument for multi-dimensional or adaptive problems.
GridDensities densities_for(const Problem& problem, int level);

/// Grid covering mean +- 6.5 sd of all three densities (moments by
/// quadrature on a wide window).
GridSpec auto_grid(const GridDensities& d, int n);

/// Probability mass of exp(log_density) outside [a, b], by quadrature.
double mass_outside(const std::function<double(double)>& log_density, const GridSpec& grid);

struct GridKernel {
  GridSpec grid;
  std::vector<double> x;
  /// Normalized probability vectors on the grid and their logs.
  std::vector<double> coarse, fine, proposal;
  std::vector<double> log_coarse, log_fine, log_proposal;
  /// Acceptance probabilities alpha(i -> k) of the coarse and fine IMH chains.
  Eigen::MatrixXd alpha_coarse, alpha_fine;
  /// n^2 x n^2 row-stochastic transition matrix over pair states.
  SparseKernel P;
  /// Stationary distribution by power iteration.
  std::vector<double> nu;
  /// States reachable from the diagonal (the single closed class).
  std::vector<std::uint8_t> support;
  int power_iterations = 0;
  /// || nu P - nu ||_1 at exit.
  double stationarity_residual = 0.0;

  int n() const { return grid.n; }
  std::size_t states() const { return static_cast<std::size_t>(grid.n) * grid.n; }
  std::size_t state(int i, int j) const { return static_cast<std::size_t>(i) * grid.n + j; }
};

/// Builds the pair kernel. Domain error when n > 128 or any of the three
/// densities puts more than 1e-6 of its mass outside the grid.
GridKernel build_grid_kernel(const GridDensities& d, const GridSpec& grid);

/// Power iteration nu <- nu P from `start` until the L1 change is below
/// `tol`. Returns the iteration count.
int stationary_distribution(const SparseKernel& P, std::vector<double>& nu, double tol = 1e-12,
                            int max_iterations = 1000000);

double total_variation(std::span<const double> p, std::span<const double> q);

std::vector<double> coarse_marginal(const GridKernel& k, std::span<const double> pair_dist);
std::vector<double> fine_marginal(const GridKernel& k, std::span<const double> pair_dist);

/// Mass of nu off the diagonal.
double offdiagonal_mass(const GridKernel& k);

/// Largest probability of leaving the diagonal in one step, over diagonal states.
double max_desync_probability(const GridKernel& k);

struct Marginals {
  /// Destination-marginal matrices read from the diagonal source rows.
  Eigen::MatrixXd coarse;
  Eigen::MatrixXd fine;
  /// Largest entrywise difference between rows sharing a source coordinate.
  double spread_coarse = 0.0;
  double spread_fine = 0.0;
};

/// Sums P over the other destination coordinate for every source row.
Marginals marginalize(const GridKernel& k);

/// Independent-MH transition matrix built directly from a target and a
/// proposal probability vector.
Eigen::MatrixXd imh_matrix(std::span<const double> target, std::span<const double> proposal);

/// Stationary vector of a dense row-stochastic matrix by power iteration.
std::vector<double> stationary_vector(const Eigen::MatrixXd& P, double tol = 1e-14,
                                      int max_iterations = 1000000);

struct GapResult {
  double gamma_ps = 0.0;
  int argmax_k = 1;
  /// (1 - lambda_max((P*)^k P^k on mean-zero functions)) / k for k = 1..K_max.
  std::vector<double> per_k;
};

/// max_k (1 - ||P^k||^2_{L2_0(nu)}) / k. Domain error when nu has a
/// non-positive entry or K_max < 1.
GapResult pseudo_spectral_gap(const SparseKernel& P, std::span<const double> nu, int k_max = 10);
GapResult pseudo_spectral_gap(const Eigen::MatrixXd& P, std::span<const double> nu, int k_max = 10);
/// Same, restricted to the kernel's support.
GapResult pseudo_spectral_gap(const GridKernel& k, int k_max = 10);

/// P f and P* f = P^T (nu f) / nu on the full state space.
std::vector<double> apply(const SparseKernel& P, std::span<const double> f);
std::vector<double> apply_adjoint(const SparseKernel& P, std::span<const double> nu,
                                  std::span<const double> f);

/// (1 + 4 / gamma_ps)(1 + 2 ratio_sup) var_f / N.
double mse_bound(double gamma_ps, double density_ratio_sup, double var_f, std::size_t n);

/// sup over the support of |nu0 / nu - 1|.
double density_ratio_sup(const GridKernel& k, std::span<const double> nu0);

/// Start distribution on the diagonal: (k, k) with probability proposal[k].
std::vector<double> diagonal_start(const GridKernel& k);

struct TvResult {
  /// || nu0 P^t - nu ||_tv for t = 0..T.
  std::vector<double> tv;
  /// Fitted geometric rate r (tv_t ~ C r^t) and R^2 over the decaying range.
  double rate = 0.0;
  double r_squared = 0.0;
  int fit_first = 0;
  int fit_last = 0;
};

/// Fit range: t >= 1 while tv_t > floor.
TvResult tv_convergence(const SparseKernel& P, std::span<const double> nu, std::span<const double> nu0,
                        int steps, double floor = 1e-10);

struct MseCheck {
  double empirical = 0.0;
  double bound = 0.0;
  double exact_mean = 0.0;
  double variance = 0.0;
  double gamma_ps = 0.0;
  double ratio_sup = 0.0;
  std::size_t n = 0;
  std::size_t replicas = 0;
  bool pass = false;
};

/// Runs `replicas` grid chains of length N from the diagonal start (no
/// burn-in), estimates E_nu[f] by the ergodic mean, and compares the MSE
/// with mse_bound. f is a function of (x_coarse, x_fine).
MseCheck empirical_mse_check(const GridKernel& k, double gamma_ps, std::size_t n, std::size_t replicas,
                             std::uint64_t seed, const std::function<double(double, double)>& f,
                             std::size_t threads = 1);

struct OracleOptions {
  int grid_n = 64;
  int k_max = 10;
  int tv_steps = 200;
  std::size_t mse_samples = 500;
  std::size_t mse_replicas = 10000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::optional<GridSpec> grid;
};

struct OracleReport {
  int level = 0;
  int grid_n = 0;
  GridSpec grid;
  double marginal_tv = 0.0;
  double marginal_spread = 0.0;
  double imh_match = 0.0;
  double row_sum_error = 0.0;
  double stationarity_residual = 0.0;
  GapResult gap;
  TvResult tv;
  double offdiag_mass = 0.0;
  double max_desync = 0.0;
  MseCheck mse;

  bool marginal_ok() const { return marginal_tv < 1e-3; }
  bool kernel_ok() const { return marginal_spread < 1e-12 && imh_match < 1e-12; }
  bool gap_ok() const { return gap.gamma_ps > 0.0; }
  bool mse_ok() const { return mse.pass; }
  bool tv_ok() const { return tv.rate > 0.0 && tv.rate < 1.0 && tv.r_squared > 0.99; }
  bool all_ok() const { return marginal_ok() && kernel_ok() && gap_ok() && mse_ok() && tv_ok(); }
};

/// Every check of the oracle for one level of a 1-D problem, with
/// f = x_fine - x_coarse for the MSE check.
OracleReport run_oracle(const Problem& problem, int level, const OracleOptions& opts);

nlohmann::json to_json(const OracleReport& r);

}  // namespace mlmcmc::oracle
