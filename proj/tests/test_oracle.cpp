#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "mlmcmc/oracle.hpp"
#include "mlmcmc/problems.hpp"

using namespace mlmcmc;
using namespace mlmcmc::oracle;

namespace {

GridKernel kernel_for(const Problem& p, int level, int n) {
  const GridDensities d = densities_for(p, level);
  return build_grid_kernel(d, auto_grid(d, n));
}

SparseKernel to_sparse(const Eigen::MatrixXd& m) { return m.sparseView(); }

}  // namespace

TEST_CASE("pseudo-spectral gap of small chains") {
  const std::vector<double> nu{0.5, 0.5};
  Eigen::MatrixXd iid(2, 2);
  iid << 0.5, 0.5, 0.5, 0.5;
  CHECK(pseudo_spectral_gap(iid, nu, 5).gamma_ps == doctest::Approx(1.0));

  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  CHECK(pseudo_spectral_gap(id, nu, 5).gamma_ps == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd lazy(2, 2);
  lazy << 0.75, 0.25, 0.25, 0.75;
  // eigenvalue 1/2 on mean-zero functions: (1 - 4^-k) / k
  const GapResult g = pseudo_spectral_gap(lazy, nu, 4);
  CHECK(g.gamma_ps == doctest::Approx(0.75));
  CHECK(g.argmax_k == 1);
  CHECK(g.per_k[1] == doctest::Approx(0.46875));
  CHECK(pseudo_spectral_gap(to_sparse(lazy), nu, 4).gamma_ps == doctest::Approx(0.75));

  CHECK_THROWS_AS(pseudo_spectral_gap(lazy, std::vector<double>{1.0, 0.0}, 4), std::domain_error);
  CHECK_THROWS_AS(pseudo_spectral_gap(lazy, nu, 0), std::domain_error);
}

TEST_CASE("MSE bound") {
  CHECK(mse_bound(1.0, 0.0, 1.0, 100) == doctest::Approx(0.05));
  CHECK(mse_bound(0.5, 0.5, 0.5, 50) == doctest::Approx(0.18));
  CHECK(mse_bound(2.0, 1.0, 1.0, 6) == doctest::Approx(1.5));
  CHECK_THROWS(mse_bound(0.0, 0.0, 1.0, 10));
}

TEST_CASE("identical targets keep the stationary law on the diagonal") {
  GridDensities d;
  d.log_coarse = [](double x) { return -0.5 * x * x; };
  d.log_fine = d.log_coarse;
  d.log_proposal = [](double x) { return -x * x / 6.0; };
  const GridKernel k = build_grid_kernel(d, auto_grid(d, 32));
  CHECK(offdiagonal_mass(k) < 1e-12);
  CHECK(max_desync_probability(k) < 1e-12);
}

TEST_CASE("pair kernel structure") {
  const Problem p = nested_gaussians(4);
  const GridKernel k = kernel_for(p, 2, 48);
  CHECK(k.states() == 48u * 48u);

  SUBCASE("rows are stochastic") {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k.states()));
    const Eigen::VectorXd rs = k.P * ones;
    CHECK((rs.array() - 1.0).abs().maxCoeff() < 1e-12);
  }

  SUBCASE("marginals are the independent-MH kernels") {
    const Marginals m = marginalize(k);
    CHECK(m.spread_coarse < 1e-12);
    CHECK(m.spread_fine < 1e-12);
    CHECK((m.coarse - imh_matrix(k.coarse, k.proposal)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m.fine - imh_matrix(k.fine, k.proposal)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("stationary law has the level posteriors as marginals") {
    CHECK(k.stationarity_residual < 1e-10);
    CHECK(total_variation(coarse_marginal(k, k.nu), k.coarse) < 1e-6);
    CHECK(total_variation(fine_marginal(k, k.nu), k.fine) < 1e-6);
    CHECK(std::accumulate(k.nu.begin(), k.nu.end(), 0.0) == doctest::Approx(1.0));
  }

  SUBCASE("adjoint identity") {
    Rng rng(11);
    const std::size_t n = k.states();
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> f(n), g(n);
      for (std::size_t i = 0; i < n; ++i) {
        f[i] = rng.normal();
        g[i] = rng.normal();
      }
      const auto pf = oracle::apply(k.P, f);
      const auto psg = apply_adjoint(k.P, k.nu, g);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (k.nu[i] <= 0.0) continue;
        lhs += k.nu[i] * g[i] * pf[i];
        rhs += k.nu[i] * psg[i] * f[i];
      }
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
  }
}

TEST_CASE("total variation convergence") {
  const Problem p = nested_gaussians(4);
  const GridKernel k = kernel_for(p, 3, 48);
  const TvResult from_nu = tv_convergence(k.P, k.nu, k.nu, 10);
  for (double v : from_nu.tv) CHECK(v < 1e-9);

  const TvResult diag = tv_convergence(k.P, k.nu, diagonal_start(k), 200);
  CHECK(diag.tv.size() == 201);
  CHECK(diag.tv[200] < 1e-4);
  for (std::size_t t = 1; t < diag.tv.size(); ++t) CHECK(diag.tv[t] <= diag.tv[t - 1] + 1e-12);

  std::vector<double> corner(k.states(), 0.0);
  corner[k.state(0, k.n() - 1)] = 1.0;
  const TvResult far = tv_convergence(k.P, k.nu, corner, 200);
  CHECK(far.rate > 0.0);
  CHECK(far.rate < 1.0);
  CHECK(std::abs(far.rate - diag.rate) <= 0.1 * diag.rate);
}

TEST_CASE("empirical MSE of grid chains") {
  const Problem p = nested_gaussians(2);
  const GridKernel k = kernel_for(p, 1, 32);
  const double gap = pseudo_spectral_gap(k).gamma_ps;
  CHECK(gap > 0.0);

  const MseCheck flat = empirical_mse_check(k, gap, 100, 200, 3, [](double, double) { return 2.0; });
  CHECK(flat.empirical == doctest::Approx(0.0));
  CHECK(flat.variance == doctest::Approx(0.0));

  auto f = [](double xc, double xf) { return xf - xc; };
  const MseCheck a = empirical_mse_check(k, gap, 500, 4000, 5, f);
  const MseCheck b = empirical_mse_check(k, gap, 2000, 4000, 6, f);
  CHECK(a.pass);
  CHECK(b.pass);
  CHECK(a.empirical <= a.bound);
  CHECK(a.empirical / b.empirical == doctest::Approx(4.0).epsilon(0.3));
}

TEST_CASE("coupling tightens with level") {
  const Problem p = nested_gaussians(6);
  double prev_off = 1.0, prev_desync = 1.0;
  for (int l = 1; l <= 6; ++l) {
    const GridKernel k = kernel_for(p, l, 48);
    const double off = offdiagonal_mass(k);
    const double desync = max_desync_probability(k);
    CHECK(off < prev_off);
    CHECK(desync < prev_desync);
    prev_off = off;
    prev_desync = desync;
  }
}

TEST_CASE("grid must cover the densities") {
  const Problem p = nested_gaussians(2);
  const GridDensities d = densities_for(p, 1);
  CHECK_THROWS_AS(build_grid_kernel(d, GridSpec{0.0, 2.0, 32}), std::domain_error);
  CHECK_THROWS_AS(build_grid_kernel(d, GridSpec{-12.0, 14.0, 200}), std::domain_error);
  CHECK_THROWS(densities_for(p, 0));
}

TEST_CASE("full oracle run") {
  OracleOptions o;
  o.grid_n = 32;
  o.mse_replicas = 2000;
  o.seed = 9;
  for (const Problem& p : {nested_gaussians(2), shifting_gaussians(2)}) {
    const OracleReport r = run_oracle(p, 2, o);
    CHECK(r.marginal_ok());
    CHECK(r.kernel_ok());
    CHECK(r.gap_ok());
    CHECK(r.tv_ok());
    CHECK(r.mse_ok());
    const auto j = to_json(r);
    CHECK(j.contains("gamma_ps"));
  }
}
