#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mlmcmc/problems.hpp"
#include "mlmcmc/tuner.hpp"

using namespace mlmcmc;

namespace {

TuningParams params_with(double C_w, double alpha_w, double C_beta, double beta) {
  TuningParams p;
  p.C_w = C_w;
  p.alpha_w = alpha_w;
  p.C_beta = C_beta;
  p.beta = beta;
  p.C_gamma = 1.0;
  p.gamma = 1.0;
  p.s = 2;
  return p;
}

// Independent evaluation of the allocation rule.
double expected_n(const std::vector<double>& s2, const std::vector<double>& c, double tol, std::size_t l) {
  double sum = 0.0;
  for (std::size_t j = 0; j < s2.size(); ++j) sum += std::sqrt(s2[j] * c[j]);
  return 2.0 / (tol * tol) * std::sqrt(s2[l] / c[l]) * sum;
}

}  // namespace

TEST_CASE("sample sizes worked examples") {
  const auto n = sample_sizes(std::vector<double>{1.0, 0.25}, std::vector<double>{1.0, 2.0}, 0.1);
  REQUIRE(n.size() == 2);
  CHECK(n[0] == 342);
  CHECK(n[1] == 121);
  CHECK(sample_sizes(std::vector<double>{1.0}, std::vector<double>{1.0}, 1.0)[0] == 2);
  const auto z = sample_sizes(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 2.0}, 0.1);
  CHECK(z[1] == 1);
}

TEST_CASE("corrected allocation scales by 2(L+1)") {
  const std::vector<double> s2{1.0, 0.25, 0.1}, c{1.0, 2.0, 4.0};
  const auto plain = sample_sizes_real(s2, c, 0.1);
  const auto corr = sample_sizes_real(s2, c, 0.1, true);
  for (std::size_t l = 0; l < 3; ++l) CHECK(corr[l] == doctest::Approx(plain[l] * 6.0));
}

TEST_CASE("sample sizes: property checks") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> var(0.01, 5.0), cost(0.5, 50.0), tol(0.01, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 1 + trial % 6;
    std::vector<double> s2(L), c(L);
    for (std::size_t l = 0; l < L; ++l) {
      s2[l] = var(gen);
      c[l] = cost(gen);
    }
    const double t = tol(gen);
    const auto real = sample_sizes_real(s2, c, t);
    const auto half = sample_sizes_real(s2, c, t / 2);
    const auto ints = sample_sizes(s2, c, t);
    for (std::size_t l = 0; l < L; ++l) {
      CHECK(real[l] == doctest::Approx(expected_n(s2, c, t, l)).epsilon(1e-12));
      CHECK(half[l] == doctest::Approx(4.0 * real[l]).epsilon(1e-12));
      CHECK(ints[l] == std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(real[l]))));
    }
  }
}

TEST_CASE("sample sizes reject bad input") {
  CHECK_THROWS_AS(sample_sizes(std::vector<double>{}, std::vector<double>{}, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_sizes(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_sizes(std::vector<double>{1.0}, std::vector<double>{1.0}, 0.0), std::domain_error);
  CHECK_THROWS_AS(sample_sizes(std::vector<double>{-1.0}, std::vector<double>{1.0}, 0.1), std::domain_error);
}

TEST_CASE("tolerance schedule worked examples") {
  const Schedule s = tol_schedule(0.5, 0.1, 2.0, 1.1);
  CHECK(s.i_E == 2);
  REQUIRE(s.tolerances.size() == 3);
  CHECK(s.tolerances[0] == doctest::Approx(0.36364).epsilon(1e-4));
  CHECK(s.tolerances[1] == doctest::Approx(0.18182).epsilon(1e-4));
  CHECK(s.tolerances[2] == doctest::Approx(0.09091).epsilon(1e-4));
  CHECK(std::abs(s.at(0) - 0.36364) < 1e-5);
  CHECK(std::abs(s.at(2) - 0.09091) < 1e-5);
  // past i_E the tolerance shrinks by r2 per iteration
  CHECK(s.at(3) == doctest::Approx(s.at(2) / 1.1));

  CHECK(tol_schedule(0.5, 0.45, 2.0, 1.1).i_E == 0);
}

TEST_CASE("uniform ratio collapses to a geometric schedule") {
  const Schedule s = tol_schedule(1.0, 0.1, 1.5, 1.5);
  for (int i = 1; i < 8; ++i) CHECK(s.at(i) == doctest::Approx(s.at(i - 1) / 1.5));
}

TEST_CASE("tolerance schedule invariants over random inputs") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double r2 = 1.01 + u(gen);
    const double r1 = r2 + 2.0 * u(gen);
    const double tol0 = 0.05 + u(gen);
    const double tol = tol0 * (0.01 + 0.98 * u(gen));
    const Schedule s = tol_schedule(tol0, tol, r1, r2);
    CHECK(s.i_E >= 0);
    CHECK(s.at(s.i_E) < tol);
    if (s.i_E >= 1) CHECK(s.at(s.i_E - 1) >= tol);
    // i_E is the largest index whose first tolerance does not exceed tol0
    CHECK(s.at(0) <= tol0 * (1 + 1e-12));
    CHECK(s.at(0) * r1 > tol0 * (1 - 1e-12));
  }
  CHECK_THROWS_AS(tol_schedule(0.5, 0.6, 2.0, 1.1), std::domain_error);
  CHECK_THROWS_AS(tol_schedule(0.5, 0.1, 1.05, 1.1), std::domain_error);
}

TEST_CASE("level selection worked examples") {
  const TuningParams p = params_with(4.0, 1.0, 1.0, 1.0);
  CHECK(select_levels(0, 10, 0.1, p) == 6);
  CHECK(select_levels(7, 10, 0.1, p) == 7);
  try {
    select_levels(0, 5, 0.001, p);
    FAIL("expected infeasible levels");
  } catch (const InfeasibleLevels& e) {
    CHECK(e.l_max() == 5);
    CHECK(e.min_tol_at_lmax() == doctest::Approx(std::sqrt(2.0) * 0.125));
  }
  CHECK_THROWS_AS(select_levels(6, 5, 0.1, p), std::domain_error);
}

TEST_CASE("level selection properties") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    TuningParams p = params_with(0.5 + 5 * u(gen), 0.3 + 2 * u(gen), 0.1 + 3 * u(gen), 0.2 + 2 * u(gen));
    p.gamma = 0.5 + 2 * u(gen);
    const int l_max = 3 + static_cast<int>(10 * u(gen));
    const int l_prev = static_cast<int>(l_max * u(gen));
    const double tol = 0.005 + 0.3 * u(gen);
    try {
      const int L = select_levels(l_prev, l_max, tol, p);
      CHECK(L >= l_prev);
      CHECK(L <= l_max);
      CHECK(p.weak_error_at(L) <= tol / std::sqrt(2.0));
      // no cheaper feasible level exists
      for (int k = l_prev; k <= l_max; ++k) {
        if (p.weak_error_at(k) <= tol / std::sqrt(2.0)) {
          CHECK(level_objective(L, tol, p) <= level_objective(k, tol, p) * (1 + 1e-12));
        }
      }
    } catch (const InfeasibleLevels&) {
      CHECK(p.weak_error_at(l_max) > tol / std::sqrt(2.0));
    }
  }
}

TEST_CASE("rate fitting") {
  std::vector<std::pair<int, double>> v;
  for (int l = 1; l <= 5; ++l) v.emplace_back(l, 4.0 * std::pow(2.0, -1.5 * l));
  const RateFit f = fit_rates(v, 2);
  CHECK(std::abs(f.C - 4.0) < 1e-10);
  CHECK(std::abs(f.rate - 1.5) < 1e-10);
  CHECK(f.r_squared == doctest::Approx(1.0));

  std::vector<std::pair<int, double>> flat{{1, 0.3}, {2, 0.3}, {3, 0.3}};
  CHECK(std::abs(fit_rates(flat, 2).rate) < 1e-12);

  std::vector<std::pair<int, double>> two;
  for (int l = 0; l <= 4; ++l) two.emplace_back(l, std::pow(2.0, -2.0 * l));
  const RateFit g = fit_rates(two, 2);
  CHECK(std::abs(g.rate - 2.0) < 1e-10);
  CHECK(std::abs(g.C - 1.0) < 1e-10);

  // base-s regression
  std::vector<std::pair<int, double>> s3;
  for (int l = 1; l <= 4; ++l) s3.emplace_back(l, 2.0 * std::pow(3.0, -0.7 * l));
  CHECK(std::abs(fit_rates(s3, 3).rate - 0.7) < 1e-10);

  CHECK_THROWS_AS(fit_rates(std::vector<std::pair<int, double>>{{1, 1.0}, {2, 0.0}}, 2), std::domain_error);
}

TEST_CASE("complexity regimes") {
  const auto a = complexity_regime(2.0, 1.0, 1.0);
  CHECK(a.regime == Regime::BetaAboveGamma);
  CHECK(a.tol_exponent == -2.0);
  CHECK(a.log_power == 1);
  const auto b = complexity_regime(1.0, 1.0, 1.0);
  CHECK(b.regime == Regime::BetaEqualsGamma);
  CHECK(b.log_power == 3);
  const auto c = complexity_regime(0.5, 1.0, 1.0);
  CHECK(c.regime == Regime::BetaBelowGamma);
  CHECK(c.tol_exponent == doctest::Approx(-2.5));
  CHECK_THROWS_AS(complexity_regime(1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("fit_tuning_params skips short levels") {
  const Problem p = nested_gaussians(4);
  std::vector<LevelStats> s(4);
  for (int l = 0; l < 4; ++l) {
    s[l].level = l;
    s[l].n = 1000;
    s[l].y_mean = l == 0 ? 1.0 : std::pow(2.0, -l);
    s[l].y_var_asymptotic = std::pow(2.0, -2.0 * l);
    s[l].cost_per_sample = p.cost_per_sample(l);
  }
  s[3].n = 1;
  s[3].y_mean = -5.0;
  s[3].y_var_asymptotic = 0.0;
  const TuningParams t = fit_tuning_params(s, p, 4, 0.25, 100);
  CHECK(t.alpha_w == doctest::Approx(1.0));
  CHECK(t.beta == doctest::Approx(2.0));
  CHECK(t.sigma2_at(3) == doctest::Approx(std::pow(2.0, -6.0)));
  const TuningParams all = fit_tuning_params(s, p, 4, 0.25, 1);
  CHECK(all.sigma2_at(3) == 0.0);
}

TEST_CASE("continuation on shifting Gaussians converges") {
  const Problem p = shifting_gaussians(10);
  ContinuationConfig c;
  c.tol = 0.1;
  c.master_seed = 3;
  const ContinuationResult r = continuation(p, c);
  CHECK(r.report.converged);
  CHECK(r.report.total <= 0.01);
  CHECK(r.history.size() >= 2);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    CHECK(r.history[i].iteration == static_cast<int>(i) + 1);
    CHECK(r.history[i].stream == i + 1);
    if (i > 0) CHECK(r.history[i].L >= r.history[i - 1].L);
  }
  CHECK(std::abs(r.estimate) < 0.3);
  // same seed replays
  CHECK(continuation(p, c).estimate == r.estimate);
}

TEST_CASE("continuation on nested Gaussians allocates decreasing sample sizes") {
  const Problem p = nested_gaussians(10);
  ContinuationConfig c;
  c.tol = 0.07;
  c.master_seed = 11;
  const ContinuationResult r = continuation(p, c);
  CHECK(r.report.converged);
  const auto& n = r.history.back().samples;
  for (std::size_t l = 1; l < n.size(); ++l) CHECK(n[l] <= n[l - 1] + 1);
}

TEST_CASE("continuation with identical levels keeps L at its starting value") {
  std::vector<LevelTarget> t;
  for (int l = 0; l <= 6; ++l) {
    t.push_back({l, [](const Point& x) { return Evaluation{-x[0] * x[0] / 2, x[0]}; }, std::pow(2.0, l)});
  }
  Problem p{"flat",
            Hierarchy(std::move(t), 2, [](Rng& rng) { return Point{rng.normal()}; }),
            random_walk_proposal(1.0),
            [](int, std::span<const Point>) { return gaussian_proposal(0.0, 2.0); }};
  ContinuationConfig c;
  c.tol = 0.1;
  c.L_max = 6;
  const ContinuationResult r = continuation(p, c);
  CHECK(r.report.converged);
  for (const auto& rec : r.history) CHECK(rec.L == c.L0);
  CHECK(r.report.statistical >= r.report.bias_sq);
}

TEST_CASE("continuation validates its configuration") {
  const Problem p = nested_gaussians(4);
  ContinuationConfig c;
  c.L_max = 4;
  c.screening_samples = 50;
  CHECK_THROWS_AS(continuation(p, c), std::domain_error);
  c.screening_samples = 1000;
  c.L0 = 1;
  CHECK_THROWS_AS(continuation(p, c), std::domain_error);
  c.L0 = 2;
  c.L_max = 8;
  CHECK_THROWS_AS(continuation(p, c), std::out_of_range);
}

TEST_CASE("continuation surfaces infeasible levels with history") {
  const Problem p = shifting_gaussians(3);
  ContinuationConfig c;
  c.tol = 0.01;
  c.L_max = 3;
  try {
    continuation(p, c);
    FAIL("expected a continuation error");
  } catch (const ContinuationError& e) {
    CHECK(std::string(e.what()).find("L_max") != std::string::npos);
  }
}
