#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "mlmcmc/kernel.hpp"
#include "mlmcmc/problems.hpp"
#include "mlmcmc/stats.hpp"

using namespace mlmcmc;
using testing_support::gaussian_levels;
using testing_support::stub_pair;

TEST_CASE("log targets of the Gaussian hierarchies") {
  const Problem nested = nested_gaussians(4);
  CHECK(log_target(nested.hierarchy, 0, Point{1.0}) == doctest::Approx(0.0));
  CHECK(log_target(nested.hierarchy, 0, Point{3.0}) == doctest::Approx(-1.0));
  const Problem shifting = shifting_gaussians(4);
  CHECK(log_target(shifting.hierarchy, 2, Point{1.0}) == doctest::Approx(0.0));
  CHECK(log_target(shifting.hierarchy, 0, Point{5.0}) == doctest::Approx(-0.5));
}

TEST_CASE("identity QoI") {
  const Problem p = nested_gaussians(2);
  CHECK(qoi_eval(p.hierarchy, 1, Point{0.5}) == 0.5);
  CHECK(qoi_eval(p.hierarchy, 2, Point{-2.0}) == -2.0);
}

TEST_CASE("checked evaluation rejects bad levels and points") {
  const Problem p = nested_gaussians(2);
  CHECK_THROWS_AS(evaluate(p.hierarchy, 3, Point{0.0}), std::out_of_range);
  CHECK_THROWS_AS(evaluate(p.hierarchy, -1, Point{0.0}), std::out_of_range);
  CHECK_THROWS_AS(evaluate(p.hierarchy, 0, Point{std::nan("")}), std::domain_error);
  CHECK_THROWS_AS(evaluate(p.hierarchy, 0, Point{std::numeric_limits<double>::infinity()}), std::domain_error);
}

TEST_CASE("hierarchy construction checks its invariants") {
  auto t = [](int l, double cost) {
    return LevelTarget{l, [](const Point& x) { return Evaluation{0.0, x[0]}; }, cost};
  };
  auto ref = [](Rng&) { return Point{0.0}; };
  CHECK_NOTHROW(Hierarchy({t(0, 1), t(1, 2)}, 2, ref));
  CHECK_THROWS_AS(Hierarchy({t(0, 1), t(2, 2)}, 2, ref), std::invalid_argument);
  CHECK_THROWS_AS(Hierarchy({t(0, 2), t(1, 1)}, 2, ref), std::invalid_argument);
  CHECK_THROWS_AS(Hierarchy({t(0, 1)}, 1, ref), std::invalid_argument);
  CHECK_THROWS_AS(Hierarchy({}, 2, ref), std::invalid_argument);
}

TEST_CASE("per-sample cost counts both components above level 0") {
  const Problem p = nested_gaussians(3);
  CHECK(p.cost_per_sample(0) == 1.0);
  CHECK(p.cost_per_sample(1) == 3.0);
  CHECK(p.cost_per_sample(3) == 12.0);
}

TEST_CASE("independent proposal sampler agrees with its density") {
  for (const Problem& p : {nested_gaussians(2), shifting_gaussians(2)}) {
    const IndependentProposal q = p.level_proposal(1, {});
    const double m = p.name == "nested" ? 1.0 : 2.0;
    // log density differences follow N(m, 3)
    CHECK(q.log_density(Point{m + 1.5}) - q.log_density(Point{m}) == doctest::Approx(-1.5 * 1.5 / 6.0));
    Rng rng(3);
    std::vector<double> xs(100000);
    for (double& x : xs) x = q.sampler(rng)[0];
    CHECK(stats::ks_distance(xs, [m](double x) { return stats::normal_cdf((x - m) / std::sqrt(3.0)); }) < 0.01);
  }
}

TEST_CASE("integrated posterior mass is finite and positive") {
  const Problem p = nested_gaussians(4);
  for (int l = 0; l <= 4; ++l) {
    double z = 0.0;
    const double h = 1e-3;
    for (double x = -30; x < 30; x += h) z += std::exp(log_target(p.hierarchy, l, Point{x})) * h;
    CHECK(z == doctest::Approx(std::sqrt(2 * M_PI * (1 + std::pow(2.0, -l)))).epsilon(1e-6));
  }
}

TEST_CASE("tail diagnostic") {
  const Problem p = nested_gaussians(2);
  Rng rng(1);
  const TailCheck heavy = check_proposal_tails(p.hierarchy.target(2), p.level_proposal(2, {}), rng);
  CHECK_FALSE(heavy.warning);
  const IndependentProposal light = gaussian_proposal(1.0, 0.05);
  const TailCheck bad = check_proposal_tails(p.hierarchy.target(2), light, rng, 10000, 5.0);
  CHECK(bad.log_weight_spread > heavy.log_weight_spread);
  CHECK(bad.warning);
}

TEST_CASE("independent MH acceptance probability") {
  CHECK(imh_accept_prob(-3.0, -3.0, 1.0, 1.0) == 1.0);
  // target N(1,2), proposal N(1,3), theta = 1, z = 2
  CHECK(imh_accept_prob(0.0, -0.25, 0.0, -1.0 / 6.0) == doctest::Approx(std::exp(-1.0 / 12.0)).epsilon(1e-12));
  CHECK(imh_accept_prob(0.0, -0.25, 0.0, -1.0 / 6.0) == doctest::Approx(0.92004).epsilon(1e-5));
  // proposal proportional to target
  for (double d : {-5.0, 0.3, 7.0}) CHECK(imh_accept_prob(1.0, 1.0 + d, 4.0, 4.0 + d) == 1.0);
  CHECK(imh_accept_prob(0.0, 800.0, 0.0, 0.0) == 1.0);
  CHECK(imh_accept_prob(0.0, -800.0, 0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(imh_accept_prob(std::nan(""), 0.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("outcome classification by shared uniform") {
  CHECK(classify_outcome(0.3, 0.3, 0.7) == OutcomeKind::BothAccepted);
  CHECK(classify_outcome(0.31, 0.3, 0.7) == OutcomeKind::FineOnly);
  CHECK(classify_outcome(0.7, 0.3, 0.7) == OutcomeKind::FineOnly);
  CHECK(classify_outcome(0.71, 0.3, 0.7) == OutcomeKind::BothRejected);
  CHECK(classify_outcome(0.5, 0.7, 0.3) == OutcomeKind::CoarseOnly);
  CHECK(classify_outcome(0.0, 0.0, 0.0) == OutcomeKind::BothAccepted);
  CHECK(std::string(to_string(OutcomeKind::FineOnly)) == "fine_only");
}

TEST_CASE("coupled step with stubbed acceptance probabilities") {
  const auto stub = stub_pair(0.3, 0.7);
  const CoupledState start = make_diagonal_state(stub.h, 1, stub.q, Point{0.0});
  Rng rng(2024);
  std::array<int, 4> counts{};
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto [next, out] = coupled_step(stub.h, 1, stub.q, start, rng);
    CHECK(out.alpha_coarse == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(out.alpha_fine == doctest::Approx(0.7).epsilon(1e-12));
    ++counts[static_cast<int>(out.kind)];
    if (out.kind == OutcomeKind::FineOnly) {
      CHECK(next.theta_fine[0] == 1.0);
      CHECK(next.theta_coarse[0] == 0.0);
    }
  }
  const std::array<double, 4> p{0.3, 0.4, 0.0, 0.3};
  for (int k = 0; k < 4; ++k) {
    const double sd = std::sqrt(p[k] * (1 - p[k]) / n);
    CHECK(std::abs(counts[k] / double(n) - p[k]) <= 3 * sd + 1e-12);
  }
}

TEST_CASE("certain acceptance moves both components to the proposal") {
  const auto stub = stub_pair(1.0, 1.0);
  const CoupledState s = make_coupled_state(stub.h, 1, stub.q, Point{0.0}, Point{0.0});
  Rng rng(5);
  const auto [next, out] = coupled_step(stub.h, 1, stub.q, s, rng);
  CHECK(out.kind == OutcomeKind::BothAccepted);
  CHECK(next.synchronized());
  CHECK(next.theta_fine[0] == 1.0);
}

TEST_CASE("coupled step properties on a real hierarchy") {
  const Problem p = nested_gaussians(3);
  const IndependentProposal q = p.level_proposal(2, {});
  CoupledState s = make_coupled_state(p.hierarchy, 2, q, Point{-1.0}, Point{2.5});
  Rng rng(77);
  for (int i = 0; i < 20000; ++i) {
    auto [next, out] = coupled_step(p.hierarchy, 2, q, s, rng);
    // the chain with the larger alpha accepts whenever the other does
    if (out.kind == OutcomeKind::CoarseOnly) CHECK(out.alpha_coarse > out.alpha_fine);
    if (out.kind == OutcomeKind::FineOnly) CHECK(out.alpha_fine > out.alpha_coarse);
    if (out.kind == OutcomeKind::BothAccepted) CHECK(next.synchronized());
    s = std::move(next);
  }
  CHECK(cache_consistent(s, p.hierarchy, 2, q));
  CHECK_THROWS_AS(coupled_step(p.hierarchy, 0, q, s, rng), std::out_of_range);
}

TEST_CASE("identical levels never desynchronize") {
  const Hierarchy h = gaussian_levels({1.0, 1.0}, {2.0, 2.0});
  const IndependentProposal q = gaussian_proposal(1.0, 3.0);
  CoupledState s = make_diagonal_state(h, 1, q, Point{0.4});
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) {
    auto [next, out] = coupled_step(h, 1, q, s, rng);
    CHECK(next.synchronized());
    CHECK((out.kind == OutcomeKind::BothAccepted || out.kind == OutcomeKind::BothRejected));
    s = std::move(next);
  }
}

TEST_CASE("single-level Metropolis step") {
  const Hierarchy h = gaussian_levels({1.0}, {2.0});
  auto fixed_to = [](double z) {
    return ConditionalProposal{[](const Point&, const Point&) { return 0.0; },
                               [z](const Point&, Rng&) { return Point{z}; }, true};
  };
  Rng rng(4);
  const auto down = single_level_step(h.target(0), fixed_to(2.0), Point{1.0}, rng);
  CHECK(down.alpha == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
  CHECK(down.alpha == doctest::Approx(0.7788).epsilon(1e-4));
  const auto up = single_level_step(h.target(0), fixed_to(1.0), Point{3.0}, rng);
  CHECK(up.alpha == 1.0);
  CHECK(up.accepted);
  const auto stay = single_level_step(h.target(0), fixed_to(3.0), Point{3.0}, rng);
  CHECK(stay.alpha == 1.0);
}

TEST_CASE("random walk relative to a prior is not symmetric") {
  const DiagGaussian prior{{0.0}, {1.0}};
  const ConditionalProposal rw = random_walk_proposal(0.5, prior);
  CHECK_FALSE(rw.symmetric);
  const Point a{0.0}, b{1.0};
  CHECK(rw.log_density(a, b) - rw.log_density(b, a) == doctest::Approx(prior.log_density(a) - prior.log_density(b)));
  CHECK(random_walk_proposal(0.5).symmetric);
}
