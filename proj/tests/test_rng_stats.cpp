#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "mlmcmc/parallel.hpp"
#include "mlmcmc/rng.hpp"
#include "mlmcmc/stats.hpp"

using namespace mlmcmc;

TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(philox4x32_10(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same key replays the same stream") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    differs = differs || x != z;
  }
  CHECK(differs);
}

TEST_CASE("uniform lies in [0,1) and has the right moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double m = sum / n;
  CHECK(m == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - m * m == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal deviates match N(0,1) by KS") {
  Rng rng(11);
  std::vector<double> xs(100000);
  for (double& x : xs) x = rng.normal();
  CHECK(stats::ks_distance(xs, stats::normal_cdf) < 0.01);
}

TEST_CASE("derived seeds separate levels, replicas and purposes") {
  std::set<std::uint64_t> keys;
  for (int l = 0; l < 8; ++l) {
    for (std::uint64_t r = 0; r < 100; ++r) {
      for (auto p : {StreamPurpose::Chain, StreamPurpose::Screening, StreamPurpose::Data}) {
        keys.insert(derive_seed(5, l, r, p));
      }
    }
  }
  CHECK(keys.size() == 8u * 100u * 3u);
  CHECK(derive_seed(5, 1, 2) == derive_seed(5, 1, 2));
  CHECK(derive_seed(5, 1, 2) != derive_seed(6, 1, 2));
}

TEST_CASE("streams from adjacent replicas are uncorrelated") {
  Rng a(derive_seed(0, 1, 0)), b(derive_seed(0, 1, 1));
  const int n = 100000;
  double sab = 0.0;
  for (int i = 0; i < n; ++i) sab += (a.uniform() - 0.5) * (b.uniform() - 0.5);
  // correlation of independent uniforms has sd 1/sqrt(n)
  CHECK(std::abs(sab / n * 12.0) < 4.0 / std::sqrt(n));
}

TEST_CASE("pairwise sum") {
  CHECK(stats::pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(stats::pairwise_sum(std::vector<double>{1.0, 2.0, 3.5}) == 6.5);
  std::vector<double> many(1 << 20, 0.1);
  CHECK(stats::pairwise_sum(many) == doctest::Approx(0.1 * (1 << 20)).epsilon(1e-14));
}

TEST_CASE("mean and variance") {
  const std::vector<double> xs{1, 2, 3, 4};
  CHECK(stats::mean(xs) == 2.5);
  CHECK(stats::sample_variance(xs) == doctest::Approx(5.0 / 3.0));
  CHECK(stats::sample_variance(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("least squares recovers an exact line") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(0.5 - 2.0 * v);
  const auto fit = stats::least_squares(x, y);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK_THROWS_AS(stats::least_squares(std::vector<double>{1.0}, std::vector<double>{1.0}), std::domain_error);
}

TEST_CASE("student t quantiles") {
  CHECK(stats::student_t_quantile(0.05, 10) == doctest::Approx(2.228139).epsilon(1e-5));
  CHECK(stats::student_t_quantile(0.05, 19) == doctest::Approx(2.093024).epsilon(1e-5));
  CHECK(stats::student_t_quantile(0.05, 1) == doctest::Approx(12.7062).epsilon(1e-4));
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("parallel reductions do not depend on thread count") {
  auto run = [](std::size_t threads) {
    std::vector<double> slot(64);
    parallel_for(slot.size(), threads, [&](std::size_t i) {
      Rng rng(derive_seed(9, 0, i));
      double s = 0.0;
      for (int k = 0; k < 1000; ++k) s += rng.normal();
      slot[i] = s;
    });
    return stats::pairwise_sum(slot);
  };
  const double one = run(1);
  CHECK(run(3) == one);
  CHECK(run(8) == one);
}
