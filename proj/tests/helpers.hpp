#pragma once

// Small hand-built hierarchies for unit tests.

#include <cmath>
#include <vector>

#include "mlmcmc/model.hpp"
#include "mlmcmc/problems.hpp"

namespace testing_support {

using namespace mlmcmc;

/// Gaussian levels N(means[l], vars[l]) on the line, identity QoI, cost 2^l.
inline Hierarchy gaussian_levels(std::vector<double> means, std::vector<double> vars) {
  std::vector<LevelTarget> t;
  for (std::size_t l = 0; l < means.size(); ++l) {
    const double m = means[l], v = vars[l];
    t.push_back({static_cast<int>(l),
                 [m, v](const Point& x) { return Evaluation{-(x[0] - m) * (x[0] - m) / (2 * v), x[0]}; },
                 std::pow(2.0, static_cast<double>(l))});
  }
  return Hierarchy(std::move(t), 2, [](Rng& rng) { return Point{rng.normal()}; });
}

/// Two levels whose acceptance probabilities from x = 0 towards z = 1 are
/// exactly alpha_c and alpha_f under a flat proposal that always draws 1.
struct StubPair {
  Hierarchy h;
  IndependentProposal q;
};

inline StubPair stub_pair(double alpha_c, double alpha_f) {
  auto level = [](int l, double a) {
    return LevelTarget{l, [a](const Point& x) { return Evaluation{x[0] == 1.0 ? std::log(a) : 0.0, x[0]}; },
                       1.0};
  };
  Hierarchy h({level(0, alpha_c), level(1, alpha_f)}, 2, [](Rng&) { return Point{0.0}; });
  IndependentProposal q{[](const Point&) { return 0.0; }, [](Rng&) { return Point{1.0}; }};
  return {std::move(h), std::move(q)};
}

}  // namespace testing_support
