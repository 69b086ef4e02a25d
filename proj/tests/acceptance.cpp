// Acceptance runner: `acceptance <criterion>` runs one criterion (1-8), or all
// of them when no argument is given, and prints one line per criterion.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mlmcmc/experiments.hpp"
#include "mlmcmc/kernel.hpp"
#include "mlmcmc/parallel.hpp"
#include "mlmcmc/problems.hpp"
#include "mlmcmc/tuner.hpp"

using namespace mlmcmc;
using namespace mlmcmc::experiments;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool in_range(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

RunConfig rates_config(const std::string& problem, int levels, std::size_t samples, std::size_t replicas) {
  RunConfig c;
  c.problem = problem;
  c.mode = "rates";
  c.levels = levels;
  c.samples = samples;
  c.replicas = replicas;
  c.master_seed = 1;
  c.threads = default_thread_count();
  validate(c);
  return c;
}

Outcome nested_rates() {
  const RunConfig c = rates_config("nested", 6, 50000, 20);
  const RatesResult r = rates_study(make_problem(c), c);
  const bool pass = in_range(r.alpha_w.rate, 1.0, 1.7) && in_range(r.beta.rate, 1.0, 1.7);
  return {pass, fmt("alpha_w=%.3f beta=%.3f, both required in [1.0, 1.7]", r.alpha_w.rate, r.beta.rate)};
}

Outcome shifting_correctness() {
  const RunConfig c = rates_config("shifting", 6, 50000, 20);
  const RatesResult r = rates_study(make_problem(c), c);
  bool pass = true;
  double worst_z = 0.0;
  for (const auto& l : r.levels) {
    const double z = std::abs(l.marginal_mean - *l.exact_marginal) / l.marginal_se;
    worst_z = std::max(worst_z, z);
    if (!(z <= 3.0)) pass = false;
  }
  pass = pass && in_range(r.alpha_w.rate, 0.75, 1.25) && in_range(r.beta.rate, 0.75, 1.25);
  const double sync6 = r.levels[6].sync_rate.mean;
  if (!(sync6 >= 0.9)) pass = false;
  bool monotone = true;
  for (std::size_t l = 2; l < r.levels.size(); ++l) {
    const auto& a = r.levels[l - 1].sync_rate;
    const auto& b = r.levels[l].sync_rate;
    const double noise = (a.hi - a.lo) / 2 + (b.hi - b.lo) / 2;
    if (b.mean < a.mean - noise) monotone = false;
  }
  pass = pass && monotone;
  return {pass, fmt("max |z| of marginal means=%.2f, alpha_w=%.3f beta=%.3f, sync(6)=%.4f, monotone=%s",
                    worst_z, r.alpha_w.rate, r.beta.rate, sync6, monotone ? "yes" : "no")};
}

Outcome baseline_bias() {
  RunConfig c;
  c.problem = "shifting";
  c.mode = "baseline-compare";
  c.levels = 3;
  c.samples = 50000;
  c.master_seed = 1;
  validate(c);
  const auto rows = baseline_compare(make_problem(c), c);
  double z_base = 0.0, z_coupled = 0.0;
  for (const auto& row : rows) {
    if (row.level != 3) continue;
    if (row.method == "subsampling") z_base = row.z.value_or(0.0);
    if (row.method == "coupled_imh") z_coupled = row.z.value_or(1e9);
  }
  const bool pass = std::abs(z_base) > 5.0 && std::abs(z_coupled) < 3.0;
  return {pass, fmt("level 3: sub-sampling z=%.2f (need |z|>5), coupled z=%.2f (need |z|<3)", z_base, z_coupled)};
}

Outcome continuation_reliability() {
  RunConfig c;
  c.problem = "shifting";
  c.mode = "continuation";
  c.tol = 0.1;
  c.replicas = 20;
  c.master_seed = 1;
  c.threads = default_thread_count();
  validate(c);
  const ContinuationStudy s = continuation_study(make_problem(c), c);
  std::size_t converged = 0;
  for (const auto& run : s.runs) converged += run.converged ? 1 : 0;
  const bool pass = s.mse.has_value() && *s.mse <= 0.01;
  return {pass, fmt("%zu/%zu runs converged, MSE=%.3g (need <= 0.01)", converged, s.runs.size(),
                    s.mse.value_or(std::nan("")))};
}

Outcome oracle_suite() {
  bool pass = true;
  std::string failures;
  for (const std::string name : {"nested", "shifting"}) {
    RunConfig c;
    c.problem = name;
    c.mode = "oracle-check";
    c.levels = 4;
    c.grid_n = 64;
    c.master_seed = 1;
    c.threads = default_thread_count();
    validate(c);
    for (const auto& r : oracle_study(make_problem(c), c)) {
      if (!r.all_ok()) {
        pass = false;
        failures += fmt(" %s/l=%d[tv=%.2g spread=%.2g imh=%.2g gap=%.3g mse=%.3g/%.3g R2=%.4f]", name.c_str(),
                        r.level, r.marginal_tv, r.marginal_spread, r.imh_match, r.gap.gamma_ps, r.mse.empirical,
                        r.mse.bound, r.tv.r_squared);
      }
    }
  }
  return {pass, pass ? "marginal, kernel, gap, MSE and TV checks hold for levels 1-4" : "failed:" + failures};
}

Outcome exact_values() {
  const auto n = sample_sizes(std::vector<double>{1.0, 0.25}, std::vector<double>{1.0, 2.0}, 0.1);
  const Schedule s = tol_schedule(0.5, 0.1, 2.0, 1.1);
  TuningParams p;
  p.C_w = 4.0;
  p.alpha_w = 1.0;
  p.C_beta = 1.0;
  p.beta = 1.0;
  p.C_gamma = 1.0;
  p.gamma = 1.0;
  const int L = select_levels(0, 10, 0.1, p);
  const std::array<double, 3> expected{0.36364, 0.18182, 0.09091};
  bool sched_ok = s.i_E == 2 && s.tolerances.size() == 3;
  for (std::size_t i = 0; sched_ok && i < 3; ++i) sched_ok = std::abs(s.tolerances[i] - expected[i]) < 1e-5;
  const bool pass = n.size() == 2 && n[0] == 342 && n[1] == 121 && sched_ok && L == 6;
  return {pass, fmt("N=(%zu, %zu), i_E=%d, schedule %s, L=%d", n.at(0), n.at(1), s.i_E, sched_ok ? "ok" : "wrong",
                    L)};
}

Outcome darcy_rates() {
  const double qoi_err = std::abs(DarcySolver(2).solve(Point{0.0, 0.0, 0.0, 0.0}).qoi - 1.0 / 12.0);
  const RunConfig c = rates_config("darcy", 3, 2000, 4);
  const RatesResult r = rates_study(make_problem(c), c);
  const bool pass =
      in_range(r.alpha_w.rate, 1.5, 2.5) && in_range(r.beta.rate, 1.5, 2.5) && qoi_err < 1e-3;
  return {pass, fmt("alpha_w=%.3f beta=%.3f (need [1.5, 2.5]), |QoI - 1/12| at level 2 = %.2e", r.alpha_w.rate,
                    r.beta.rate, qoi_err)};
}

Outcome kernel_law() {
  const auto stub = testing_support::stub_pair(0.3, 0.7);
  const CoupledState start = make_diagonal_state(stub.h, 1, stub.q, Point{0.0});
  Rng rng(derive_seed(1, 1, 0, StreamPurpose::Chain));
  std::array<std::size_t, 4> counts{};
  const std::size_t n = 1000000;
  for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<int>(coupled_step(stub.h, 1, stub.q, start, rng).second.kind)];
  const std::array<double, 4> p{0.3, 0.4, 0.0, 0.3};
  bool pass = true;
  std::string freq;
  for (int k = 0; k < 4; ++k) {
    const double f = static_cast<double>(counts[k]) / n;
    const double sd = std::sqrt(p[k] * (1 - p[k]) / n);
    if (std::abs(f - p[k]) > 3 * sd) pass = false;
    freq += fmt("%s%s=%.4f", k ? " " : "", to_string(static_cast<OutcomeKind>(k)), f);
  }
  return {pass, freq};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{nested_rates, shifting_correctness, baseline_bias,
                                                       continuation_reliability, oracle_suite, exact_values,
                                                       darcy_rates, kernel_law};
  std::vector<int> which;
  if (argc > 1) {
    which.push_back(std::atoi(argv[1]));
  } else {
    for (int i = 1; i <= 8; ++i) which.push_back(i);
  }
  bool all = true;
  for (int i : which) {
    if (i < 1 || i > 8) {
      std::fprintf(stderr, "criterion must be 1-8\n");
      return 2;
    }
    Outcome o;
    try {
      o = criteria[i - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s (%s)\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
