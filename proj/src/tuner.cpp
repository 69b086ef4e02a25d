#include "mlmcmc/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mlmcmc/sampler.hpp"
#include "mlmcmc/stats.hpp"

namespace mlmcmc {

namespace {

std::string regime_tag(Regime r) {
  switch (r) {
    case Regime::BetaAboveGamma: return "beta>gamma";
    case Regime::BetaEqualsGamma: return "beta=gamma";
    case Regime::BetaBelowGamma: return "beta<gamma";
  }
  return "unknown";
}

/// Fit on the strictly positive entries; degenerate inputs fall back to
/// C = 0 (nothing positive) or a flat model (one positive value).
RateFit fit_positive(const std::vector<std::pair<int, double>>& values, int s) {
  std::vector<std::pair<int, double>> pos;
  for (const auto& v : values) {
    if (v.second > 0.0 && std::isfinite(v.second)) pos.push_back(v);
  }
  if (pos.empty()) return {};
  if (pos.size() == 1) return {pos.front().second, 0.0, 1.0, 0.0};
  return fit_rates(pos, s);
}

/// C for a fixed rate: geometric mean of v_l s^{rate l}.
double refit_constant(const std::vector<std::pair<int, double>>& values, int s, double rate) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& [l, v] : values) {
    if (v > 0.0 && std::isfinite(v)) {
      acc += std::log(v) + rate * l * std::log(static_cast<double>(s));
      ++count;
    }
  }
  return count == 0 ? 0.0 : std::exp(acc / static_cast<double>(count));
}

std::vector<LevelStats> strip_raw(std::vector<LevelStats> stats) {
  for (auto& s : stats) {
    s.raw_y.clear();
    s.raw_y.shrink_to_fit();
  }
  return stats;
}

}  // namespace

double TuningParams::sigma2_at(int level) const {
  if (level >= 0 && static_cast<std::size_t>(level) < sigma2.size()) {
    return sigma2[static_cast<std::size_t>(level)];
  }
  return C_beta * std::pow(s, -beta * level);
}

double TuningParams::cost_at(int level) const {
  if (level >= 0 && static_cast<std::size_t>(level) < cost.size()) {
    return cost[static_cast<std::size_t>(level)];
  }
  return C_gamma * std::pow(s, gamma * level);
}

double TuningParams::weak_error_at(int level) const { return C_w * std::pow(s, -alpha_w * level); }

nlohmann::json to_json(const TuningParams& p) {
  return {{"C_w", p.C_w},     {"alpha_w", p.alpha_w}, {"C_beta", p.C_beta}, {"beta", p.beta},
          {"C_gamma", p.C_gamma}, {"gamma", p.gamma}, {"s", p.s},       {"sigma2", p.sigma2}};
}

double Schedule::at(int i) const {
  if (i < 0) throw std::domain_error("Schedule::at: negative index");
  if (i < i_E) return std::pow(r1, i_E - i) * tol / r2;
  return std::pow(r2, i_E - i) * tol / r2;
}

std::vector<double> sample_sizes_real(std::span<const double> sigma2, std::span<const double> cost,
                                      double tol, bool corrected) {
  if (sigma2.empty() || cost.empty()) throw std::domain_error("sample_sizes: empty level lists");
  if (sigma2.size() != cost.size()) throw std::domain_error("sample_sizes: size mismatch");
  if (!(tol > 0.0)) throw std::domain_error("sample_sizes: tol must be positive");
  std::vector<double> weights(sigma2.size());
  for (std::size_t l = 0; l < sigma2.size(); ++l) {
    if (!(sigma2[l] >= 0.0)) throw std::domain_error("sample_sizes: negative variance");
    if (!(cost[l] > 0.0)) throw std::domain_error("sample_sizes: cost must be positive");
    weights[l] = std::sqrt(sigma2[l] * cost[l]);
  }
  const double total = stats::pairwise_sum(weights);
  const double factor =
      corrected ? 4.0 * static_cast<double>(sigma2.size()) : 2.0;  // 4(L+1) vs 2
  std::vector<double> n(sigma2.size());
  for (std::size_t l = 0; l < n.size(); ++l) {
    n[l] = factor / (tol * tol) * std::sqrt(sigma2[l] / cost[l]) * total;
  }
  return n;
}

std::vector<std::size_t> sample_sizes(std::span<const double> sigma2, std::span<const double> cost,
                                      double tol, bool corrected) {
  const auto real = sample_sizes_real(sigma2, cost, tol, corrected);
  std::vector<std::size_t> n(real.size());
  for (std::size_t l = 0; l < n.size(); ++l) {
    n[l] = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(real[l])));
  }
  return n;
}

Schedule tol_schedule(double tol0, double tol, double r1, double r2) {
  if (!(r2 > 1.0) || !(r1 >= r2)) throw std::domain_error("tol_schedule: need r1 >= r2 > 1");
  if (!(tol > 0.0) || !(tol < tol0)) throw std::domain_error("tol_schedule: need 0 < tol < tol0");
  Schedule s;
  s.tol = tol;
  s.r1 = r1;
  s.r2 = r2;
  s.i_E = static_cast<int>(
      std::floor((-std::log(tol) + std::log(r2) + std::log(tol0)) / std::log(r1)));
  for (int i = 0; i <= s.i_E; ++i) s.tolerances.push_back(s.at(i));
  return s;
}

InfeasibleLevels::InfeasibleLevels(double min_tol_at_lmax, int l_max)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "no level count <= " << l_max << " meets the weak-error constraint; smallest "
           << "achievable tolerance at L_max is " << min_tol_at_lmax;
        return os.str();
      }()),
      min_tol_(min_tol_at_lmax),
      l_max_(l_max) {}

double level_objective(int L, double tol_i, const TuningParams& params) {
  double sum = 0.0;
  for (int j = 0; j <= L; ++j) {
    sum += std::sqrt(params.C_beta * std::pow(params.s, -params.beta * j) * params.cost_at(j));
  }
  return 2.0 / (tol_i * tol_i) * 2.0 * (L + 1) * sum * sum;
}

int select_levels(int l_prev, int l_max, double tol_i, const TuningParams& params) {
  if (l_prev > l_max) throw std::domain_error("select_levels: L_prev > L_max");
  if (!(tol_i > 0.0)) throw std::domain_error("select_levels: tol must be positive");
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int L = l_prev; L <= l_max; ++L) {
    if (params.weak_error_at(L) > tol_i / std::sqrt(2.0)) continue;
    const double c = level_objective(L, tol_i, params);
    if (best < 0 || c < best_cost) {
      best = L;
      best_cost = c;
    }
  }
  if (best < 0) throw InfeasibleLevels(std::sqrt(2.0) * params.weak_error_at(l_max), l_max);
  return best;
}

RateFit fit_rates(std::span<const std::pair<int, double>> values, int s) {
  if (s < 2) throw std::domain_error("fit_rates: refinement factor must be >= 2");
  std::vector<double> x, y;
  for (const auto& [l, v] : values) {
    if (!(v > 0.0)) throw std::domain_error("fit_rates: values must be positive");
    x.push_back(static_cast<double>(l));
    y.push_back(std::log(v));
  }
  const auto fit = stats::least_squares(x, y);
  const double log_s = std::log(static_cast<double>(s));
  RateFit out;
  out.C = std::exp(fit.intercept);
  out.rate = -fit.slope / log_s;
  out.r_squared = fit.r_squared;
  out.rate_stderr = fit.slope_stderr / log_s;
  return out;
}

ComplexityRegime complexity_regime(double beta, double gamma, double alpha_w, double tie_tol) {
  if (!(alpha_w > 0.0)) throw std::domain_error("complexity_regime: alpha_w must be positive");
  ComplexityRegime r;
  if (std::abs(beta - gamma) <= tie_tol) {
    r.regime = Regime::BetaEqualsGamma;
    r.tol_exponent = -2.0;
    r.log_power = 3;
  } else if (beta > gamma) {
    r.regime = Regime::BetaAboveGamma;
    r.tol_exponent = -2.0;
    r.log_power = 1;
  } else {
    r.regime = Regime::BetaBelowGamma;
    r.tol_exponent = -2.0 - (gamma - beta) / alpha_w;
    r.log_power = 1;
  }
  r.tag = regime_tag(r.regime);
  std::ostringstream os;
  os << "tol^" << r.tol_exponent << " |log tol|^" << r.log_power;
  r.description = os.str();
  return r;
}

TuningParams fit_tuning_params(std::span<const LevelStats> stats, const Problem& problem, int l_max,
                               double alpha_w_floor, std::size_t min_samples) {
  TuningParams p;
  p.s = problem.hierarchy.refinement_factor();
  std::vector<std::pair<int, double>> weak, var, cost;
  for (const auto& st : stats) {
    p.sigma2.push_back(st.y_var_asymptotic);
    if (st.level < 1 || st.n < min_samples) continue;
    weak.emplace_back(st.level, std::abs(st.y_mean));
    var.emplace_back(st.level, st.y_var_asymptotic);
    cost.emplace_back(st.level, st.cost_per_sample);
  }
  const int top = std::min(l_max, problem.hierarchy.max_level());
  for (int l = 0; l <= top; ++l) p.cost.push_back(problem.cost_per_sample(l));

  const RateFit w = fit_positive(weak, p.s);
  p.C_w = w.C;
  p.alpha_w = w.rate;
  if (p.alpha_w < alpha_w_floor) {
    p.alpha_w = alpha_w_floor;
    p.C_w = refit_constant(weak, p.s, p.alpha_w);
  }
  const RateFit v = fit_positive(var, p.s);
  p.C_beta = v.C;
  p.beta = v.rate;
  const RateFit c = fit_positive(cost, p.s);
  p.C_gamma = c.C;
  p.gamma = c.rate;
  // Levels too short to estimate their variance take the fitted model value.
  if (!var.empty()) {
    for (const auto& st : stats) {
      if (st.n < min_samples) {
        p.sigma2[static_cast<std::size_t>(st.level)] = p.C_beta * std::pow(p.s, -p.beta * st.level);
      }
    }
  }
  return p;
}

nlohmann::json to_json(const IterationRecord& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& s : r.stats) levels.push_back(to_json(s));
  return {{"iteration", r.iteration},
          {"tol_i", r.tol_i},
          {"L", r.L},
          {"samples", r.samples},
          {"params", to_json(r.params)},
          {"te", r.te},
          {"estimate", r.estimate},
          {"extrapolated_error", to_json(r.extrapolated)},
          {"levels", levels},
          {"proposal_source", r.proposal_source},
          {"stream", r.stream}};
}

ContinuationResult continuation(const Problem& problem, const ContinuationConfig& cfg) {
  if (cfg.screening_samples < 100) {
    throw std::domain_error("continuation: screening needs at least 100 samples per level");
  }
  if (cfg.L0 < 2) throw std::domain_error("continuation: L0 must be >= 2 to fit rates");
  if (cfg.L0 > cfg.L_max) throw std::domain_error("continuation: L0 > L_max");
  if (cfg.L_max > problem.hierarchy.max_level()) {
    throw std::out_of_range("continuation: L_max beyond the problem hierarchy");
  }
  ContinuationResult result;
  result.schedule = tol_schedule(cfg.tol0, cfg.tol, cfg.r1, cfg.r2);
  const int s = problem.hierarchy.refinement_factor();

  auto to_stats = [&](const MultilevelRun& run) {
    std::vector<LevelStats> out;
    for (const auto& chain : run.levels) {
      out.push_back(level_stats(chain, problem.cost_per_sample(chain.level)));
    }
    return out;
  };
  auto fine_pool = [](const MultilevelRun& run) {
    std::vector<std::vector<Point>> pool;
    for (const auto& chain : run.levels) pool.push_back(chain.fine_samples);
    return pool;
  };

  // Screening run.
  MultilevelOptions screen;
  screen.master_seed = cfg.master_seed;
  screen.purpose = StreamPurpose::Screening;
  screen.threads = cfg.threads;
  screen.keep_fine_samples = problem.adaptive_proposals ? 1000 : 0;
  std::vector<std::size_t> n(static_cast<std::size_t>(cfg.L0) + 1, cfg.screening_samples);
  MultilevelRun run = run_multilevel(problem, n, screen);
  std::vector<LevelStats> stats = to_stats(run);
  TuningParams params = fit_tuning_params(stats, problem, cfg.L_max, cfg.alpha_w_floor, cfg.min_fit_samples);
  result.screening_params = params;
  std::vector<std::vector<Point>> pool = fine_pool(run);

  int l_prev = cfg.L0;
  double te = std::numeric_limits<double>::infinity();
  const double tol_sq = cfg.tol * cfg.tol;
  int i = 1;
  while (i < result.schedule.i_E || te > tol_sq) {
    if (static_cast<std::size_t>(i) > cfg.max_iterations) {
      std::ostringstream os;
      os << "continuation did not converge within " << cfg.max_iterations
         << " iterations (last te = " << te << ", tol^2 = " << tol_sq << ")";
      throw ContinuationError(os.str(), result.history);
    }
    IterationRecord rec;
    rec.iteration = i;
    rec.tol_i = result.schedule.at(i);
    try {
      rec.L = select_levels(l_prev, cfg.L_max, rec.tol_i, params);
    } catch (const InfeasibleLevels& e) {
      throw ContinuationError(e.what(), result.history);
    }
    std::vector<double> sigma2, cost;
    for (int l = 0; l <= rec.L; ++l) {
      sigma2.push_back(params.sigma2_at(l));
      cost.push_back(params.cost_at(l));
    }
    rec.samples = sample_sizes(sigma2, cost, rec.tol_i, cfg.corrected_allocation);

    MultilevelOptions mo;
    mo.master_seed = cfg.master_seed;
    mo.stream = static_cast<std::uint64_t>(i);
    mo.threads = cfg.threads;
    mo.keep_fine_samples = problem.adaptive_proposals ? 1000 : 0;
    rec.stream = mo.stream;
    rec.proposal_source = "fixed";
    if (problem.adaptive_proposals) {
      if (cfg.warm_start_proposals) {
        mo.proposal_pool = pool;
        rec.proposal_source = "previous_iteration";
      } else {
        rec.proposal_source = "current_run";
      }
    }
    run = run_multilevel(problem, rec.samples, mo);
    stats = to_stats(run);
    if (problem.adaptive_proposals) {
      // Keep samples from levels not re-run this iteration.
      auto fresh = fine_pool(run);
      if (fresh.size() < pool.size()) {
        for (std::size_t l = 0; l < fresh.size(); ++l) pool[l] = std::move(fresh[l]);
      } else {
        pool = std::move(fresh);
      }
    }

    params = fit_tuning_params(stats, problem, cfg.L_max, cfg.alpha_w_floor, cfg.min_fit_samples);
    std::vector<double> terms;
    for (const auto& st : stats) terms.push_back(params.sigma2_at(st.level) / static_cast<double>(st.n));
    const double statistical = 2.0 * static_cast<double>(rec.L + 1) * stats::pairwise_sum(terms);
    const double weak = params.weak_error_at(rec.L);
    te = statistical + 2.0 * weak * weak;

    rec.params = params;
    rec.te = te;
    rec.estimate = ml_estimate(stats);
    rec.extrapolated = error_report(stats, params.alpha_w, s, cfg.tol);
    rec.stats = strip_raw(stats);
    result.history.push_back(rec);

    result.report.statistical = statistical;
    result.report.bias_sq = 2.0 * weak * weak;
    result.report.total = te;
    result.report.tol = cfg.tol;
    result.report.converged = te <= tol_sq;
    l_prev = rec.L;
    ++i;
  }
  result.estimate = ml_estimate(stats);
  result.final_stats = strip_raw(stats);
  return result;
}

}  // namespace mlmcmc
