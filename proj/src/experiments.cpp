#include "mlmcmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <locale>
#include <map>
#include <sstream>

#include "mlmcmc/parallel.hpp"
#include "mlmcmc/problems.hpp"
#include "mlmcmc/sampler.hpp"
#include "mlmcmc/stats.hpp"

namespace mlmcmc::experiments {

const char* const kVersion = "mlmcmc 0.1.0";

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Output helpers

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  Csv& add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw std::logic_error("Csv: row width mismatch");
    rows_.push_back(std::move(row));
    return *this;
  }

  void write(const std::filesystem::path& path, const RunConfig& c) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
      os << "\r\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    std::ofstream side(path.string() + ".meta.json", std::ios::binary);
    side << meta(c).dump(2) << "\n";
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string opt_num(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << "\n";
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json interval_json(const Interval& i) { return {{"mean", i.mean}, {"ci_lo", i.lo}, {"ci_hi", i.hi}}; }

json fit_json(const RateFit& f) {
  return {{"C", f.C}, {"rate", f.rate}, {"r_squared", f.r_squared}, {"rate_stderr", f.rate_stderr}};
}

// ---------------------------------------------------------------------------
// Config parsing

template <typename T>
T read_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(key, "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(key, "expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(key, "expected a non-negative integer");
      }
    } else {
      if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

int levels_needed(const RunConfig& c) { return c.mode == "continuation" ? c.L_max : c.levels; }

std::vector<std::size_t> per_level(const RunConfig& c) {
  return std::vector<std::size_t>(static_cast<std::size_t>(c.levels) + 1, c.samples);
}

MultilevelOptions chain_options(const RunConfig& c, std::uint64_t stream) {
  MultilevelOptions o;
  o.master_seed = c.master_seed;
  o.stream = stream;
  o.burnin = c.burnin;
  o.warm_start = c.init_policy == "warm";
  o.threads = 1;
  return o;
}

std::optional<RateFit> try_fit(const std::vector<std::pair<int, double>>& values, int s) {
  std::vector<std::pair<int, double>> pos;
  for (const auto& v : values) {
    if (v.second > 0.0 && std::isfinite(v.second)) pos.push_back(v);
  }
  if (pos.size() < 2) return std::nullopt;
  return fit_rates(pos, s);
}

double marginal_var(const std::vector<double>& series) {
  const std::size_t m = default_batch_size(series.size());
  return series.size() / m >= 2 ? batched_means_var(series, m) : stats::sample_variance(series);
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  const std::map<std::string, std::function<void(const json&)>> setters{
      {"problem", [&](const json& v) { c.problem = read_as<std::string>(v, "problem"); }},
      {"mode",
       [&](const json& v) {
         c.mode = read_as<std::string>(v, "mode");
         if (c.mode == "fixed-run") c.mode = "run";
       }},
      {"levels", [&](const json& v) { c.levels = read_as<int>(v, "levels"); }},
      {"samples", [&](const json& v) { c.samples = read_as<std::size_t>(v, "samples"); }},
      {"burnin",
       [&](const json& v) {
         if (v.is_null()) {
           c.burnin.reset();
         } else {
           c.burnin = read_as<std::size_t>(v, "burnin");
         }
       }},
      {"replicas", [&](const json& v) { c.replicas = read_as<std::size_t>(v, "replicas"); }},
      {"tol", [&](const json& v) { c.tol = read_as<double>(v, "tol"); }},
      {"tol0", [&](const json& v) { c.tol0 = read_as<double>(v, "tol0"); }},
      {"r1", [&](const json& v) { c.r1 = read_as<double>(v, "r1"); }},
      {"r2", [&](const json& v) { c.r2 = read_as<double>(v, "r2"); }},
      {"screening_samples",
       [&](const json& v) { c.screening_samples = read_as<std::size_t>(v, "screening_samples"); }},
      {"L0", [&](const json& v) { c.L0 = read_as<int>(v, "L0"); }},
      {"L_max", [&](const json& v) { c.L_max = read_as<int>(v, "L_max"); }},
      {"master_seed", [&](const json& v) { c.master_seed = read_as<std::uint64_t>(v, "master_seed"); }},
      {"output_dir", [&](const json& v) { c.output_dir = read_as<std::string>(v, "output_dir"); }},
      {"emit_trajectories",
       [&](const json& v) { c.emit_trajectories = read_as<bool>(v, "emit_trajectories"); }},
      {"threads", [&](const json& v) { c.threads = read_as<std::size_t>(v, "threads"); }},
      {"paper_scale", [&](const json& v) { c.paper_scale = read_as<bool>(v, "paper_scale"); }},
      {"corrected_allocation",
       [&](const json& v) { c.corrected_allocation = read_as<bool>(v, "corrected_allocation"); }},
      {"init_policy", [&](const json& v) { c.init_policy = read_as<std::string>(v, "init_policy"); }},
      {"grid_n", [&](const json& v) { c.grid_n = read_as<int>(v, "grid_n"); }},
      {"grid_a", [&](const json& v) { c.grid_a = read_as<double>(v, "grid_a"); }},
      {"grid_b", [&](const json& v) { c.grid_b = read_as<double>(v, "grid_b"); }},
      {"k_max", [&](const json& v) { c.k_max = read_as<int>(v, "k_max"); }},
      {"mse_samples", [&](const json& v) { c.mse_samples = read_as<std::size_t>(v, "mse_samples"); }},
      {"mse_replicas", [&](const json& v) { c.mse_replicas = read_as<std::size_t>(v, "mse_replicas"); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown configuration key");
    it->second(value);
  }
  return c;
}

json to_json(const RunConfig& c) {
  return {{"problem", c.problem},
          {"mode", c.mode},
          {"levels", c.levels},
          {"samples", c.samples},
          {"burnin", c.burnin ? json(*c.burnin) : json(nullptr)},
          {"replicas", c.replicas},
          {"tol", c.tol},
          {"tol0", c.tol0},
          {"r1", c.r1},
          {"r2", c.r2},
          {"screening_samples", c.screening_samples},
          {"L0", c.L0},
          {"L_max", c.L_max},
          {"master_seed", c.master_seed},
          {"output_dir", c.output_dir},
          {"emit_trajectories", c.emit_trajectories},
          {"threads", c.threads},
          {"paper_scale", c.paper_scale},
          {"corrected_allocation", c.corrected_allocation},
          {"init_policy", c.init_policy},
          {"grid_n", c.grid_n},
          {"grid_a", opt_json(c.grid_a)},
          {"grid_b", opt_json(c.grid_b)},
          {"k_max", c.k_max},
          {"mse_samples", c.mse_samples},
          {"mse_replicas", c.mse_replicas}};
}

void validate(const RunConfig& c) {
  static const std::vector<std::string> problems{"nested", "shifting", "darcy"};
  static const std::vector<std::string> modes{"run", "rates", "continuation", "oracle-check",
                                              "baseline-compare"};
  if (std::find(problems.begin(), problems.end(), c.problem) == problems.end()) {
    throw ConfigError("problem", "unknown problem '" + c.problem + "' (nested, shifting, darcy)");
  }
  if (std::find(modes.begin(), modes.end(), c.mode) == modes.end()) {
    throw ConfigError("mode", "unknown mode '" + c.mode + "'");
  }
  if (c.init_policy != "diagonal" && c.init_policy != "warm") {
    throw ConfigError("init_policy", "must be 'diagonal' or 'warm'");
  }
  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
  const bool darcy = c.problem == "darcy";
  if (darcy && (c.mode == "oracle-check" || c.mode == "baseline-compare")) {
    throw ConfigError("problem", c.mode + " supports only the 1-D problems (nested, shifting)");
  }
  const int level_cap = darcy ? DarcySolver::kMaxLevel : 30;
  const int min_levels = c.mode == "run" ? 0 : (c.mode == "rates" ? 2 : 1);
  if (c.mode != "continuation" && (c.levels < min_levels || c.levels > level_cap)) {
    throw ConfigError("levels", "must be in [" + std::to_string(min_levels) + ", " +
                                    std::to_string(level_cap) + "] for " + c.mode);
  }
  if (c.mode == "run" && darcy && c.levels < 1) throw ConfigError("levels", "darcy needs levels >= 1");
  if (c.samples < 1) throw ConfigError("samples", "must be >= 1");

  if (c.mode == "rates" && c.replicas < 2) throw ConfigError("replicas", "need ≥2 replicas for CIs");
  if (c.replicas < 1) throw ConfigError("replicas", "must be >= 1");

  if (c.mode == "continuation") {
    if (!(c.tol > 0.0)) throw ConfigError("tol", "must be positive");
    if (!(c.tol < c.tol0)) throw ConfigError("tol", "must be < tol0");
    if (!(c.r2 > 1.0)) throw ConfigError("r2", "must be > 1");
    if (!(c.r1 >= c.r2)) throw ConfigError("r1", "must be >= r2");
    if (c.screening_samples < 100) throw ConfigError("screening_samples", "must be >= 100");
    if (c.L0 < 2) throw ConfigError("L0", "must be >= 2");
    if (c.L_max < c.L0) throw ConfigError("L_max", "must be >= L0");
    if (c.L_max > level_cap) throw ConfigError("L_max", "must be <= " + std::to_string(level_cap));
  }
  if (c.mode == "oracle-check") {
    if (c.grid_n < 2 || c.grid_n > 128) throw ConfigError("grid_n", "must be in [2, 128]");
    if (c.grid_a.has_value() != c.grid_b.has_value()) {
      throw ConfigError(c.grid_a ? "grid_b" : "grid_a", "grid_a and grid_b must be given together");
    }
    if (c.grid_a && !(*c.grid_b > *c.grid_a)) throw ConfigError("grid_b", "must exceed grid_a");
    if (c.k_max < 1) throw ConfigError("k_max", "must be >= 1");
    if (c.mse_samples < 1) throw ConfigError("mse_samples", "must be >= 1");
    if (c.mse_replicas < 1) throw ConfigError("mse_replicas", "must be >= 1");
  }
}

Problem make_problem(const RunConfig& c) {
  const int l_max = std::max(1, levels_needed(c));
  if (c.problem == "nested") return nested_gaussians(l_max);
  if (c.problem == "shifting") return shifting_gaussians(l_max);
  if (c.problem == "darcy") {
    DarcySpec spec;
    spec.l_max = l_max;
    return darcy_problem(spec);
  }
  throw ConfigError("problem", "unknown problem '" + c.problem + "'");
}

json meta(const RunConfig& c) {
  json m{{"config", to_json(c)}, {"master_seed", c.master_seed}, {"version", kVersion}};
  if (c.problem == "darcy") {
    const DarcySpec spec;
    m["darcy"] = {{"theta_true", spec.theta_true},
                  {"data_seed", spec.data_seed},
                  {"noise_std", spec.noise_std}};
  }
  return m;
}

Interval t_interval(std::span<const double> values) {
  Interval out;
  out.mean = stats::mean(values);
  out.lo = out.hi = out.mean;
  if (values.size() >= 2) {
    const double half = stats::student_t_quantile(0.05, values.size() - 1) *
                        std::sqrt(stats::sample_variance(values) / static_cast<double>(values.size()));
    out.lo = out.mean - half;
    out.hi = out.mean + half;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rates

RatesResult rates_study(const Problem& problem, const RunConfig& c) {
  const std::vector<std::size_t> n = per_level(c);
  const std::size_t L = n.size();
  struct Cell {
    double abs_y = 0, y = 0, var = 0, sigma2 = 0, sync = 1, marg = 0, marg_var = 0;
  };
  std::vector<std::vector<Cell>> cells(c.replicas, std::vector<Cell>(L));
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    const MultilevelRun run = run_multilevel(problem, n, chain_options(c, r));
    for (std::size_t l = 0; l < L; ++l) {
      const ChainRun& chain = run.levels[l];
      const LevelStats st = level_stats(chain, problem.cost_per_sample(static_cast<int>(l)));
      Cell& cell = cells[r][l];
      cell.abs_y = st.abs_y_mean;
      cell.y = st.y_mean;
      cell.var = st.y_var_sample;
      cell.sigma2 = st.y_var_asymptotic;
      cell.sync = st.sync_rate;
      cell.marg = stats::mean(chain.qoi_fine);
      cell.marg_var = marginal_var(chain.qoi_fine);
    }
  });

  RatesResult out;
  const int s = problem.hierarchy.refinement_factor();
  std::vector<std::pair<int, double>> abs_vals, signed_vals, var_vals;
  for (std::size_t l = 0; l < L; ++l) {
    auto column = [&](double Cell::*field) {
      std::vector<double> v(c.replicas);
      for (std::size_t r = 0; r < c.replicas; ++r) v[r] = cells[r][l].*field;
      return v;
    };
    LevelSummary ls;
    ls.level = static_cast<int>(l);
    ls.n = n[l];
    ls.mean_abs_y = t_interval(column(&Cell::abs_y));
    ls.mean_y = t_interval(column(&Cell::y));
    ls.abs_mean_y = std::abs(ls.mean_y.mean);
    ls.var_y = t_interval(column(&Cell::var));
    ls.sigma2 = t_interval(column(&Cell::sigma2));
    ls.sync_rate = t_interval(column(&Cell::sync));
    ls.marginal_mean = stats::mean(column(&Cell::marg));
    ls.marginal_se = std::sqrt(stats::pairwise_sum(column(&Cell::marg_var)) / static_cast<double>(n[l])) /
                     static_cast<double>(c.replicas);
    if (problem.exact_level_mean) ls.exact_marginal = problem.exact_level_mean(static_cast<int>(l));
    if (l >= 1) {
      abs_vals.emplace_back(static_cast<int>(l), ls.mean_abs_y.mean);
      signed_vals.emplace_back(static_cast<int>(l), ls.abs_mean_y);
      var_vals.emplace_back(static_cast<int>(l), ls.var_y.mean);
    }
    out.levels.push_back(ls);
  }
  const RateFit none{0.0, std::nan(""), 0.0, 0.0};
  out.alpha_w = try_fit(abs_vals, s).value_or(none);
  out.alpha_w_signed = try_fit(signed_vals, s).value_or(none);
  out.beta = try_fit(var_vals, s).value_or(none);

  std::vector<double> aw, bt;
  for (std::size_t r = 0; r < c.replicas; ++r) {
    std::vector<std::pair<int, double>> a, v;
    for (std::size_t l = 1; l < L; ++l) {
      a.emplace_back(static_cast<int>(l), cells[r][l].abs_y);
      v.emplace_back(static_cast<int>(l), cells[r][l].var);
    }
    if (auto f = try_fit(a, s)) aw.push_back(f->rate);
    if (auto f = try_fit(v, s)) bt.push_back(f->rate);
  }
  if (!aw.empty()) out.alpha_w_replicas = t_interval(aw);
  if (!bt.empty()) out.beta_replicas = t_interval(bt);
  return out;
}

bool write_rates(const std::filesystem::path& dir, const RatesResult& r, const RunConfig& c) {
  std::filesystem::create_directories(dir);
  Csv csv({"level", "n", "mean_absY", "mean_absY_ci_lo", "mean_absY_ci_hi", "abs_meanY", "meanY", "meanY_ci_lo",
           "meanY_ci_hi", "var_Y", "var_Y_ci_lo", "var_Y_ci_hi", "sigma2", "sync_rate", "sync_rate_ci_lo",
           "sync_rate_ci_hi", "marginal_mean", "marginal_se", "exact_marginal"});
  json levels = json::array();
  for (const auto& l : r.levels) {
    csv.add({num(l.level), num(l.n), num(l.mean_abs_y.mean), num(l.mean_abs_y.lo), num(l.mean_abs_y.hi),
             num(l.abs_mean_y), num(l.mean_y.mean), num(l.mean_y.lo), num(l.mean_y.hi), num(l.var_y.mean), num(l.var_y.lo),
             num(l.var_y.hi), num(l.sigma2.mean), num(l.sync_rate.mean), num(l.sync_rate.lo),
             num(l.sync_rate.hi), num(l.marginal_mean), num(l.marginal_se), opt_num(l.exact_marginal)});
    levels.push_back({{"level", l.level},
                      {"n", l.n},
                      {"mean_absY", interval_json(l.mean_abs_y)},
                      {"meanY", interval_json(l.mean_y)},
                      {"var_Y", interval_json(l.var_y)},
                      {"sigma2", interval_json(l.sigma2)},
                      {"sync_rate", interval_json(l.sync_rate)},
                      {"marginal_mean", l.marginal_mean},
                      {"marginal_se", l.marginal_se},
                      {"exact_marginal", opt_json(l.exact_marginal)}});
  }
  csv.write(dir / "rates.csv", c);
  write_json(dir / "rates.json", {{"meta", meta(c)},
                                  {"alpha_w", fit_json(r.alpha_w)},
                                  {"alpha_w_ci", interval_json(r.alpha_w_replicas)},
                                  {"alpha_w_signed", fit_json(r.alpha_w_signed)},
                                  {"beta", fit_json(r.beta)},
                                  {"beta_ci", interval_json(r.beta_replicas)},
                                  {"levels", levels}});
  return std::isfinite(r.alpha_w.rate) && std::isfinite(r.beta.rate);
}

// ---------------------------------------------------------------------------
// Continuation

ContinuationStudy continuation_study(const Problem& problem, const RunConfig& c) {
  ContinuationStudy study;
  study.runs.resize(c.replicas);
  parallel_for(c.replicas, c.threads, [&](std::size_t r) {
    ContinuationRun& run = study.runs[r];
    run.seed = c.master_seed + r;
    ContinuationConfig cc;
    cc.tol0 = c.tol0;
    cc.tol = c.tol;
    cc.r1 = c.r1;
    cc.r2 = c.r2;
    cc.screening_samples = c.screening_samples;
    cc.L0 = c.L0;
    cc.L_max = c.L_max;
    cc.master_seed = run.seed;
    cc.corrected_allocation = c.corrected_allocation;
    cc.threads = 1;
    try {
      run.result = continuation(problem, cc);
      run.converged = run.result.report.converged;
      if (problem.exact_limit) {
        const double e = run.result.estimate - *problem.exact_limit;
        run.squared_error = e * e;
      }
    } catch (const ContinuationError& e) {
      run.error = e.what();
      run.result.history = e.history();
    }
  });
  study.all_converged = std::all_of(study.runs.begin(), study.runs.end(),
                                    [](const ContinuationRun& r) { return r.converged; });
  std::vector<double> sq;
  for (const auto& r : study.runs) {
    if (r.squared_error) sq.push_back(*r.squared_error);
  }
  if (!sq.empty() && sq.size() == study.runs.size()) study.mse = stats::mean(sq);
  return study;
}

bool write_continuation(const std::filesystem::path& dir, const ContinuationStudy& s, const RunConfig& c) {
  std::filesystem::create_directories(dir);
  json history = json::array();
  json runs = json::array();
  std::vector<double> estimates;
  for (const auto& r : s.runs) {
    json records = json::array();
    for (const auto& rec : r.result.history) records.push_back(to_json(rec));
    history.push_back({{"seed", r.seed}, {"iterations", records}});
    json entry{{"seed", r.seed},
               {"converged", r.converged},
               {"iterations", r.result.history.size()},
               {"squared_error", opt_json(r.squared_error)}};
    if (r.converged) {
      entry["estimate"] = r.result.estimate;
      entry["te"] = r.result.report.total;
      entry["L"] = r.result.history.back().L;
      estimates.push_back(r.result.estimate);
    } else {
      entry["error"] = r.error;
    }
    runs.push_back(entry);
  }
  write_json(dir / "history.json", {{"meta", meta(c)}, {"runs", history}});
  const bool mse_ok = !s.mse || *s.mse <= c.tol * c.tol;
  json est{{"meta", meta(c)},
           {"tol", c.tol},
           {"converged", s.all_converged},
           {"runs", runs},
           {"mse", opt_json(s.mse)},
           {"mse_within_tol2", mse_ok}};
  if (!estimates.empty()) est["estimate"] = stats::mean(estimates);
  if (s.runs.size() == 1 && s.runs.front().converged) est["te"] = s.runs.front().result.report.total;
  write_json(dir / "estimate.json", est);
  return s.all_converged && mse_ok;
}

// ---------------------------------------------------------------------------
// Baseline comparison

std::vector<CompareRow> baseline_compare(const Problem& problem, const RunConfig& c) {
  if (problem.adaptive_proposals) {
    throw std::invalid_argument("baseline-compare supports only problems with fixed proposals");
  }
  const std::vector<std::size_t> n = per_level(c);
  const MultilevelRun coupled = run_multilevel(problem, n, chain_options(c, 0));
  BaselineOptions bo;
  bo.master_seed = c.master_seed;
  bo.burnin = c.burnin;
  const BaselineResult base = subsampling_baseline(problem, n, bo);

  std::vector<CompareRow> rows;
  auto row = [&](const ChainRun& run, const std::string& method) {
    CompareRow r;
    r.level = run.level;
    r.method = method;
    r.n = run.size();
    r.marginal_mean = stats::mean(run.qoi_fine);
    r.se = std::sqrt(marginal_var(run.qoi_fine) / static_cast<double>(run.size()));
    r.sync_rate = run.level == 0 ? 1.0 : sync_rate(run);
    if (problem.exact_level_mean) r.exact = problem.exact_level_mean(run.level);
    if (r.exact && r.se > 0.0) r.z = (r.marginal_mean - *r.exact) / r.se;
    return r;
  };
  for (std::size_t l = 0; l < n.size(); ++l) {
    rows.push_back(row(coupled.levels[l], "coupled_imh"));
    rows.push_back(row(base.levels[l].run, "subsampling"));
  }
  return rows;
}

bool write_compare(const std::filesystem::path& dir, const std::vector<CompareRow>& rows, const RunConfig& c) {
  std::filesystem::create_directories(dir);
  Csv csv({"level", "method", "marginal_mean", "se", "sync_rate", "n", "exact_mean", "z"});
  bool ok = true;
  for (const auto& r : rows) {
    csv.add({num(r.level), r.method, num(r.marginal_mean), num(r.se), num(r.sync_rate), num(r.n),
             opt_num(r.exact), opt_num(r.z)});
    if (r.method == "coupled_imh" && r.z && std::abs(*r.z) >= 4.0) ok = false;
  }
  csv.write(dir / "compare.csv", c);
  return ok;
}

// ---------------------------------------------------------------------------
// Oracle

std::vector<oracle::OracleReport> oracle_study(const Problem& problem, const RunConfig& c) {
  oracle::OracleOptions o;
  o.grid_n = c.grid_n;
  o.k_max = c.k_max;
  o.mse_samples = c.mse_samples;
  o.mse_replicas = c.mse_replicas;
  o.seed = c.master_seed;
  o.threads = c.threads;
  if (c.grid_a) o.grid = oracle::GridSpec{*c.grid_a, *c.grid_b, c.grid_n};
  std::vector<oracle::OracleReport> out;
  for (int l = 1; l <= c.levels; ++l) out.push_back(oracle::run_oracle(problem, l, o));
  return out;
}

bool write_oracle(const std::filesystem::path& dir, const std::vector<oracle::OracleReport>& reports,
                  const RunConfig& c) {
  std::filesystem::create_directories(dir);
  json levels = json::array();
  bool ok = true;
  std::vector<double> offdiag, desync;
  for (const auto& r : reports) {
    levels.push_back(oracle::to_json(r));
    ok = ok && r.all_ok();
    offdiag.push_back(r.offdiag_mass);
    desync.push_back(r.max_desync);
  }
  auto decreasing = [](const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::less_equal<>()) == v.end();
  };
  write_json(dir / "oracle.json", {{"meta", meta(c)},
                                   {"levels", levels},
                                   {"all_checks_pass", ok},
                                   {"offdiag_mass_decreasing", decreasing(offdiag)},
                                   {"max_desync_decreasing", decreasing(desync)}});
  return ok;
}

// ---------------------------------------------------------------------------
// Fixed run

bool run_fixed(const Problem& problem, const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  MultilevelOptions o = chain_options(c, 0);
  o.keep_trajectory = c.emit_trajectories;
  o.threads = c.threads;
  const MultilevelRun run = run_multilevel(problem, per_level(c), o);

  std::vector<LevelStats> stats;
  Csv csv({"level", "n", "y_mean", "sigma2", "var_y", "mean_abs_y", "sync_rate", "cost_per_sample", "work",
           "acceptance_rate"});
  json levels = json::array();
  double work = 0.0;
  for (const auto& chain : run.levels) {
    LevelStats st = level_stats(chain, problem.cost_per_sample(chain.level));
    csv.add({num(st.level), num(st.n), num(st.y_mean), num(st.y_var_asymptotic), num(st.y_var_sample),
             num(st.abs_y_mean), num(st.sync_rate), num(st.cost_per_sample), num(chain.work),
             num(chain.acceptance_rate())});
    levels.push_back(to_json(st));
    work += chain.work;
    if (c.emit_trajectories) {
      std::ofstream os(dir / ("trajectory_level" + std::to_string(chain.level) + ".csv"), std::ios::binary);
      write_trajectory_csv(os, chain);
      std::ofstream side(dir / ("trajectory_level" + std::to_string(chain.level) + ".csv.meta.json"),
                         std::ios::binary);
      side << meta(c).dump(2) << "\n";
    }
    st.raw_y.clear();
    stats.push_back(std::move(st));
  }
  csv.write(dir / "levels.csv", c);
  json summary{{"meta", meta(c)}, {"estimate", ml_estimate(stats)}, {"work", work}, {"levels", levels}};
  if (problem.exact_limit) summary["exact_limit"] = *problem.exact_limit;
  write_json(dir / "summary.json", summary);
  return true;
}

}  // namespace mlmcmc::experiments
