#include "mlmcmc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mlmcmc/stats.hpp"

namespace mlmcmc {

double LevelStats::standard_error() const {
  if (n == 0) return 0.0;
  return std::sqrt(y_var_asymptotic / static_cast<double>(n));
}

std::vector<double> y_series(const ChainRun& run, int level) {
  if (run.level != level) {
    throw std::domain_error("y_series: run is level " + std::to_string(run.level) +
                            ", requested " + std::to_string(level));
  }
  if (level == 0) return run.qoi_fine;
  if (run.qoi_coarse.size() != run.qoi_fine.size()) {
    throw std::domain_error("y_series: coupled run missing coarse QoI values");
  }
  std::vector<double> y(run.size());
  for (std::size_t n = 0; n < y.size(); ++n) y[n] = run.qoi_fine[n] - run.qoi_coarse[n];
  return y;
}

std::size_t default_batch_size(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
}

double batched_means_var(std::span<const double> series, std::size_t batch_size) {
  if (batch_size < 1) throw std::domain_error("batched_means_var: batch size must be >= 1");
  const std::size_t batches = series.size() / batch_size;
  if (batches < 2) throw std::domain_error("batched_means_var: fewer than two batches");
  std::vector<double> means(batches);
  for (std::size_t k = 0; k < batches; ++k) {
    means[k] = stats::mean(series.subspan(k * batch_size, batch_size));
  }
  const double overall = stats::mean(means);
  std::vector<double> sq(batches);
  for (std::size_t k = 0; k < batches; ++k) sq[k] = (means[k] - overall) * (means[k] - overall);
  return static_cast<double>(batch_size) / static_cast<double>(batches - 1) *
         stats::pairwise_sum(sq);
}

std::size_t default_max_lag(std::size_t n) { return std::max<std::size_t>(1, n / 50); }

double iact(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) throw std::domain_error("iact: series shorter than max_lag");
  const double m = stats::mean(series);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = series[i] - m;
  double c0 = 0.0;
  for (double c : centered) c0 += c * c;
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double ck = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) ck += centered[i] * centered[i + k];
    const double rho = ck / c0;
    if (rho <= 0.0) break;
    tau += 2.0 * rho;
  }
  return std::max(1.0, tau);
}

double ml_estimate(std::span<const LevelStats> stats) {
  if (stats.empty()) throw std::domain_error("ml_estimate: no levels");
  std::vector<double> means(stats.size());
  for (std::size_t l = 0; l < stats.size(); ++l) {
    if (stats[l].level != static_cast<int>(l)) {
      throw std::domain_error("ml_estimate: levels must be contiguous from 0");
    }
    means[l] = stats[l].y_mean;
  }
  return stats::pairwise_sum(means);
}

LevelStats level_stats(const ChainRun& run, double cost_per_sample) {
  return level_stats(run, cost_per_sample, default_batch_size(run.size()));
}

LevelStats level_stats(const ChainRun& run, double cost_per_sample, std::size_t batch_size) {
  LevelStats s;
  s.level = run.level;
  s.raw_y = y_series(run, run.level);
  s.n = s.raw_y.size();
  s.y_mean = stats::mean(s.raw_y);
  s.y_var_sample = stats::sample_variance(s.raw_y);
  std::vector<double> abs_y(s.raw_y.size());
  std::transform(s.raw_y.begin(), s.raw_y.end(), abs_y.begin(),
                 [](double y) { return std::abs(y); });
  s.abs_y_mean = stats::mean(abs_y);
  // Short runs (screening with tiny N) fall back to the iid variance.
  s.y_var_asymptotic = s.n / batch_size >= 2 ? batched_means_var(s.raw_y, batch_size)
                                             : s.y_var_sample;
  s.sync_rate = run.level == 0 ? 1.0 : sync_rate(run);
  s.cost_per_sample = cost_per_sample;
  return s;
}

ErrorReport error_report(std::span<const LevelStats> stats, double alpha_w, int s, double tol) {
  if (!(alpha_w > 0.0)) throw std::domain_error("error_report: alpha_w must be positive");
  if (stats.size() < 2) throw std::domain_error("error_report: need L >= 1");
  if (!(tol > 0.0)) throw std::domain_error("error_report: tol must be positive");
  const double top = static_cast<double>(stats.size());  // L + 1
  std::vector<double> terms(stats.size());
  for (std::size_t l = 0; l < stats.size(); ++l) {
    if (stats[l].n == 0) throw std::domain_error("error_report: level without samples");
    terms[l] = stats[l].y_var_asymptotic / static_cast<double>(stats[l].n);
  }
  ErrorReport r;
  r.statistical = 2.0 * top * stats::pairwise_sum(terms);
  const double bias = std::abs(stats.back().y_mean) / (1.0 - std::pow(s, -alpha_w));
  r.bias_sq = 2.0 * bias * bias;
  r.total = r.statistical + r.bias_sq;
  r.tol = tol;
  r.converged = r.total <= tol * tol;
  return r;
}

nlohmann::json to_json(const LevelStats& s) {
  return {{"level", s.level},         {"n", s.n},
          {"y_mean", s.y_mean},       {"sigma2", s.y_var_asymptotic},
          {"var_y", s.y_var_sample},  {"mean_abs_y", s.abs_y_mean},
          {"sync_rate", s.sync_rate}, {"cost", s.cost_per_sample}};
}

nlohmann::json to_json(const ErrorReport& r) {
  return {{"statistical", r.statistical}, {"bias_sq", r.bias_sq}, {"total", r.total},
          {"tol", r.tol},                 {"converged", r.converged}};
}

}  // namespace mlmcmc
