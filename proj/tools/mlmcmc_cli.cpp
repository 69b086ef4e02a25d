// mlmcmc: batch runner for the multilevel MCMC studies.
//
// Precedence, lowest first: built-in defaults, --config file, command-line
// flags. Threads fall back to MLMC_THREADS, then hardware parallelism.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mlmcmc/experiments.hpp"
#include "mlmcmc/parallel.hpp"

namespace ex = mlmcmc::experiments;

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  bool paper_scale = false;
  std::optional<std::string> problem;
  std::optional<int> levels;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> replicas;
  std::optional<double> tol;
  bool trajectories = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (flat keys)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--paper-scale", f.paper_scale, "100 replicas");
  cmd->add_option("--problem", f.problem, "nested | shifting | darcy");
  cmd->add_option("--levels", f.levels, "finest level");
  cmd->add_option("--samples", f.samples, "samples per level");
  cmd->add_option("--replicas", f.replicas, "independent replicas");
  cmd->add_option("--tol", f.tol, "continuation tolerance");
}

ex::RunConfig resolve(const std::string& mode, const Flags& f) {
  ex::RunConfig c;
  c.threads = mlmcmc::default_thread_count();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ex::ConfigError("config", "cannot read " + f.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ex::ConfigError("config", e.what());
    }
    c = ex::config_from_json(j, c);
  }
  c.mode = mode;
  if (f.seed) c.master_seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.out) c.output_dir = *f.out;
  if (f.problem) c.problem = *f.problem;
  if (f.levels) c.levels = *f.levels;
  if (f.samples) c.samples = *f.samples;
  if (f.replicas) c.replicas = *f.replicas;
  if (f.tol) c.tol = *f.tol;
  if (f.trajectories) c.emit_trajectories = true;
  if (f.paper_scale) c.paper_scale = true;
  if (c.paper_scale) c.replicas = 100;
  ex::validate(c);
  return c;
}

bool execute(const ex::RunConfig& c) {
  const mlmcmc::Problem problem = ex::make_problem(c);
  const std::filesystem::path dir = c.output_dir;
  if (c.mode == "rates") {
    const ex::RatesResult r = ex::rates_study(problem, c);
    std::cout << "alpha_w = " << r.alpha_w.rate << "  beta = " << r.beta.rate << "\n";
    return ex::write_rates(dir, r, c);
  }
  if (c.mode == "continuation") {
    const ex::ContinuationStudy s = ex::continuation_study(problem, c);
    std::size_t ok = 0;
    for (const auto& run : s.runs) ok += run.converged ? 1 : 0;
    std::cout << ok << "/" << s.runs.size() << " runs converged";
    if (s.mse) std::cout << ", mse = " << *s.mse << " (tol^2 = " << c.tol * c.tol << ")";
    std::cout << "\n";
    return ex::write_continuation(dir, s, c);
  }
  if (c.mode == "oracle-check") {
    const auto reports = ex::oracle_study(problem, c);
    for (const auto& r : reports) {
      std::cout << "level " << r.level << ": tv " << r.marginal_tv << ", gamma_ps " << r.gap.gamma_ps
                << ", mse " << r.mse.empirical << " <= " << r.mse.bound << (r.all_ok() ? "  ok" : "  FAIL")
                << "\n";
    }
    return ex::write_oracle(dir, reports, c);
  }
  if (c.mode == "baseline-compare") {
    const auto rows = ex::baseline_compare(problem, c);
    for (const auto& r : rows) {
      std::cout << "level " << r.level << " " << r.method << ": mean " << r.marginal_mean << " se " << r.se;
      if (r.z) std::cout << " z " << *r.z;
      std::cout << "\n";
    }
    return ex::write_compare(dir, rows, c);
  }
  return ex::run_fixed(problem, c, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel MCMC with coupled independent Metropolis-Hastings chains"};
  app.set_version_flag("--version", std::string(ex::kVersion));
  app.require_subcommand(1);

  Flags flags;
  std::string mode;
  const std::pair<const char*, const char*> commands[] = {
      {"rates", "level-wise rate study over independent replicas"},
      {"continuation", "self-tuning continuation runs"},
      {"oracle-check", "finite-state verification of the coupled kernel"},
      {"baseline-compare", "coupled IMH against the sub-sampling baseline"},
      {"run", "one multilevel run with fixed samples per level"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    if (std::string(name) == "run") cmd->add_flag("--trajectories", flags.trajectories, "write trajectories");
    cmd->callback([&mode, name] { mode = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const ex::RunConfig config = resolve(mode, flags);
    return execute(config) ? 0 : 1;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
