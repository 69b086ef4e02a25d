#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mlmcmc/problems.hpp"
#include "mlmcmc/stats.hpp"

namespace mlmcmc {

// Orthonormal eigenvectors (columns) and eigenvalues of the cell-centered
// Neumann Laplacian in x2: cos(pi m (j + 1/2) / n), 2 - 2 cos(pi m / n).
struct DarcySolver::Basis {
  Eigen::MatrixXd modes;
  Eigen::VectorXd eigenvalues;
};

DarcySolver::DarcySolver(int level) : level_(level) {
  if (level < 0 || level > kMaxLevel) {
    throw std::out_of_range("DarcySolver: level " + std::to_string(level) + " outside [0, " +
                            std::to_string(kMaxLevel) + "]");
  }
  cells_ = kBaseCells << level;
  auto basis = std::make_shared<Basis>();
  const Eigen::Index n = cells_;
  basis->modes.resize(n, n);
  basis->eigenvalues.resize(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double scale = std::sqrt((m == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      basis->modes(j, m) = scale * std::cos(std::numbers::pi * m * (j + 0.5) / static_cast<double>(n));
    }
    basis->eigenvalues[m] = 2.0 - 2.0 * std::cos(std::numbers::pi * m / static_cast<double>(n));
  }
  basis_ = std::move(basis);
}

double DarcySolver::permeability(const Point& theta, double x1) {
  if (theta.dim() != 4) throw std::invalid_argument("DarcySolver: theta must have 4 coordinates");
  const double pi = std::numbers::pi;
  return std::exp(theta[0] * std::cos(pi * x1) + theta[1] / 2.0 * std::sin(pi * x1) +
                  theta[2] / 3.0 * std::cos(2.0 * pi * x1) + theta[3] / 4.0 * std::sin(2.0 * pi * x1));
}

std::vector<std::array<double, 2>> DarcySolver::observation_points() {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(kObsPerSide * kObsPerSide);
  for (int j = 1; j <= kObsPerSide; ++j) {
    for (int i = 1; i <= kObsPerSide; ++i) pts.push_back({i / 10.0, j / 10.0});
  }
  return pts;
}

std::vector<std::pair<int, double>> DarcySolver::observation_stencil(std::size_t k) const {
  const auto pts = observation_points();
  if (k >= pts.size()) throw std::out_of_range("observation_stencil: index out of range");
  const double h = 1.0 / cells_;
  // Cell centers sit at (i + 1/2) h; every observation point is inside the
  // hull of the centers, so no extrapolation is needed.
  auto locate = [&](double x) {
    const double s = x / h - 0.5;
    int i0 = static_cast<int>(std::floor(s));
    i0 = std::clamp(i0, 0, cells_ - 2);
    return std::pair<int, double>{i0, s - i0};
  };
  const auto [i0, fx] = locate(pts[k][0]);
  const auto [j0, fy] = locate(pts[k][1]);
  return {{j0 * cells_ + i0, (1 - fx) * (1 - fy)},
          {j0 * cells_ + i0 + 1, fx * (1 - fy)},
          {(j0 + 1) * cells_ + i0, (1 - fx) * fy},
          {(j0 + 1) * cells_ + i0 + 1, fx * fy}};
}

DarcySolution DarcySolver::solve(const Point& theta) const {
  require_finite(theta, "DarcySolver::solve");
  return solve_with([&theta](double x1) { return permeability(theta, x1); });
}

DarcySolution DarcySolver::solve_with(const std::function<double(double)>& kappa) const {
  const int n = cells_;
  const Eigen::Index nn = n;
  const double h = 1.0 / n;
  Eigen::VectorXd k_cell(nn);
  for (int i = 0; i < n; ++i) {
    k_cell[i] = kappa((i + 0.5) * h);
    if (!(k_cell[i] > 0.0) || !std::isfinite(k_cell[i])) {
      throw std::domain_error("DarcySolver: permeability must be positive and finite");
    }
  }
  // Transmissibility of the face left of column i; the Dirichlet boundary
  // sits half a cell from the first and last column.
  Eigen::VectorXd t_face(nn + 1);
  t_face[0] = 2.0 * k_cell[0];
  t_face[nn] = 2.0 * k_cell[nn - 1];
  for (int i = 1; i < n; ++i) {
    t_face[i] = 2.0 * k_cell[i - 1] * k_cell[i] / (k_cell[i - 1] + k_cell[i]);
  }

  // Grids are stored column-major as (x1 index, x2 index), so u[j * n + i]
  // is entry (i, j).
  using Mat = Eigen::MatrixXd;
  auto apply = [&](const Mat& u) {
    Mat out(nn, nn);
    for (Eigen::Index j = 0; j < nn; ++j) {
      for (Eigen::Index i = 0; i < nn; ++i) {
        double v = (t_face[i] + t_face[i + 1]) * u(i, j);
        if (i > 0) v -= t_face[i] * u(i - 1, j);
        if (i < nn - 1) v -= t_face[i + 1] * u(i + 1, j);
        if (j > 0) v += k_cell[i] * (u(i, j) - u(i, j - 1));
        if (j < nn - 1) v += k_cell[i] * (u(i, j) - u(i, j + 1));
        out(i, j) = v;
      }
    }
    return out;
  };
  const Basis& basis = *basis_;
  auto precondition = [&](const Mat& r) {
    Mat hat = r * basis.modes;
    std::vector<double> c(static_cast<std::size_t>(n));
    for (Eigen::Index m = 0; m < nn; ++m) {
      // Thomas algorithm on (T + lambda_m K) v = hat(:, m).
      const double lam = basis.eigenvalues[m];
      auto diag = [&](Eigen::Index i) { return t_face[i] + t_face[i + 1] + lam * k_cell[i]; };
      double denom = diag(0);
      c[0] = -t_face[1] / denom;
      hat(0, m) /= denom;
      for (Eigen::Index i = 1; i < nn; ++i) {
        const double a = -t_face[i];
        denom = diag(i) - a * c[static_cast<std::size_t>(i - 1)];
        c[static_cast<std::size_t>(i)] = i < nn - 1 ? -t_face[i + 1] / denom : 0.0;
        hat(i, m) = (hat(i, m) - a * hat(i - 1, m)) / denom;
      }
      for (Eigen::Index i = nn - 2; i >= 0; --i) hat(i, m) -= c[static_cast<std::size_t>(i)] * hat(i + 1, m);
    }
    return Mat(hat * basis.modes.transpose());
  };

  const Mat b = Mat::Constant(nn, nn, h * h);
  const double b_norm = b.norm();
  Mat u = Mat::Zero(nn, nn);
  Mat r = b;
  Mat z = precondition(r);
  Mat p = z;
  double rz = (r.array() * z.array()).sum();
  int it = 0;
  constexpr int kMaxIterations = 100000;
  constexpr double kTolerance = 1e-10;
  while (r.norm() > kTolerance * b_norm) {
    if (it == kMaxIterations) {
      throw std::runtime_error("DarcySolver: CG did not converge in " + std::to_string(it) +
                               " iterations (relative residual " + std::to_string(r.norm() / b_norm) + ")");
    }
    const Mat ap = apply(p);
    const double step = rz / (p.array() * ap.array()).sum();
    u += step * p;
    r -= step * ap;
    z = precondition(r);
    const double rz_next = (r.array() * z.array()).sum();
    p = z + (rz_next / rz) * p;
    rz = rz_next;
    ++it;
  }

  DarcySolution sol;
  sol.cells = n;
  sol.cg_iterations = it;
  sol.u.assign(u.data(), u.data() + u.size());
  sol.qoi = h * h * stats::pairwise_sum(sol.u);
  const std::size_t n_obs = static_cast<std::size_t>(kObsPerSide) * kObsPerSide;
  sol.observations.resize(n_obs);
  for (std::size_t k = 0; k < n_obs; ++k) {
    double v = 0.0;
    for (const auto& [idx, wgt] : observation_stencil(k)) v += wgt * sol.u[static_cast<std::size_t>(idx)];
    sol.observations[k] = v;
  }
  return sol;
}

std::vector<double> darcy_synthetic_data(const DarcySpec& spec) {
  if (!(spec.noise_std > 0.0)) throw std::invalid_argument("darcy: noise_std must be positive");
  const DarcySolver solver(spec.data_level());
  const Point truth{spec.theta_true[0], spec.theta_true[1], spec.theta_true[2], spec.theta_true[3]};
  std::vector<double> y = solver.solve(truth).observations;
  Rng rng(derive_seed(spec.data_seed, spec.data_level(), 0, StreamPurpose::Data));
  for (double& v : y) v += spec.noise_std * rng.normal();
  return y;
}

Problem darcy_problem(const DarcySpec& spec) {
  if (spec.l_max < 1 || spec.l_max > DarcySolver::kMaxLevel) {
    throw std::invalid_argument("darcy_problem: L_max must be in [1, " +
                                std::to_string(DarcySolver::kMaxLevel) + "]");
  }
  if (!(spec.kde_prior_weight > 0.0 && spec.kde_prior_weight < 1.0)) {
    throw std::invalid_argument("darcy_problem: KDE mixture weight must be in (0, 1)");
  }
  auto data = std::make_shared<const std::vector<double>>(darcy_synthetic_data(spec));
  const double inv_2var = 1.0 / (2.0 * spec.noise_std * spec.noise_std);

  std::vector<LevelTarget> targets;
  for (int l = 0; l <= spec.l_max; ++l) {
    LevelTarget t;
    t.level = l;
    t.eval_cost = std::pow(2.0, spec.cost_gamma * l);
    t.evaluate = [solver = DarcySolver(l), data, inv_2var](const Point& theta) {
      const DarcySolution sol = solver.solve(theta);
      std::vector<double> sq(data->size());
      for (std::size_t k = 0; k < sq.size(); ++k) {
        const double r = (*data)[k] - sol.observations[k];
        sq[k] = r * r;
      }
      return Evaluation{-inv_2var * stats::pairwise_sum(sq), sol.qoi};
    };
    targets.push_back(std::move(t));
  }
  const DiagGaussian prior{std::vector<double>(4, 0.0), std::vector<double>(4, 1.0)};
  Hierarchy h(std::move(targets), 2, [prior](Rng& rng) { return prior.sample(rng); });

  Problem p{.name = "darcy",
            .hierarchy = std::move(h),
            .level0_proposal = random_walk_proposal(spec.rwm_std, prior),
            .level_proposal = {},
            .adaptive_proposals = true,
            .level0_start = [](Rng&) { return Point{0.0, 0.0, 0.0, 0.0}; },
            .exact_level_mean = [](int) -> std::optional<double> { return std::nullopt; },
            .exact_limit = std::nullopt};
  KdeOptions kde;
  kde.prior_weight = spec.kde_prior_weight;
  kde.reference = Reference::Prior;
  p.level_proposal = [prior, kde](int, std::span<const Point> pool) {
    if (pool.empty()) {
      KdeOptions only_prior = kde;
      only_prior.prior_weight = 1.0;
      return kde_mixture_proposal(pool, prior, only_prior);
    }
    return kde_mixture_proposal(pool, prior, kde);
  };
  return p;
}

}  // namespace mlmcmc
