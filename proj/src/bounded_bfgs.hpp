#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Core>

namespace gpct::detail {

struct BfgsResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// Objective returns false when it cannot be evaluated at x.
using Objective =
    std::function<bool(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g)>;

/// Projected BFGS for minimization inside a box, Armijo backtracking along
/// the projected path. Only strictly decreasing steps are accepted.
inline BfgsResult minimize_box_bfgs(const Objective& objective,
                                    Eigen::VectorXd x,
                                    const Eigen::VectorXd& lower,
                                    const Eigen::VectorXd& upper,
                                    int max_iterations, double grad_tol,
                                    double f_tol) {
  const Eigen::Index n = x.size();
  auto project = [&](const Eigen::VectorXd& v) {
    return v.cwiseMax(lower).cwiseMin(upper).eval();
  };
  x = project(x);
  BfgsResult out;
  Eigen::VectorXd g(n);
  double f = 0.0;
  if (!objective(x, f, g)) return out;
  out.x = x;
  out.value = f;

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    // Free variables: not pinned at a bound by the gradient.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if ((x[i] <= lower[i] && g[i] > 0) || (x[i] >= upper[i] && g[i] < 0))
        free[i] = 0.0;
    const Eigen::VectorXd pg = g.cwiseProduct(free);
    if (pg.lpNorm<Eigen::Infinity>() < grad_tol) break;

    Eigen::VectorXd dir = -(hinv * pg).cwiseProduct(free);
    if (dir.dot(pg) >= 0) {
      hinv.setIdentity();
      dir = -pg;
    }
    // Keep the first trial step modest in log space.
    const double max_step = dir.lpNorm<Eigen::Infinity>();
    double step = max_step > 2.0 ? 2.0 / max_step : 1.0;

    Eigen::VectorXd x_new(n), g_new(n);
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = project(x + step * dir);
      const double decrease = g.dot(x_new - x);
      if (objective(x_new, f_new, g_new) && std::isfinite(f_new) &&
          f_new < f && f_new <= f + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (hinv.isIdentity()) break;
      hinv.setIdentity();
      continue;
    }
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      hinv = (id - rho * s * y.transpose()) * hinv *
                 (id - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    const double rel = std::abs(f - f_new) / std::max(1.0, std::abs(f));
    x = x_new;
    g = g_new;
    f = f_new;
    out.x = x;
    out.value = f;
    if (rel < f_tol) break;
  }
  return out;
}

}  // namespace gpct::detail
