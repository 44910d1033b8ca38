#include "gpct/hyperparameter_optimizer.hpp"

#include <cmath>
#include <random>

#include "bounded_bfgs.hpp"
#include "gpct/errors.hpp"

namespace gpct {

namespace {

Eigen::VectorXd to_log(const Hyperparameters& p, double noise_floor) {
  const int d = p.input_dim();
  Eigen::VectorXd theta(d + 2);
  theta.head(d) = p.lengthscales.array().log();
  theta[d] = std::log(p.signal_variance);
  theta[d + 1] = std::log(std::max(p.noise_variance, noise_floor));
  return theta;
}

Hyperparameters from_log(const Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size() - 2;
  Hyperparameters p;
  p.lengthscales = theta.head(d).array().exp();
  p.signal_variance = std::exp(theta[d]);
  p.noise_variance = std::exp(theta[d + 1]);
  return p;
}

}  // namespace

OptimizationResult optimize_hyperparameters(const TrainingSet& data,
                                            const Hyperparameters& init,
                                            int output_index,
                                            const OptimizerOptions& options) {
  init.validate();
  if (data.size() == 0)
    throw InputError("optimize_hyperparameters: empty training set");
  if (init.input_dim() != data.input_dim())
    throw InputError("optimize_hyperparameters: dimension mismatch");
  if (options.restarts < 1)
    throw InputError("optimize_hyperparameters: need at least one restart");

  const int d = data.input_dim();
  Eigen::VectorXd lower(d + 2), upper(d + 2);
  lower.head(d).setConstant(std::log(options.min_lengthscale));
  upper.head(d).setConstant(std::log(options.max_lengthscale));
  lower[d] = std::log(1e-6);
  upper[d] = std::log(1e6);
  lower[d + 1] = std::log(options.min_noise_variance);
  upper[d + 1] = std::log(1e3);

  // Negated likelihood for the minimizer.
  const detail::Objective objective = [&](const Eigen::VectorXd& theta,
                                          double& f, Eigen::VectorXd& g) {
    try {
      const auto eval =
          log_marginal_likelihood_with_gradient(data, from_log(theta), output_index);
      if (!std::isfinite(eval.value) || !eval.gradient.allFinite()) return false;
      f = -eval.value;
      g = -eval.gradient;
      return true;
    } catch (const NumericalError&) {
      return false;
    }
  };

  const Eigen::VectorXd theta0 =
      to_log(init, options.min_noise_variance).cwiseMax(lower).cwiseMin(upper);

  OptimizationResult result;
  result.initial_log_likelihood = -std::numeric_limits<double>::infinity();
  {
    double f = 0.0;
    Eigen::VectorXd g;
    if (objective(theta0, f, g)) result.initial_log_likelihood = -f;
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, options.restart_spread);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd start = theta0;
    if (r > 0)
      for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += normal(rng);
    const auto run = detail::minimize_box_bfgs(objective, start, lower, upper,
                                               options.max_iterations,
                                               options.gradient_tolerance,
                                               options.function_tolerance);
    if (!std::isfinite(run.value)) continue;
    ++result.successful_restarts;
    if (run.value < best) {
      best = run.value;
      best_theta = run.x;
    }
  }
  if (result.successful_restarts == 0)
    throw NumericalError("optimize_hyperparameters: every restart failed to "
                         "factorize the covariance");
  result.params = from_log(best_theta);
  result.log_likelihood = -best;
  return result;
}

}  // namespace gpct
