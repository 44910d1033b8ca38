#pragma once

#include <cstdint>

#include "gpct/gp_regression.hpp"

namespace gpct {

struct OptimizerOptions {
  int restarts = 5;
  int max_iterations = 100;
  std::uint64_t seed = 0;
  /// Standard deviation of the log-space perturbation for restarts >= 1.
  double restart_spread = 1.0;
  /// Lower bound on the optimized noise variance.
  double min_noise_variance = 1e-6;
  double min_lengthscale = 1e-3;
  double max_lengthscale = 1e4;
  double gradient_tolerance = 1e-6;
  /// Stop when one accepted step improves the negative log likelihood by
  /// less than this fraction of max(1, |value|).
  double function_tolerance = 1e-7;
};

struct OptimizationResult {
  Hyperparameters params;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  int successful_restarts = 0;
};

/// Multi-start local ascent of the log marginal likelihood in log-parameter
/// space. Restart 0 starts at `init`, so the result never has lower
/// likelihood than `init` (clamped to the search box).
OptimizationResult optimize_hyperparameters(const TrainingSet& data,
                                            const Hyperparameters& init,
                                            int output_index,
                                            const OptimizerOptions& options = {});

}  // namespace gpct
