#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace gpct {

/// Squared-exponential ARD hyperparameters of one output dimension.
struct Hyperparameters {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double noise_variance = 0.0;

  /// Throws InputError unless signal_variance > 0, every lengthscale > 0 and
  /// noise_variance >= 0.
  void validate() const;
  int input_dim() const { return static_cast<int>(lengthscales.size()); }
};

/// Inputs are stored column-wise (d x m), outputs row-wise (m x n).
struct TrainingSet {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;

  static TrainingSet empty(int input_dim, int output_dim);

  int input_dim() const { return static_cast<int>(inputs.rows()); }
  int output_dim() const { return static_cast<int>(outputs.cols()); }
  int size() const { return static_cast<int>(inputs.cols()); }
  void validate() const;
};

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// sigma_f^2 * exp(-0.5 * sum_i (x_i - x'_i)^2 / l_i^2)
double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                   const Hyperparameters& params);

/// Noise-free Gram matrix K(X, X).
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& inputs,
                            const Hyperparameters& params);

/// Cholesky factor of K + (noise + jitter) I with the escalating jitter policy.
struct JitteredFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};
JitteredFactor factorize_covariance(const Eigen::MatrixXd& gram,
                                    const Hyperparameters& params);

/// Exact multi-output GP with zero prior mean, one independent GP per output.
/// Immutable after construction; all queries are const and thread safe.
class GPModel {
 public:
  /// Factorizes K + sigma_n^2 I for every output. Throws NumericalError naming
  /// the output index when no jitter level in the policy yields a factor.
  GPModel(TrainingSet data, std::vector<Hyperparameters> params);

  int input_dim() const { return data_.input_dim(); }
  int output_dim() const { return data_.output_dim(); }
  int size() const { return data_.size(); }
  const TrainingSet& training_set() const { return data_; }
  const std::vector<Hyperparameters>& params() const { return params_; }
  const Eigen::LLT<Eigen::MatrixXd>& factor(int output) const {
    return cache_.at(output).factor.llt;
  }
  double jitter(int output) const { return cache_.at(output).factor.jitter; }
  /// (K + sigma_n^2 I)^-1 Y_{:,i}
  const Eigen::VectorXd& weights(int output) const {
    return cache_.at(output).alpha;
  }

  Prediction predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_mean(const Eigen::VectorXd& x) const;

  /// Prediction from a subset of the input coordinates. x1 holds the values
  /// of the coordinates listed in `subset` (in that order). The reduced
  /// kernel reuses the matching lengthscales, sigma_f^2 and sigma_n^2 and is
  /// conditioned on the same rows of X; the reduced factor is built on first
  /// use and cached. The full index set uses the main factor.
  Prediction predict_marginal(const Eigen::VectorXd& x1,
                              std::span<const int> subset) const;

 private:
  struct OutputCache {
    JitteredFactor factor;
    Eigen::VectorXd alpha;
  };

  Eigen::VectorXd cross_covariance(const Eigen::VectorXd& x1,
                                   std::span<const int> subset,
                                   const Hyperparameters& p) const;

  struct MarginalCache;
  const std::vector<OutputCache>& marginal_factors(std::span<const int> subset) const;

  TrainingSet data_;
  std::vector<Hyperparameters> params_;
  std::vector<OutputCache> cache_;
  std::shared_ptr<MarginalCache> marginal_;
  std::vector<int> full_subset_;
};

GPModel fit(TrainingSet data, std::vector<Hyperparameters> params);
Prediction predict(const GPModel& model, const Eigen::VectorXd& x);
Prediction predict_marginal(const GPModel& model, const Eigen::VectorXd& x1,
                            std::span<const int> subset);

/// log p(Y_{:,i} | X, params).
double log_marginal_likelihood(const TrainingSet& data,
                               const Hyperparameters& params,
                               int output_index);

/// Log marginal likelihood and its gradient with respect to the log-space
/// parameters [log l_1 .. log l_d, log sigma_f^2, log sigma_n^2].
struct LikelihoodEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
};
LikelihoodEvaluation log_marginal_likelihood_with_gradient(
    const TrainingSet& data, const Hyperparameters& params, int output_index);

}  // namespace gpct
