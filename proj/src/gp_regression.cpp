#include "gpct/gp_regression.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include "gpct/errors.hpp"

namespace gpct {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

bool has_duplicate_columns(const Eigen::MatrixXd& inputs) {
  for (Eigen::Index j = 0; j < inputs.cols(); ++j)
    for (Eigen::Index k = j + 1; k < inputs.cols(); ++k)
      if (inputs.col(j) == inputs.col(k)) return true;
  return false;
}

Hyperparameters reduced_params(const Hyperparameters& p, std::span<const int> subset) {
  Hyperparameters r = p;
  r.lengthscales.resize(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t s = 0; s < subset.size(); ++s) r.lengthscales[s] = p.lengthscales[subset[s]];
  return r;
}

}  // namespace

struct GPModel::MarginalCache {
  std::mutex mutex;
  std::map<std::vector<int>, std::vector<OutputCache>> entries;
};

void Hyperparameters::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw InputError("signal_variance must be positive");
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
    throw InputError("noise_variance must be nonnegative");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i]))
      throw InputError("lengthscale " + std::to_string(i) +
                       " must be positive");
}

TrainingSet TrainingSet::empty(int input_dim, int output_dim) {
  return {Eigen::MatrixXd(input_dim, 0), Eigen::MatrixXd(0, output_dim)};
}

void TrainingSet::validate() const {
  if (inputs.cols() != outputs.rows())
    throw InputError("training set: " + std::to_string(inputs.cols()) +
                     " inputs but " + std::to_string(outputs.rows()) +
                     " outputs");
  if (!inputs.allFinite() || !outputs.allFinite())
    throw InputError("training set contains non-finite entries");
}

double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                   const Hyperparameters& params) {
  if (x.size() != x_prime.size() || x.size() != params.lengthscales.size())
    throw InputError("kernel_eval: dimension mismatch");
  const double r2 =
      ((x - x_prime).array() / params.lengthscales.array()).square().sum();
  return params.signal_variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& inputs,
                            const Hyperparameters& params) {
  if (inputs.rows() != params.lengthscales.size())
    throw InputError("gram_matrix: dimension mismatch");
  const Eigen::MatrixXd scaled =
      params.lengthscales.cwiseInverse().asDiagonal() * inputs;
  const Eigen::Index m = inputs.cols();
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    k(j, j) = params.signal_variance;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double v = params.signal_variance *
                       std::exp(-0.5 * (scaled.col(i) - scaled.col(j)).squaredNorm());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

JitteredFactor factorize_covariance(const Eigen::MatrixXd& gram,
                                    const Hyperparameters& params) {
  const Eigen::Index m = gram.rows();
  JitteredFactor out;
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += params.noise_variance;
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success) return out;
  for (double rel = kJitterStart; rel <= kJitterMax * 1.0000001; rel *= 10.0) {
    const double jitter = rel * params.signal_variance;
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    out.llt.compute(b);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
  }
  throw NumericalError("covariance of size " + std::to_string(m) +
                       " is not positive definite after maximum jitter");
}

GPModel::GPModel(TrainingSet data, std::vector<Hyperparameters> params)
    : data_(std::move(data)), params_(std::move(params)) {
  data_.validate();
  if (static_cast<int>(params_.size()) != data_.output_dim())
    throw InputError("fit: expected " + std::to_string(data_.output_dim()) +
                     " hyperparameter sets, got " +
                     std::to_string(params_.size()));
  for (const auto& p : params_) {
    p.validate();
    if (p.input_dim() != data_.input_dim())
      throw InputError("fit: lengthscale count does not match input dimension");
  }
  full_subset_.resize(data_.input_dim());
  std::iota(full_subset_.begin(), full_subset_.end(), 0);

  marginal_ = std::make_shared<MarginalCache>();
  const bool duplicates = has_duplicate_columns(data_.inputs);
  cache_.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (duplicates && p.noise_variance == 0.0)
      throw NumericalError("output " + std::to_string(i) +
                           ": duplicate inputs with zero noise make the "
                           "covariance singular");
    OutputCache c;
    try {
      c.factor = factorize_covariance(gram_matrix(data_.inputs, p), p);
    } catch (const NumericalError& e) {
      throw NumericalError("output " + std::to_string(i) + ": " + e.what());
    }
    c.alpha = c.factor.llt.solve(data_.outputs.col(i));
    cache_.push_back(std::move(c));
  }
}

Eigen::VectorXd GPModel::cross_covariance(const Eigen::VectorXd& x1,
                                          std::span<const int> subset,
                                          const Hyperparameters& p) const {
  const Eigen::Index m = data_.size();
  Eigen::ArrayXd r2 = Eigen::ArrayXd::Zero(m);
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const int d = subset[s];
    const double inv_l = 1.0 / p.lengthscales[d];
    r2 += ((data_.inputs.row(d).transpose().array() - x1[s]) * inv_l).square();
  }
  return p.signal_variance * (-0.5 * r2).exp();
}

Prediction GPModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim())
    throw InputError("predict: expected input of dimension " +
                     std::to_string(input_dim()));
  return predict_marginal(x, full_subset_);
}

Eigen::VectorXd GPModel::predict_mean(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim())
    throw InputError("predict_mean: expected input of dimension " +
                     std::to_string(input_dim()));
  Eigen::VectorXd mean(output_dim());
  for (int i = 0; i < output_dim(); ++i)
    mean[i] = size() == 0 ? 0.0
                          : cross_covariance(x, full_subset_, params_[i])
                                .dot(cache_[i].alpha);
  return mean;
}

const std::vector<GPModel::OutputCache>& GPModel::marginal_factors(
    std::span<const int> subset) const {
  if (std::ranges::equal(subset, full_subset_)) return cache_;
  std::vector<int> key(subset.begin(), subset.end());
  std::lock_guard lock(marginal_->mutex);
  auto it = marginal_->entries.find(key);
  if (it != marginal_->entries.end()) return it->second;

  Eigen::MatrixXd x1(static_cast<Eigen::Index>(subset.size()), data_.size());
  for (std::size_t s = 0; s < subset.size(); ++s) x1.row(s) = data_.inputs.row(subset[s]);
  std::vector<OutputCache> caches;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Hyperparameters p = reduced_params(params_[i], subset);
    OutputCache c;
    try {
      c.factor = factorize_covariance(gram_matrix(x1, p), p);
    } catch (const NumericalError& e) {
      throw NumericalError("output " + std::to_string(i) + " (marginal): " + e.what());
    }
    c.alpha = c.factor.llt.solve(data_.outputs.col(i));
    caches.push_back(std::move(c));
  }
  return marginal_->entries.emplace(std::move(key), std::move(caches)).first->second;
}

Prediction GPModel::predict_marginal(const Eigen::VectorXd& x1,
                                     std::span<const int> subset) const {
  if (subset.empty()) throw InputError("predict_marginal: empty subset");
  if (static_cast<Eigen::Index>(subset.size()) != x1.size())
    throw InputError("predict_marginal: subset size does not match input");
  for (int d : subset)
    if (d < 0 || d >= input_dim())
      throw InputError("predict_marginal: subset index out of range");

  Prediction out{Eigen::VectorXd::Zero(output_dim()),
                 Eigen::VectorXd::Zero(output_dim())};
  if (size() == 0) {
    for (int i = 0; i < output_dim(); ++i) out.variance[i] = params_[i].signal_variance;
    return out;
  }
  const auto& factors = marginal_factors(subset);
  for (int i = 0; i < output_dim(); ++i) {
    const auto& p = params_[i];
    const Eigen::VectorXd k = cross_covariance(x1, subset, p);
    out.mean[i] = k.dot(factors[i].alpha);
    const Eigen::VectorXd v = factors[i].factor.llt.matrixL().solve(k);
    out.variance[i] = std::max(0.0, p.signal_variance - v.squaredNorm());
  }
  return out;
}

GPModel fit(TrainingSet data, std::vector<Hyperparameters> params) {
  return GPModel(std::move(data), std::move(params));
}

Prediction predict(const GPModel& model, const Eigen::VectorXd& x) {
  return model.predict(x);
}

Prediction predict_marginal(const GPModel& model, const Eigen::VectorXd& x1,
                            std::span<const int> subset) {
  return model.predict_marginal(x1, subset);
}

namespace {

struct FactoredOutput {
  Eigen::MatrixXd gram;
  JitteredFactor factor;
  Eigen::VectorXd y;
  Eigen::VectorXd alpha;
};

FactoredOutput factor_output(const TrainingSet& data,
                             const Hyperparameters& params, int output_index) {
  data.validate();
  params.validate();
  if (data.size() == 0)
    throw InputError("log_marginal_likelihood: empty training set");
  if (output_index < 0 || output_index >= data.output_dim())
    throw InputError("log_marginal_likelihood: output index out of range");
  if (params.input_dim() != data.input_dim())
    throw InputError("log_marginal_likelihood: dimension mismatch");
  FactoredOutput f;
  f.gram = gram_matrix(data.inputs, params);
  f.factor = factorize_covariance(f.gram, params);
  f.y = data.outputs.col(output_index);
  f.alpha = f.factor.llt.solve(f.y);
  return f;
}

double lml_from(const FactoredOutput& f) {
  const double m = static_cast<double>(f.y.size());
  const auto l = f.factor.llt.matrixL();
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < f.y.size(); ++i)
    half_logdet += std::log(l(i, i));
  return -0.5 * f.y.dot(f.alpha) - half_logdet -
         0.5 * m * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double log_marginal_likelihood(const TrainingSet& data,
                               const Hyperparameters& params,
                               int output_index) {
  return lml_from(factor_output(data, params, output_index));
}

LikelihoodEvaluation log_marginal_likelihood_with_gradient(
    const TrainingSet& data, const Hyperparameters& params, int output_index) {
  const FactoredOutput f = factor_output(data, params, output_index);
  const Eigen::Index m = f.y.size();
  const int d = data.input_dim();

  LikelihoodEvaluation out;
  out.value = lml_from(f);
  out.gradient.resize(d + 2);

  // dL/dtheta = 0.5 tr(W dK/dtheta), W = alpha alpha^T - K_y^-1.
  // Only the lower triangle of W is formed.
  Eigen::MatrixXd w = -f.factor.llt.solve(Eigen::MatrixXd::Identity(m, m));
  w.noalias() += f.alpha * f.alpha.transpose();
  w.triangularView<Eigen::StrictlyLower>() =
      w.cwiseProduct(f.gram).triangularView<Eigen::StrictlyLower>();

  double sf_grad = 0.0;
  double trace = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    sf_grad += 0.5 * w(j, j) * f.gram(j, j);
    trace += w(j, j);
    for (Eigen::Index i = j + 1; i < m; ++i) sf_grad += w(i, j);
  }
  for (int k = 0; k < d; ++k) {
    const Eigen::VectorXd row = data.inputs.row(k).transpose();
    const double inv_l2 = 1.0 / (params.lengthscales[k] * params.lengthscales[k]);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double xj = row[j];
      for (Eigen::Index i = j + 1; i < m; ++i) {
        const double diff = row[i] - xj;
        acc += w(i, j) * diff * diff;
      }
    }
    out.gradient[k] = acc * inv_l2;  // symmetric: 2 * 0.5 * lower-triangle sum
  }
  out.gradient[d] = sf_grad;
  out.gradient[d + 1] = 0.5 * params.noise_variance * trace;
  return out;
}

}  // namespace gpct
