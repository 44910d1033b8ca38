#include "gpct/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gpct/errors.hpp"

namespace gpct {

void ErrorBoundParams::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  if (m < 0) throw InputError("training count must be nonnegative");
  if (rkhs_norms.size() != info_gains.size())
    throw InputError("one RKHS norm and one information gain per output required");
  if ((info_gains.array() < 0).any() || !info_gains.allFinite())
    throw InputError("information gains must be finite and nonnegative");
  if ((rkhs_norms.array() < 0).any() || !rkhs_norms.allFinite())
    throw InputError("RKHS norms must be finite and nonnegative");
}

double information_gain(const Eigen::MatrixXd& gram, double noise_variance) {
  if (gram.rows() != gram.cols()) throw InputError("information_gain: K not square");
  if (!(noise_variance > 0.0)) throw InputError("information_gain: noise variance must be positive");
  if (gram.size() == 0) return 0.0;
  if (!gram.isApprox(gram.transpose(), 1e-12))
    throw NumericalError("information_gain: K is not symmetric");
  Eigen::MatrixXd a = gram / noise_variance;
  a.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("information_gain: K is not positive semidefinite");
  const auto l = llt.matrixL();
  double gain = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) gain += std::log(l(i, i));
  return gain;
}

double greedy_information_gain(const Eigen::MatrixXd& candidates,
                               const Hyperparameters& params, int count) {
  params.validate();
  if (!(params.noise_variance > 0.0))
    throw InputError("greedy_information_gain: noise variance must be positive");
  const Eigen::Index n_cand = candidates.cols();
  count = static_cast<int>(std::min<Eigen::Index>(count, n_cand));
  // Posterior variance of every candidate, updated by rank-one downdates.
  Eigen::VectorXd var = Eigen::VectorXd::Constant(n_cand, params.signal_variance);
  Eigen::MatrixXd basis(n_cand, count);
  double gain = 0.0;
  for (int k = 0; k < count; ++k) {
    Eigen::Index best = 0;
    var.maxCoeff(&best);
    const double vb = var[best];
    gain += 0.5 * std::log1p(vb / params.noise_variance);
    Eigen::VectorXd cov(n_cand);
    for (Eigen::Index j = 0; j < n_cand; ++j)
      cov[j] = kernel_eval(candidates.col(j), candidates.col(best), params);
    if (k > 0) cov -= basis.leftCols(k) * basis.row(best).head(k).transpose();
    basis.col(k) = cov / std::sqrt(vb + params.noise_variance);
    var -= basis.col(k).cwiseAbs2();
    var = var.cwiseMax(0.0);
  }
  return gain;
}

Eigen::VectorXd compute_beta(const ErrorBoundParams& params) {
  params.validate();
  const double log_term = std::log((params.m + 1.0) / params.delta);
  const double cube = log_term * log_term * log_term;
  return (2.0 * params.rkhs_norms.array().square() +
          300.0 * params.info_gains.array() * cube)
      .sqrt();
}

double model_error_bound(const Eigen::VectorXd& beta, const Prediction& prediction) {
  if (beta.size() != prediction.variance.size())
    throw InputError("model_error_bound: size mismatch");
  if ((prediction.variance.array() < 0).any())
    throw InputError("model_error_bound: negative variance");
  return std::abs(beta.dot(prediction.variance.cwiseSqrt()));
}

namespace {

void check_blocks(const Eigen::MatrixXd& kd, const Eigen::MatrixXd& kp,
                  const Eigen::MatrixXd& h, const Eigen::MatrixXd& c) {
  const auto n = kd.rows();
  for (const auto* m : {&kd, &kp, &h, &c})
    if (m->rows() != n || m->cols() != n)
      throw InputError("Lyapunov matrix: blocks must all be n x n");
}

bool llt_negative_definite(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd neg = -0.5 * (m + m.transpose());
  const Eigen::LLT<Eigen::MatrixXd> llt(neg);
  return llt.info() == Eigen::Success;
}

}  // namespace

Eigen::MatrixXd lyapunov_derivative_matrix(double eps, const Eigen::MatrixXd& kd,
                                           const Eigen::MatrixXd& kp,
                                           const Eigen::MatrixXd& h,
                                           const Eigen::MatrixXd& c) {
  check_blocks(kd, kp, h, c);
  const auto n = kd.rows();
  Eigen::MatrixXd a(2 * n, 2 * n);
  a.topLeftCorner(n, n) = -kd + eps * h;
  a.topRightCorner(n, n) = 0.5 * eps * (-kd.transpose() + c);
  a.bottomLeftCorner(n, n) = 0.5 * eps * (-kd + c.transpose());
  a.bottomRightCorner(n, n) = -eps * kp;
  return a;
}

DefinitenessCheck check_A_negative_definite(double eps, const Eigen::MatrixXd& kd,
                                            const Eigen::MatrixXd& kp,
                                            const Eigen::MatrixXd& h,
                                            const Eigen::MatrixXd& c) {
  const Eigen::MatrixXd a = lyapunov_derivative_matrix(eps, kd, kp, h, c);
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  DefinitenessCheck out;
  out.lambda_max = es.eigenvalues().maxCoeff();
  out.negative_definite = out.lambda_max < 0.0;
  return out;
}

bool schur_negative_definite(double eps, const Eigen::MatrixXd& kd,
                             const Eigen::MatrixXd& kp, const Eigen::MatrixXd& h,
                             const Eigen::MatrixXd& c) {
  check_blocks(kd, kp, h, c);
  const Eigen::MatrixXd a11 = -kd + eps * h;
  if (!llt_negative_definite(a11)) return false;
  const Eigen::MatrixXd s =
      -eps * kp + 0.25 * eps * eps * (kd - c.transpose()) *
                      (kd - eps * h).partialPivLu().solve(kd.transpose() - c);
  return llt_negative_definite(s);
}

double EpsilonLimits::min() const {
  return std::min({inertia_gain, inertia_ratio, damping});
}

EpsilonLimits epsilon_limits(const SystemBounds& b, double v0, double eps2, double eps) {
  const double inf = std::numeric_limits<double>::infinity();
  EpsilonLimits lim{};
  lim.inertia_gain = b.h2 > 0 ? b.k_p1 / b.h2 : inf;
  lim.inertia_ratio = b.h2 > 0 ? b.h1 / b.h2 : inf;
  const double margin = b.k_p1 - eps * b.h2;
  if (!(margin > 0.0) || !(b.k_p1 > 0.0)) {
    lim.damping = 0.0;
    return lim;
  }
  const double rho = (1.0 + eps2) * (b.k_c * b.qdot_d_bar + b.k_d2) / (2.0 * b.k_p1);
  const double denom = 2.0 * b.h2 + 2.0 * b.k_p1 * rho * rho / (1.0 + eps2) +
                       (8.0 / 3.0) * b.k_c * std::sqrt(2.0 * v0 / margin);
  lim.damping = denom > 0 ? 2.0 * b.k_d1 / denom : inf;
  return lim;
}

EpsilonInterval epsilon_feasible(const SystemBounds& bounds, double v0, double eps2) {
  bounds.validate();
  if (!(v0 >= 0.0)) throw InputError("epsilon_feasible: V0 must be nonnegative");
  if (!(eps2 > 0.0)) throw InputError("epsilon_feasible: eps2 must be positive");

  constexpr int kMaxIterations = 100;
  constexpr double kDamping = 0.5;
  EpsilonInterval out;
  double eps = 0.0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    out.iterations = it;
    const double target = epsilon_limits(bounds, v0, eps2, eps).min();
    const double next = (1.0 - kDamping) * eps + kDamping * target;
    if (std::abs(next - eps) <= 1e-13 * std::max(1e-300, std::abs(next))) {
      out.converged = true;
      eps = next;
      break;
    }
    eps = next;
  }
  if (!out.converged || !std::isfinite(eps)) return out;
  // The limit is nonincreasing in eps, so min(eps, limit(eps)) never
  // overshoots the fixed point.
  const double upper = std::min(eps, epsilon_limits(bounds, v0, eps2, eps).min());
  if (upper > 0.0) {
    out.upper = upper;
    out.empty = false;
  }
  return out;
}

double lyapunov_value(const Eigen::VectorXd& edot, const Eigen::VectorXd& e,
                      const Eigen::MatrixXd& h, const ProportionalGainField& kp,
                      double eps) {
  const auto n = e.size();
  if (edot.size() != n || h.rows() != n || h.cols() != n)
    throw InputError("lyapunov_value: dimension mismatch");
  const double kinetic = 0.5 * edot.dot(h * edot);
  const double cross = eps * e.dot(h * edot);
  double potential = 0.0;
  if (e.squaredNorm() > 0.0) {
    const Eigen::ArrayXd e2 = e.array().square();
    auto integrand = [&](double s) {
      const Eigen::VectorXd k = kp(s * e);
      if (k.size() != n) throw InputError("lyapunov_value: gain field size mismatch");
      return s * (e2 * k.array()).sum();
    };
    potential = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        integrand, 0.0, 1.0, 15, 1e-8);
  }
  return kinetic + potential + cross;
}

LyapunovConstants convergence_constants(const SystemBounds& b, double eps, double eps2,
                                        double v0, double delta_bar) {
  b.validate();
  if (!(eps > 0.0)) throw InfeasibleError("eps must be positive");
  if (!(eps2 > 0.0)) throw InputError("eps2 must be positive");
  if (!(v0 >= 0.0) || !(delta_bar >= 0.0))
    throw InputError("V0 and delta_bar must be nonnegative");
  if (!(b.k_p1 > 0.0)) throw InfeasibleError("k_p1 must be positive");

  LyapunovConstants k;
  k.eps = eps;
  k.eps2 = eps2;
  k.v0 = v0;
  const double drive = b.k_c * b.qdot_d_bar + b.k_d2;
  k.rho = (1.0 + eps2) * drive / (2.0 * b.k_p1);
  k.v1 = -eps * b.h2 + b.k_d1 - 0.5 * eps * k.rho * drive;
  k.v2 = b.k_p1 * eps2 / (1.0 + eps2);
  if (!(k.v1 > 0.0)) throw InfeasibleError("v1 is not positive for this eps");
  if (!(k.v2 > 0.0)) throw InfeasibleError("v2 is not positive");
  const double margin = b.k_p1 - eps * b.h2;
  if (!(margin > 0.0)) throw InfeasibleError("k_p1 - eps h2 is not positive");

  const double num =
      std::min(eps * k.v2, k.v1 - (4.0 / 3.0) * eps * b.k_c * std::sqrt(2.0 * v0 / margin));
  const double den = std::max(eps * b.h2 + b.k_p2, (1.0 + eps) * b.h2);
  k.xi = (2.0 / 3.0) * num / den;
  if (!(k.xi > 0.0)) throw InfeasibleError("xi is not positive for this eps");

  const double d2 = delta_bar * delta_bar;
  k.varrho = d2 / k.v1 + eps * d2 / k.v2;
  k.c_lower = std::min(b.k_p1 - eps * b.h2, b.h1 - eps * b.h2);
  if (!(k.c_lower > 0.0)) throw InfeasibleError("c_lower is not positive for this eps");
  k.ultimate_radius = std::sqrt(2.0 * k.varrho / (k.xi * k.c_lower));
  return k;
}

}  // namespace gpct
