#pragma once

#include <functional>

#include <Eigen/Core>

#include "gpct/gp_regression.hpp"
#include "gpct/system_bounds.hpp"

namespace gpct {

/// Inputs to the probabilistic model-error bound.
struct ErrorBoundParams {
  Eigen::VectorXd rkhs_norms;  ///< ||kappa_j||_k per output
  double delta = 0.1;          ///< in (0, 1)
  Eigen::VectorXd info_gains;  ///< gamma_j per output
  int m = 0;                   ///< training set size

  void validate() const;
};

/// 0.5 log det(I + K / sigma_n^2). Throws NumericalError if K is not PSD.
double information_gain(const Eigen::MatrixXd& gram, double noise_variance);

/// Greedy maximization of the information gain over `count` points chosen
/// from the columns of `candidates`. Returns an upper estimate of the gain
/// attained by the actual training set when the candidates cover the domain.
double greedy_information_gain(const Eigen::MatrixXd& candidates,
                               const Hyperparameters& params, int count);

/// beta_j = sqrt(2 ||kappa_j||^2 + 300 gamma_j ln^3((m + 1) / delta))
Eigen::VectorXd compute_beta(const ErrorBoundParams& params);

/// |sum_j beta_j sqrt(var_j)|, a bound on ||mu - kappa|| holding with
/// probability at least (1 - delta)^n.
double model_error_bound(const Eigen::VectorXd& beta, const Prediction& prediction);

/// Block matrix of the Lyapunov derivative
///   [ -K_d + eps H              eps/2 (-K_d^T + C) ]
///   [ eps/2 (-K_d + C^T)        -eps K_p           ]
Eigen::MatrixXd lyapunov_derivative_matrix(double eps, const Eigen::MatrixXd& kd,
                                           const Eigen::MatrixXd& kp,
                                           const Eigen::MatrixXd& h,
                                           const Eigen::MatrixXd& c);

struct DefinitenessCheck {
  bool negative_definite = false;
  double lambda_max = 0.0;  ///< largest eigenvalue of the symmetric part
};

/// Dense eigenvalue test of the block matrix above.
DefinitenessCheck check_A_negative_definite(double eps, const Eigen::MatrixXd& kd,
                                            const Eigen::MatrixXd& kp,
                                            const Eigen::MatrixXd& h,
                                            const Eigen::MatrixXd& c);

/// Schur-complement test: A_11 = -K_d + eps H and
/// S = -eps K_p + eps^2/4 (K_d - C^T)(K_d - eps H)^-1 (K_d - C) both
/// negative definite.
bool schur_negative_definite(double eps, const Eigen::MatrixXd& kd,
                             const Eigen::MatrixXd& kp, const Eigen::MatrixXd& h,
                             const Eigen::MatrixXd& c);

/// Open interval (0, upper) of admissible eps; empty when upper <= 0 or the
/// fixed-point iteration did not settle.
struct EpsilonInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool empty = true;
  bool converged = false;
  int iterations = 0;

  bool contains(double eps) const { return !empty && eps > lower && eps < upper; }
  double midpoint() const { return 0.5 * (lower + upper); }
};

/// The three upper limits on eps, evaluated at a given eps (the third one
/// depends on eps through sqrt(2 V0 / (k_p1 - eps h2))).
struct EpsilonLimits {
  double inertia_gain;  ///< k_p1 / h2
  double inertia_ratio; ///< h1 / h2
  double damping;       ///< the v1 > 0 and xi > 0 limit
  double min() const;
};
EpsilonLimits epsilon_limits(const SystemBounds& bounds, double v0, double eps2,
                             double eps);

/// Solves eps* = min(limits(eps*)) by damped fixed-point iteration from 0.
/// Every eps in (0, eps*) satisfies all three limits.
EpsilonInterval epsilon_feasible(const SystemBounds& bounds, double v0, double eps2);

/// Diagonal of K_p at tracking error z, i.e. K_p(Var_p(q_d + z)).
using ProportionalGainField = std::function<Eigen::VectorXd(const Eigen::VectorXd& z)>;

/// V = 0.5 edot^T H edot + int_0^e z^T K_p dz + eps e^T H edot, the integral
/// taken along the straight segment by adaptive Gauss-Kronrod quadrature.
double lyapunov_value(const Eigen::VectorXd& edot, const Eigen::VectorXd& e,
                      const Eigen::MatrixXd& h, const ProportionalGainField& kp,
                      double eps);

struct LyapunovConstants {
  double eps = 0.0;
  double eps2 = 0.0;
  double rho = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double xi = 0.0;
  double varrho = 0.0;
  double v0 = 0.0;
  double c_lower = 0.0;
  double ultimate_radius = 0.0;  ///< sqrt(2 varrho / (xi c_lower))
};

/// Throws InfeasibleError when v1, v2, xi or c_lower is not positive.
LyapunovConstants convergence_constants(const SystemBounds& bounds, double eps,
                                        double eps2, double v0, double delta_bar);

}  // namespace gpct
