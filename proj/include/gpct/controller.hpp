#pragma once

#include <vector>

#include <Eigen/Core>

#include "gpct/gp_regression.hpp"
#include "gpct/lagrangian.hpp"

namespace gpct {

using DiagonalGain = Eigen::DiagonalMatrix<double, Eigen::Dynamic>;

/// K_ii = min(base_i + weight_i * var_ii, ceiling_i), separately for K_p
/// and K_d.
struct GainSchedule {
  Eigen::VectorXd base_p, base_d;
  Eigen::VectorXd weight_p, weight_d;
  Eigen::VectorXd ceiling_p, ceiling_d;

  int dof() const { return static_cast<int>(base_p.size()); }
  void validate() const;

  static GainSchedule constant(const Eigen::VectorXd& kp, const Eigen::VectorXd& kd);
  /// Ceilings at base + weight * sigma_f^2, the largest variance an SE
  /// kernel can report for that output.
  static GainSchedule with_variance_ceilings(const Eigen::VectorXd& base_p,
                                             const Eigen::VectorXd& base_d,
                                             const Eigen::VectorXd& weight_p,
                                             const Eigen::VectorXd& weight_d,
                                             const Eigen::VectorXd& signal_variances);
  /// Same bases, zero weights, ceilings equal to the bases.
  GainSchedule without_adaptation() const;
};

struct FeedbackGains {
  DiagonalGain kp;
  DiagonalGain kd;
};

FeedbackGains gains_from_variance(const GainSchedule& schedule,
                                  const Eigen::VectorXd& var_p,
                                  const Eigen::VectorXd& var_d);

struct DesiredState {
  Eigen::VectorXd q, qdot, qddot;
};

struct TrackingError {
  Eigen::VectorXd e;     ///< q - q_d
  Eigen::VectorXd edot;  ///< qdot - qdot_d
};

TrackingError tracking_error(const ManipulatorState& state, const DesiredState& desired);

struct ControlOutput {
  Eigen::VectorXd tau;
  DiagonalGain kp, kd;
  Eigen::VectorXd var_p, var_d;
  Eigen::VectorXd mu;
};

/// Coordinates of qbreve = [qddot; qdot; q] used by the marginal variances.
std::vector<int> velocity_position_subset(int dof);
std::vector<int> position_subset(int dof);

/// tau = H q_d'' + C q_d' + g + mu(qbreve) - K_d(Var_d) edot - K_p(Var_p) e
///
/// The GP (inputs qbreve, outputs residual torque) is queried at
/// [q_d''; qdot; q] for the mean; Var_d and Var_p come from the (qdot, q)
/// and (q) marginals. A null gp means no compensation and zero variances.
/// With all weights zero the variances do not affect the gains; they are
/// then skipped and reported as zero.
ControlOutput control_torque(const ManipulatorModel& plant_est, const GPModel* gp,
                             const GainSchedule& schedule,
                             const ManipulatorState& state,
                             const DesiredState& desired);

}  // namespace gpct
