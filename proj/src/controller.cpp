#include "gpct/controller.hpp"

#include <numeric>
#include <string>

#include "gpct/errors.hpp"

namespace gpct {

void GainSchedule::validate() const {
  const auto n = base_p.size();
  if (base_d.size() != n || weight_p.size() != n || weight_d.size() != n ||
      ceiling_p.size() != n || ceiling_d.size() != n)
    throw InputError("gain schedule: per-joint vectors differ in length");
  if (n == 0) throw InputError("gain schedule: no joints");
  if ((base_p.array() <= 0).any() || (base_d.array() <= 0).any())
    throw InputError("gain schedule: base gains must be positive");
  if ((weight_p.array() < 0).any() || (weight_d.array() < 0).any())
    throw InputError("gain schedule: variance weights must be nonnegative");
  if ((ceiling_p.array() < base_p.array()).any() ||
      (ceiling_d.array() < base_d.array()).any())
    throw InputError("gain schedule: ceiling below base gain");
}

GainSchedule GainSchedule::constant(const Eigen::VectorXd& kp, const Eigen::VectorXd& kd) {
  GainSchedule s{kp, kd, Eigen::VectorXd::Zero(kp.size()), Eigen::VectorXd::Zero(kd.size()),
                 kp, kd};
  s.validate();
  return s;
}

GainSchedule GainSchedule::with_variance_ceilings(const Eigen::VectorXd& base_p,
                                                  const Eigen::VectorXd& base_d,
                                                  const Eigen::VectorXd& weight_p,
                                                  const Eigen::VectorXd& weight_d,
                                                  const Eigen::VectorXd& signal_variances) {
  if (signal_variances.size() != base_p.size())
    throw InputError("gain schedule: one signal variance per joint required");
  GainSchedule s{base_p, base_d, weight_p, weight_d,
                 base_p + weight_p.cwiseProduct(signal_variances),
                 base_d + weight_d.cwiseProduct(signal_variances)};
  s.validate();
  return s;
}

GainSchedule GainSchedule::without_adaptation() const {
  return constant(base_p, base_d);
}

FeedbackGains gains_from_variance(const GainSchedule& schedule,
                                  const Eigen::VectorXd& var_p,
                                  const Eigen::VectorXd& var_d) {
  const int n = schedule.dof();
  if (var_p.size() != n || var_d.size() != n)
    throw InputError("gains_from_variance: expected " + std::to_string(n) +
                     " variances");
  if ((var_p.array() < 0).any() || (var_d.array() < 0).any())
    throw InputError("gains_from_variance: negative variance");
  FeedbackGains g{DiagonalGain(n), DiagonalGain(n)};
  for (int i = 0; i < n; ++i) {
    g.kp.diagonal()[i] = std::min(schedule.base_p[i] + schedule.weight_p[i] * var_p[i],
                                  schedule.ceiling_p[i]);
    g.kd.diagonal()[i] = std::min(schedule.base_d[i] + schedule.weight_d[i] * var_d[i],
                                  schedule.ceiling_d[i]);
  }
  return g;
}

TrackingError tracking_error(const ManipulatorState& state, const DesiredState& desired) {
  if (state.q.size() != desired.q.size() || state.qdot.size() != desired.qdot.size())
    throw InputError("tracking_error: dimension mismatch");
  return {state.q - desired.q, state.qdot - desired.qdot};
}

std::vector<int> velocity_position_subset(int dof) {
  std::vector<int> s(2 * dof);
  std::iota(s.begin(), s.end(), dof);
  return s;
}

std::vector<int> position_subset(int dof) {
  std::vector<int> s(dof);
  std::iota(s.begin(), s.end(), 2 * dof);
  return s;
}

ControlOutput control_torque(const ManipulatorModel& plant_est, const GPModel* gp,
                             const GainSchedule& schedule,
                             const ManipulatorState& state,
                             const DesiredState& desired) {
  const int n = plant_est.dof();
  if (schedule.dof() != n) throw InputError("control_torque: schedule size mismatch");
  if (desired.qddot.size() != n)
    throw InputError("control_torque: desired acceleration size mismatch");
  const TrackingError err = tracking_error(state, desired);

  ControlOutput out;
  out.mu = Eigen::VectorXd::Zero(n);
  out.var_p = Eigen::VectorXd::Zero(n);
  out.var_d = Eigen::VectorXd::Zero(n);
  if (gp) {
    if (gp->input_dim() != 3 * n || gp->output_dim() != n)
      throw InputError("control_torque: GP must map R^" + std::to_string(3 * n) +
                       " to R^" + std::to_string(n));
    const Eigen::VectorXd qbreve = stack_state(desired.qddot, state.qdot, state.q);
    out.mu = gp->predict_mean(qbreve);
  }
  const bool adaptive = (schedule.weight_p.array() != 0).any() ||
                        (schedule.weight_d.array() != 0).any();
  if (gp && adaptive) {
    const Eigen::VectorXd qbreve = stack_state(desired.qddot, state.qdot, state.q);
    const auto vp_subset = velocity_position_subset(n);
    const auto p_subset = position_subset(n);
    out.var_d = gp->predict_marginal(qbreve.tail(2 * n), vp_subset).variance;
    out.var_p = gp->predict_marginal(qbreve.tail(n), p_subset).variance;
  }
  FeedbackGains gains = gains_from_variance(schedule, out.var_p, out.var_d);
  out.kp = std::move(gains.kp);
  out.kd = std::move(gains.kd);

  out.tau = plant_est.inertia(state.q) * desired.qddot +
            plant_est.coriolis(state.q, state.qdot) * desired.qdot +
            plant_est.gravity(state.q) + out.mu - out.kd * err.edot - out.kp * err.e;
  return out;
}

}  // namespace gpct
