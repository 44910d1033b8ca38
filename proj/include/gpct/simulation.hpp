#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Core>

#include "gpct/box.hpp"
#include "gpct/controller.hpp"
#include "gpct/gp_regression.hpp"
#include "gpct/lagrangian.hpp"

namespace gpct {

/// Desired joint trajectory q_d(t) with analytic derivatives.
struct TrajectorySpec {
  enum class Kind { sinusoid, hold, table };

  Kind kind = Kind::sinusoid;
  /// sinusoid: q_d = offset + amplitude * sin(frequency * t); hold: q_d = offset.
  Eigen::VectorXd offset;
  Eigen::VectorXd amplitude;
  Eigen::VectorXd frequency;
  double duration = 20.0;
  /// table: rows [t, q_d, qdot_d, qddot_d], strictly increasing t; linear
  /// interpolation, clamped at the ends.
  Eigen::MatrixXd table;

  int dof() const;
  void validate() const;
  DesiredState at(double t) const;
  /// Samples sup ||q_d|| and sup ||qdot_d|| on a grid of spacing dt.
  std::pair<double, double> bounds(double dt) const;
};

enum class SamplingMode { uniform, grid };

struct TrainingDataOptions {
  int count = 225;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::uniform;
  /// Standard deviation of Gaussian noise added to the residual outputs.
  double noise_std = 0.0;
};

/// Samples qbreve = [qddot; qdot; q] from `domain`, applies the true plant
/// plus kappa to obtain tau, and records tau - tau_hat of the estimate.
TrainingSet generate_training_data(const ManipulatorModel& plant_true,
                                   const ManipulatorModel& plant_est,
                                   const UnknownDynamics& kappa, const Box& domain,
                                   const TrainingDataOptions& options);

using ControlLaw =
    std::function<ControlOutput(const ManipulatorState&, const DesiredState&)>;

struct SimulationResult {
  Eigen::VectorXd time;
  /// One row per time sample.
  Eigen::MatrixXd q, qdot, q_d, qdot_d, e, edot, tau, kp, kd, var_p, var_d;

  Eigen::Index samples() const { return time.size(); }
  int dof() const { return static_cast<int>(q.cols()); }
};

struct IntegratorOptions {
  /// zero_order: control computed at t_k and held over the step.
  /// continuous: control re-evaluated at every RK4 stage.
  enum class Hold { zero_order, continuous };

  double dt = 1e-3;
  /// Simulated span [0, duration]; defaults to the trajectory duration.
  std::optional<double> duration;
  Hold hold = Hold::zero_order;
};

/// Fixed-step RK4 on (q, qdot). Recorded controls are those computed at t_k.
/// Throws DivergenceError with the time at which the state became non-finite.
SimulationResult integrate(const ManipulatorModel& plant_true,
                           const UnknownDynamics& kappa, const ControlLaw& controller,
                           const TrajectorySpec& trajectory,
                           const ManipulatorState& initial,
                           const IntegratorOptions& options = {});

/// One RK4 step of the plant under constant torque. state.qddot fills
/// kappa's acceleration slot in every stage; the result carries the
/// acceleration at the start of the step.
ManipulatorState rk4_step(const ManipulatorModel& plant, const UnknownDynamics& kappa,
                          const ManipulatorState& state, const Eigen::VectorXd& tau,
                          double dt);

struct Metrics {
  double rms_error = 0.0;          ///< RMS of ||e|| over all samples
  double max_error = 0.0;
  double rms_velocity_error = 0.0;
  double max_velocity_error = 0.0;
  double steady_state_error = 0.0; ///< mean ||e|| over the final 10 %
  double final_window_sup = 0.0;   ///< sup ||(edot, e)|| over the final 10 %
  double mean_gain_norm = 0.0;     ///< spectral norm of [K_p, K_d]
  double max_gain_norm = 0.0;
  int samples_in_region = 0;
  double mean_gain_norm_in_region = 0.0;
};

double gain_norm(const Eigen::VectorXd& kp_diag, const Eigen::VectorXd& kd_diag);

/// `region` is a box over [q; qdot]; samples whose state lies inside it
/// contribute to the in-region gain statistics.
Metrics metrics(const SimulationResult& result,
                const std::optional<Box>& region = std::nullopt);

struct ComparisonSetup {
  std::shared_ptr<const ManipulatorModel> plant_true;
  std::shared_ptr<const ManipulatorModel> plant_est;
  UnknownDynamics kappa;
  std::shared_ptr<const GPModel> gp;  ///< may be null
  GainSchedule schedule;
  TrajectorySpec trajectory;
  ManipulatorState initial;
  IntegratorOptions integrator;
};

struct ComparisonResult {
  SimulationResult static_run;
  SimulationResult adaptive_run;
};

/// Runs the same plant, kappa, GP and trajectory twice: once with the
/// schedule's weights zeroed and once with the schedule as given.
ComparisonResult run_comparison(const ComparisonSetup& setup);

ControlLaw make_control_law(std::shared_ptr<const ManipulatorModel> plant_est,
                            std::shared_ptr<const GPModel> gp, GainSchedule schedule);

/// Columns t, q_i, qdot_i, q_d_i, e_i, tau_i, Kp_ii, Kd_ii, var_p_i, var_d_i.
void write_trace_csv(const SimulationResult& result, const std::filesystem::path& path);
/// Phase portrait of one joint: t, q, qdot, q_d, qdot_d, gain_norm.
void write_phase_csv(const SimulationResult& result, const std::filesystem::path& path,
                     int joint = 0);

}  // namespace gpct
