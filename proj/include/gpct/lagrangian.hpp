#pragma once

#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Core>

#include "gpct/box.hpp"
#include "gpct/gp_regression.hpp"
#include "gpct/system_bounds.hpp"

namespace gpct {

struct ManipulatorState {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
  /// Only needed for residual data; forward simulation stores the previous
  /// acceleration here.
  std::optional<Eigen::VectorXd> qddot;

  void validate() const;
};

/// H(q) qddot + C(q, qdot) qdot + g(q) + kappa = tau
class ManipulatorModel {
 public:
  virtual ~ManipulatorModel() = default;
  virtual int dof() const = 0;
  virtual Eigen::MatrixXd inertia(const Eigen::VectorXd& q) const = 0;
  /// Christoffel-symbol parameterization, so that Hdot - 2C is skew-symmetric.
  virtual Eigen::MatrixXd coriolis(const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qdot) const = 0;
  virtual Eigen::VectorXd gravity(const Eigen::VectorXd& q) const = 0;
};

/// Planar two-link arm with point masses. Angles: q1 from the positive
/// horizontal axis, q2 relative to link 1; gravity acts along -y.
struct TwoLinkParameters {
  double mass1 = 1.0;
  double mass2 = 1.0;
  double length1 = 1.0;
  double length2 = 1.0;
  double com1 = 0.5;  ///< distance of mass 1 from joint 1
  double com2 = 0.5;  ///< distance of mass 2 from joint 2
  double gravity = 10.0;
};

class TwoLinkArm final : public ManipulatorModel {
 public:
  explicit TwoLinkArm(TwoLinkParameters p = {});
  const TwoLinkParameters& parameters() const { return p_; }

  int dof() const override { return 2; }
  Eigen::MatrixXd inertia(const Eigen::VectorXd& q) const override;
  Eigen::MatrixXd coriolis(const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qdot) const override;
  Eigen::VectorXd gravity(const Eigen::VectorXd& q) const override;

 private:
  TwoLinkParameters p_;
};

/// Point mass on a massless rod; angle from the positive horizontal axis.
class Pendulum final : public ManipulatorModel {
 public:
  Pendulum(double mass, double length, double gravity);

  int dof() const override { return 1; }
  Eigen::MatrixXd inertia(const Eigen::VectorXd& q) const override;
  Eigen::MatrixXd coriolis(const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qdot) const override;
  Eigen::VectorXd gravity(const Eigen::VectorXd& q) const override;

 private:
  double mass_, length_, gravity_;
};

/// [qddot; qdot; q]
Eigen::VectorXd stack_state(const Eigen::VectorXd& qddot,
                            const Eigen::VectorXd& qdot,
                            const Eigen::VectorXd& q);

/// Generalized disturbance force kappa(qbreve), qbreve = [qddot; qdot; q].
struct UnknownDynamics {
  enum class Kind { zero, analytic, gp_sample_path };

  Kind kind = Kind::zero;
  int dof = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn;

  Eigen::VectorXd operator()(const Eigen::VectorXd& qbreve) const;

  static UnknownDynamics zero(int dof);
  /// [-qdot1 + 2 sin q2 + |q1|, -qdot2 + 2 sin q2]
  static UnknownDynamics analytic_two_link();
  /// Posterior mean of a GP whose inputs are [qdot; q].
  static UnknownDynamics from_gp(std::shared_ptr<const GPModel> gp);
};

Eigen::VectorXd two_link_disturbance(const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& qdot);

/// H qddot + C qdot + g
Eigen::VectorXd inverse_dynamics(const ManipulatorModel& model,
                                 const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qdot,
                                 const Eigen::VectorXd& qddot);

/// qddot = H^-1 (tau - C qdot - g - kappa). kappa sees state.qddot in its
/// acceleration slot (zero if absent). Throws NumericalError if H is not SPD.
Eigen::VectorXd forward_dynamics(const ManipulatorModel& model,
                                 const ManipulatorState& state,
                                 const Eigen::VectorXd& tau,
                                 const UnknownDynamics& kappa);

/// tau - (Hhat qddot + Chat qdot + ghat).
Eigen::VectorXd residual_torque(const ManipulatorModel& model_est,
                                const ManipulatorState& state,
                                const Eigen::VectorXd& tau_true);

double kinetic_energy(const ManipulatorModel& model, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& qdot);

struct BoundSampling {
  int grid_points = 21;
  int random_samples = 10000;
  std::uint64_t seed = 0;
};

/// h1, h2 and k_c by dense grid over q plus uniform sampling of (q, qdot).
/// Only those three fields of the result are set.
SystemBounds estimate_bounds(const ManipulatorModel& model, const Box& q_domain,
                             const Box& qdot_domain,
                             const BoundSampling& sampling = {});

}  // namespace gpct
