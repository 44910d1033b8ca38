#include "gpct/lagrangian.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gpct/errors.hpp"

namespace gpct {

void SystemBounds::validate() const {
  if (h1 > h2) throw InputError("bounds: h1 > h2");
  if (k_d1 > k_d2) throw InputError("bounds: k_d1 > k_d2");
  if (k_p1 > k_p2) throw InputError("bounds: k_p1 > k_p2");
  for (double v : {h1, h2, k_c, k_d1, k_d2, k_p1, k_p2, q_d_bar, qdot_d_bar, delta_bar})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InputError("bounds: constants must be finite and nonnegative");
}

void ManipulatorState::validate() const {
  if (q.size() != qdot.size() || (qddot && qddot->size() != q.size()))
    throw InputError("state: dimension mismatch");
  if (!q.allFinite() || !qdot.allFinite() || (qddot && !qddot->allFinite()))
    throw InputError("state: non-finite entries");
}

TwoLinkArm::TwoLinkArm(TwoLinkParameters p) : p_(p) {
  if (!(p.mass1 > 0 && p.mass2 > 0 && p.length1 > 0 && p.length2 > 0))
    throw InputError("two-link arm: masses and lengths must be positive");
}

Eigen::MatrixXd TwoLinkArm::inertia(const Eigen::VectorXd& q) const {
  const double a = p_.mass1 * p_.com1 * p_.com1 +
                   p_.mass2 * (p_.length1 * p_.length1 + p_.com2 * p_.com2);
  const double b = p_.mass2 * p_.length1 * p_.com2;
  const double c = p_.mass2 * p_.com2 * p_.com2;
  const double c2 = std::cos(q[1]);
  Eigen::MatrixXd h(2, 2);
  h << a + 2.0 * b * c2, c + b * c2,
       c + b * c2,       c;
  return h;
}

Eigen::MatrixXd TwoLinkArm::coriolis(const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& qdot) const {
  const double h = -p_.mass2 * p_.length1 * p_.com2 * std::sin(q[1]);
  Eigen::MatrixXd c(2, 2);
  c << h * qdot[1], h * (qdot[0] + qdot[1]),
       -h * qdot[0], 0.0;
  return c;
}

Eigen::VectorXd TwoLinkArm::gravity(const Eigen::VectorXd& q) const {
  const double g0 = p_.gravity;
  const double c1 = std::cos(q[0]);
  const double c12 = std::cos(q[0] + q[1]);
  Eigen::VectorXd g(2);
  g << (p_.mass1 * p_.com1 + p_.mass2 * p_.length1) * g0 * c1 +
           p_.mass2 * p_.com2 * g0 * c12,
       p_.mass2 * p_.com2 * g0 * c12;
  return g;
}

Pendulum::Pendulum(double mass, double length, double gravity)
    : mass_(mass), length_(length), gravity_(gravity) {
  if (!(mass > 0 && length > 0))
    throw InputError("pendulum: mass and length must be positive");
}

Eigen::MatrixXd Pendulum::inertia(const Eigen::VectorXd&) const {
  return Eigen::MatrixXd::Constant(1, 1, mass_ * length_ * length_);
}

Eigen::MatrixXd Pendulum::coriolis(const Eigen::VectorXd&,
                                   const Eigen::VectorXd&) const {
  return Eigen::MatrixXd::Zero(1, 1);
}

Eigen::VectorXd Pendulum::gravity(const Eigen::VectorXd& q) const {
  return Eigen::VectorXd::Constant(1, mass_ * gravity_ * length_ * std::cos(q[0]));
}

Eigen::VectorXd stack_state(const Eigen::VectorXd& qddot,
                            const Eigen::VectorXd& qdot,
                            const Eigen::VectorXd& q) {
  Eigen::VectorXd x(qddot.size() + qdot.size() + q.size());
  x << qddot, qdot, q;
  return x;
}

Eigen::VectorXd UnknownDynamics::operator()(const Eigen::VectorXd& qbreve) const {
  if (qbreve.size() != 3 * dof)
    throw InputError("unknown dynamics: expected input of size " +
                     std::to_string(3 * dof));
  return fn(qbreve);
}

UnknownDynamics UnknownDynamics::zero(int dof) {
  return {Kind::zero, dof,
          [dof](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dof).eval(); }};
}

Eigen::VectorXd two_link_disturbance(const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& qdot) {
  Eigen::VectorXd f(2);
  f << -qdot[0] + 2.0 * std::sin(q[1]) + std::abs(q[0]),
       -qdot[1] + 2.0 * std::sin(q[1]);
  return f;
}

UnknownDynamics UnknownDynamics::analytic_two_link() {
  return {Kind::analytic, 2, [](const Eigen::VectorXd& x) {
            return two_link_disturbance(x.segment(4, 2), x.segment(2, 2));
          }};
}

UnknownDynamics UnknownDynamics::from_gp(std::shared_ptr<const GPModel> gp) {
  if (!gp) throw InputError("unknown dynamics: null GP");
  const int n = gp->output_dim();
  if (gp->input_dim() != 2 * n)
    throw InputError("unknown dynamics: GP must map [qdot; q] to R^n");
  return {Kind::gp_sample_path, n, [gp, n](const Eigen::VectorXd& x) {
            return gp->predict_mean(x.tail(2 * n));
          }};
}

Eigen::VectorXd inverse_dynamics(const ManipulatorModel& model,
                                 const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qdot,
                                 const Eigen::VectorXd& qddot) {
  return model.inertia(q) * qddot + model.coriolis(q, qdot) * qdot +
         model.gravity(q);
}

Eigen::VectorXd forward_dynamics(const ManipulatorModel& model,
                                 const ManipulatorState& state,
                                 const Eigen::VectorXd& tau,
                                 const UnknownDynamics& kappa) {
  const int n = model.dof();
  if (state.q.size() != n || state.qdot.size() != n || tau.size() != n)
    throw InputError("forward_dynamics: dimension mismatch");
  const Eigen::VectorXd qddot_prev =
      state.qddot ? *state.qddot : Eigen::VectorXd::Zero(n).eval();
  const Eigen::VectorXd rhs =
      tau - model.coriolis(state.q, state.qdot) * state.qdot -
      model.gravity(state.q) - kappa(stack_state(qddot_prev, state.qdot, state.q));
  const Eigen::LLT<Eigen::MatrixXd> llt(model.inertia(state.q));
  if (llt.info() != Eigen::Success)
    throw NumericalError("forward_dynamics: inertia matrix is not positive definite");
  return llt.solve(rhs);
}

Eigen::VectorXd residual_torque(const ManipulatorModel& model_est,
                                const ManipulatorState& state,
                                const Eigen::VectorXd& tau_true) {
  if (!state.qddot) throw InputError("residual_torque: state has no acceleration");
  return tau_true - inverse_dynamics(model_est, state.q, state.qdot, *state.qddot);
}

double kinetic_energy(const ManipulatorModel& model, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& qdot) {
  return 0.5 * qdot.dot(model.inertia(q) * qdot);
}

namespace {

struct BoundAccumulator {
  double h1 = std::numeric_limits<double>::infinity();
  double h2 = 0.0;
  double k_c = 0.0;

  void add_inertia(const Eigen::MatrixXd& h) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    h1 = std::min(h1, es.eigenvalues().minCoeff());
    h2 = std::max(h2, es.eigenvalues().maxCoeff());
  }
  void add_coriolis(const Eigen::MatrixXd& c, double qdot_norm) {
    if (qdot_norm <= 1e-12) return;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    k_c = std::max(k_c, svd.singularValues()[0] / qdot_norm);
  }
};

}  // namespace

SystemBounds estimate_bounds(const ManipulatorModel& model, const Box& q_domain,
                             const Box& qdot_domain,
                             const BoundSampling& sampling) {
  q_domain.validate();
  qdot_domain.validate();
  const int n = model.dof();
  if (q_domain.dim() != n || qdot_domain.dim() != n)
    throw InputError("estimate_bounds: domain dimension does not match the plant");

  BoundAccumulator acc;
  std::mt19937_64 rng(sampling.seed);

  // Full tensor grid over q while it stays small; directions of qdot drawn
  // at random per grid node.
  const int g = std::max(sampling.grid_points, 1);
  const double nodes = std::pow(static_cast<double>(g), n);
  if (nodes <= 1e6) {
    const long total = static_cast<long>(nodes);
    Eigen::VectorXd q(n);
    for (long idx = 0; idx < total; ++idx) {
      long rem = idx;
      for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(rem % g);
        rem /= g;
        const double t = g == 1 ? 0.5 : static_cast<double>(k) / (g - 1);
        q[i] = q_domain.lower[i] + t * (q_domain.upper[i] - q_domain.lower[i]);
      }
      acc.add_inertia(model.inertia(q));
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, i);
        acc.add_coriolis(model.coriolis(q, e), 1.0);
      }
      const Eigen::VectorXd qdot = sample_uniform(qdot_domain, rng);
      acc.add_coriolis(model.coriolis(q, qdot), qdot.norm());
    }
  }
  for (int s = 0; s < sampling.random_samples; ++s) {
    const Eigen::VectorXd q = sample_uniform(q_domain, rng);
    const Eigen::VectorXd qdot = sample_uniform(qdot_domain, rng);
    acc.add_inertia(model.inertia(q));
    acc.add_coriolis(model.coriolis(q, qdot), qdot.norm());
  }

  SystemBounds b;
  b.h1 = acc.h1;
  b.h2 = acc.h2;
  b.k_c = acc.k_c;
  return b;
}

}  // namespace gpct
