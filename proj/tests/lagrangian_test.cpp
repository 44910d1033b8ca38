#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <doctest.h>

#include "gpct/errors.hpp"
#include "gpct/lagrangian.hpp"

using namespace gpct;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

class OffsetGravity final : public ManipulatorModel {
 public:
  OffsetGravity(const ManipulatorModel& base, Eigen::VectorXd offset)
      : base_(base), offset_(std::move(offset)) {}
  int dof() const override { return base_.dof(); }
  Eigen::MatrixXd inertia(const Eigen::VectorXd& q) const override { return base_.inertia(q); }
  Eigen::MatrixXd coriolis(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const override {
    return base_.coriolis(q, v);
  }
  Eigen::VectorXd gravity(const Eigen::VectorXd& q) const override {
    return base_.gravity(q) + offset_;
  }

 private:
  const ManipulatorModel& base_;
  Eigen::VectorXd offset_;
};

Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

}  // namespace

TEST_CASE("two-link inertia") {
  const TwoLinkArm arm;
  Eigen::Matrix2d straight, folded;
  straight << 2.5, 0.75, 0.75, 0.25;
  folded << 0.5, -0.25, -0.25, 0.25;
  CHECK((arm.inertia(v2(0.3, 0.0)) - straight).norm() < 1e-14);
  CHECK((arm.inertia(v2(-1.0, pi)) - folded).norm() < 1e-14);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-pi, pi);
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd h = arm.inertia(v2(u(rng), u(rng)));
    CHECK(h(0, 1) == h(1, 0));
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("two-link coriolis") {
  const TwoLinkArm arm;
  CHECK(arm.coriolis(v2(0.4, 1.1), v2(0, 0)).norm() == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q = v2(u(rng), u(rng)), v = v2(u(rng), u(rng));
    const double h = 1e-6;
    const Eigen::MatrixXd hdot =
        (arm.inertia(q + h * v) - arm.inertia(q - h * v)) / (2 * h);
    const Eigen::MatrixXd n = hdot - 2 * arm.coriolis(q, v);
    CHECK((n + n.transpose()).norm() < 1e-8);
    // C(q, v) is linear in v
    const Eigen::VectorXd w = v2(u(rng), u(rng));
    CHECK((arm.coriolis(q, v + 2 * w) - arm.coriolis(q, v) - 2 * arm.coriolis(q, w)).norm() <
          1e-12);
  }
}

TEST_CASE("two-link gravity") {
  const TwoLinkArm arm;
  const Eigen::VectorXd g0 = arm.gravity(v2(0, 0));
  CHECK(g0[0] == Approx(20.0));
  CHECK(g0[1] == Approx(5.0));
  const Eigen::VectorXd up = arm.gravity(v2(pi / 2, 0));
  CHECK(std::abs(up[0]) < 1e-12);
  CHECK(std::abs(up[1]) < 1e-12);
  // first link pointing left, second folded back to the right
  const Eigen::VectorXd gp = arm.gravity(v2(pi, pi));
  CHECK(gp[0] == Approx(-15.0 + 5.0));
  CHECK(gp[1] == Approx(5.0));
  CHECK(gp[0] < 0);
  CHECK(gp[1] > 0);
}

TEST_CASE("forward and inverse dynamics agree") {
  const TwoLinkArm arm;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 200; ++i) {
    ManipulatorState s{v2(u(rng), u(rng)), v2(u(rng), u(rng)), std::nullopt};
    const Eigen::VectorXd a = v2(u(rng), u(rng));
    const Eigen::VectorXd tau = inverse_dynamics(arm, s.q, s.qdot, a);
    CHECK((forward_dynamics(arm, s, tau, UnknownDynamics::zero(2)) - a).norm() < 1e-10);
  }
}

TEST_CASE("equilibria") {
  const TwoLinkArm arm;
  const ManipulatorState s{v2(0.7, -0.2), v2(0, 0), std::nullopt};
  CHECK(forward_dynamics(arm, s, arm.gravity(s.q), UnknownDynamics::zero(2)).norm() < 1e-12);

  TwoLinkParameters p;
  p.gravity = 0.0;
  const TwoLinkArm free(p);
  CHECK(forward_dynamics(free, s, v2(0, 0), UnknownDynamics::zero(2)).norm() == 0.0);
}

TEST_CASE("residual torque") {
  const TwoLinkArm arm;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  const UnknownDynamics kappa = UnknownDynamics::analytic_two_link();
  const Eigen::VectorXd delta = v2(0.25, -1.5);
  const OffsetGravity shifted(arm, delta);
  for (int i = 0; i < 50; ++i) {
    ManipulatorState s{v2(u(rng), u(rng)), v2(u(rng), u(rng)), v2(u(rng), u(rng))};
    const Eigen::VectorXd base = inverse_dynamics(arm, s.q, s.qdot, *s.qddot);
    CHECK(residual_torque(arm, s, base).norm() < 1e-12);

    const Eigen::VectorXd qb = stack_state(*s.qddot, s.qdot, s.q);
    const Eigen::VectorXd k = kappa(qb);
    CHECK((residual_torque(arm, s, base + k) - k).norm() < 1e-12);
    const Eigen::VectorXd expected{{-s.qdot[0] + 2 * std::sin(s.q[1]) + std::abs(s.q[0]),
                                    -s.qdot[1] + 2 * std::sin(s.q[1])}};
    CHECK((k - expected).norm() < 1e-14);

    // the estimate carries g + delta, so the residual against the true plant shifts by -delta
    CHECK((residual_torque(arm, s, inverse_dynamics(shifted, s.q, s.qdot, *s.qddot) + k) -
           (k + delta))
              .norm() < 1e-12);
  }
  ManipulatorState no_acc{v2(0, 0), v2(0, 0), std::nullopt};
  CHECK_THROWS_AS(residual_torque(arm, no_acc, v2(0, 0)), InputError);
}

TEST_CASE("bound estimation") {
  const TwoLinkArm arm;
  const Box q{v2(-pi, -pi), v2(pi, pi)};
  const Box v{v2(-1, -1), v2(1, 1)};
  const SystemBounds b = estimate_bounds(arm, q, v);
  // eigenvalues of H at q2 = 0 and at q2 = pi
  const double top = 0.5 * (2.75 + std::sqrt(2.25 * 2.25 + 4 * 0.5625));
  const double low = 0.5 * (0.75 - std::sqrt(0.25 * 0.25 + 4 * 0.0625));
  CHECK(b.h2 == Approx(top).epsilon(1e-9));
  CHECK(b.h2 >= top - 1e-12);
  CHECK(b.h1 <= low + 1e-9);
  CHECK(b.h1 == Approx(0.5 * (2.75 - std::sqrt(2.75 * 2.75 - 0.25))).epsilon(1e-9));
  CHECK(b.h1 > 0);
  CHECK(b.h1 <= b.h2);
  CHECK(b.k_c > 0);

  const Pendulum pend(2.0, 0.5, 9.81);
  const SystemBounds pb = estimate_bounds(pend, Box{Eigen::VectorXd::Constant(1, -1),
                                                    Eigen::VectorXd::Constant(1, 1)},
                                          Box{Eigen::VectorXd::Constant(1, -1),
                                              Eigen::VectorXd::Constant(1, 1)});
  CHECK(pb.h1 == Approx(0.5));
  CHECK(pb.h2 == Approx(0.5));
  CHECK(pb.k_c == 0.0);

  CHECK_THROWS_AS(estimate_bounds(arm, Box{Eigen::VectorXd(0), Eigen::VectorXd(0)}, v),
                  InputError);
}

TEST_CASE("state validation") {
  ManipulatorState s{v2(0, 0), Eigen::VectorXd::Zero(3), std::nullopt};
  CHECK_THROWS_AS(s.validate(), InputError);
  CHECK_THROWS_AS(TwoLinkArm(TwoLinkParameters{.mass1 = 0.0}), InputError);
}
