#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <doctest.h>

#include "gpct/errors.hpp"
#include "gpct/simulation.hpp"

using namespace gpct;
using doctest::Approx;

namespace {

Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

Box six_box() {
  return Box{Eigen::VectorXd::Constant(6, -1.0), Eigen::VectorXd::Constant(6, 1.0)};
}

TrajectorySpec sinusoid(double duration) {
  TrajectorySpec t;
  t.offset = v2(0, 0);
  t.amplitude = v2(1, -1);
  t.frequency = v2(1, 1);
  t.duration = duration;
  return t;
}

ManipulatorState start_on(const TrajectorySpec& t) {
  const DesiredState d = t.at(0.0);
  return {d.q, d.qdot, std::nullopt};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("training data") {
  const auto arm = std::make_shared<TwoLinkArm>();
  TrainingDataOptions opt;
  opt.seed = 9;
  const TrainingSet zero =
      generate_training_data(*arm, *arm, UnknownDynamics::zero(2), six_box(), opt);
  CHECK(zero.inputs.cols() == 225);
  CHECK(zero.inputs.rows() == 6);
  CHECK(zero.outputs.cwiseAbs().maxCoeff() < 1e-12);

  const UnknownDynamics kappa = UnknownDynamics::analytic_two_link();
  const TrainingSet a = generate_training_data(*arm, *arm, kappa, six_box(), opt);
  const TrainingSet b = generate_training_data(*arm, *arm, kappa, six_box(), opt);
  CHECK(a.inputs == b.inputs);
  CHECK(a.outputs == b.outputs);
  for (int j = 0; j < a.inputs.cols(); ++j) {
    CHECK(six_box().contains(a.inputs.col(j)));
    CHECK((a.outputs.row(j).transpose() - kappa(a.inputs.col(j))).norm() < 1e-10);
  }
  opt.seed = 10;
  CHECK(generate_training_data(*arm, *arm, kappa, six_box(), opt).inputs != a.inputs);
}

TEST_CASE("continuous hold tracks exactly with a perfect model") {
  const auto arm = std::make_shared<TwoLinkArm>();
  const TrajectorySpec traj = sinusoid(5.0);
  IntegratorOptions opt;
  opt.hold = IntegratorOptions::Hold::continuous;
  const auto law = make_control_law(arm, nullptr, GainSchedule::constant(v2(10, 10), v2(10, 10)));
  const SimulationResult r =
      integrate(*arm, UnknownDynamics::zero(2), law, traj, start_on(traj), opt);
  CHECK(r.samples() == 5001);
  CHECK(r.e.rowwise().norm().maxCoeff() <= 1e-6);
}

TEST_CASE("zero-order hold error shrinks with the step") {
  const auto arm = std::make_shared<TwoLinkArm>();
  const TrajectorySpec traj = sinusoid(2.0);
  const auto law = make_control_law(arm, nullptr, GainSchedule::constant(v2(10, 10), v2(10, 10)));
  double prev = 0;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    IntegratorOptions opt;
    opt.dt = dt;
    const double err =
        integrate(*arm, UnknownDynamics::zero(2), law, traj, start_on(traj), opt)
            .e.rowwise().norm().maxCoeff();
    if (prev > 0) CHECK(err / prev == Approx(0.5).epsilon(0.1));
    prev = err;
  }
}

TEST_CASE("free pendulum conserves energy") {
  const Pendulum pend(1.0, 1.0, 0.0);
  TrajectorySpec hold;
  hold.kind = TrajectorySpec::Kind::hold;
  hold.offset = Eigen::VectorXd::Zero(1);
  hold.duration = 10.0;
  const ControlLaw none = [](const ManipulatorState& s, const DesiredState&) {
    ControlOutput out;
    out.tau = Eigen::VectorXd::Zero(s.q.size());
    out.kp = DiagonalGain(Eigen::VectorXd::Zero(1));
    out.kd = DiagonalGain(Eigen::VectorXd::Zero(1));
    out.var_p = out.var_d = out.mu = Eigen::VectorXd::Zero(1);
    return out;
  };
  const ManipulatorState s0{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.3),
                            std::nullopt};
  const SimulationResult r = integrate(pend, UnknownDynamics::zero(1), none, hold, s0);
  const double e0 = 0.5 * 1.3 * 1.3;
  for (Eigen::Index k = 0; k < r.samples(); ++k)
    CHECK(std::abs(kinetic_energy(pend, r.q.row(k).transpose(), r.qdot.row(k).transpose()) - e0) <
          1e-8);
}

TEST_CASE("rk4 step of a free pendulum") {
  const Pendulum pend(1.0, 1.0, 0.0);
  const ManipulatorState s{Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 2.0),
                           std::nullopt};
  const ManipulatorState next =
      rk4_step(pend, UnknownDynamics::zero(1), s, Eigen::VectorXd::Constant(1, 1.0), 0.1);
  CHECK(next.q[0] == Approx(0.5 + 0.2 + 0.5 * 0.01));
  CHECK(next.qdot[0] == Approx(2.1));
}

TEST_CASE("comparison with zero weights gives identical runs") {
  ComparisonSetup setup;
  setup.plant_true = std::make_shared<TwoLinkArm>();
  setup.plant_est = setup.plant_true;
  setup.kappa = UnknownDynamics::analytic_two_link();
  setup.schedule = GainSchedule::constant(v2(10, 10), v2(10, 10));
  setup.trajectory = sinusoid(2.0);
  setup.initial = start_on(setup.trajectory);
  const ComparisonResult r = run_comparison(setup);
  CHECK(r.static_run.q == r.adaptive_run.q);
  CHECK(r.static_run.tau == r.adaptive_run.tau);
  CHECK(r.static_run.e.norm() > 0);
}

TEST_CASE("metrics") {
  SimulationResult r;
  const int n = 101;
  r.time = Eigen::VectorXd::LinSpaced(n, 0, 1);
  r.q = r.qdot = r.q_d = r.qdot_d = r.edot = r.tau = r.var_p = r.var_d = Eigen::MatrixXd::Zero(n, 2);
  r.kp = r.kd = Eigen::MatrixXd::Constant(n, 2, 10.0);
  r.e = Eigen::MatrixXd::Zero(n, 2);
  const Metrics zero = metrics(r);
  CHECK(zero.rms_error == 0.0);
  CHECK(zero.max_error == 0.0);
  CHECK(zero.steady_state_error == 0.0);

  r.e.col(0).setConstant(0.3);
  r.e.col(1).setConstant(0.4);
  const Metrics c = metrics(r);
  CHECK(c.rms_error == Approx(0.5));
  CHECK(c.max_error == Approx(0.5));
  CHECK(c.steady_state_error == Approx(0.5));
  CHECK(c.final_window_sup == Approx(0.5));

  // error ramp ||e|| = t over [0, 1]: RMS over the samples is sqrt(mean t_k^2)
  r.e.col(0) = r.time;
  r.e.col(1).setZero();
  const Metrics ramp = metrics(r);
  CHECK(ramp.rms_error == Approx(std::sqrt(r.time.array().square().mean())));
  CHECK(ramp.max_error == Approx(1.0));

  CHECK(c.mean_gain_norm == Approx(10.0 * std::sqrt(2.0)));
  CHECK(gain_norm(v2(3, 1), v2(4, 1)) == Approx(5.0));

  const Box around{Eigen::VectorXd::Constant(4, -0.1), Eigen::VectorXd::Constant(4, 0.1)};
  CHECK(metrics(r, around).samples_in_region == n);
  const Box away{Eigen::VectorXd::Constant(4, 1.0), Eigen::VectorXd::Constant(4, 2.0)};
  CHECK(metrics(r, away).samples_in_region == 0);
}

TEST_CASE("divergence is reported with its time") {
  const TwoLinkArm arm;
  TrajectorySpec hold;
  hold.kind = TrajectorySpec::Kind::hold;
  hold.offset = v2(0, 0);
  hold.duration = 5.0;
  const ControlLaw blowup = [](const ManipulatorState& s, const DesiredState&) {
    ControlOutput out;
    out.tau = 1e300 * (Eigen::VectorXd::Ones(2) + s.qdot.cwiseAbs());
    out.kp = out.kd = DiagonalGain(Eigen::VectorXd::Zero(2));
    out.var_p = out.var_d = out.mu = Eigen::VectorXd::Zero(2);
    return out;
  };
  bool thrown = false;
  try {
    integrate(arm, UnknownDynamics::zero(2), blowup, hold, {v2(0, 0), v2(0, 0), std::nullopt});
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(e.time() >= 0.0);
    CHECK(e.time() < 5.0);
  }
  CHECK(thrown);
}

TEST_CASE("trajectory") {
  const TrajectorySpec t = sinusoid(20.0);
  const DesiredState d = t.at(0.5);
  CHECK(d.q[0] == Approx(std::sin(0.5)));
  CHECK(d.qdot[1] == Approx(-std::cos(0.5)));
  CHECK(d.qddot[0] == Approx(-std::sin(0.5)));
  const auto [qb, vb] = t.bounds(1e-3);
  CHECK(qb == Approx(std::sqrt(2.0)).epsilon(1e-6));
  CHECK(vb == Approx(std::sqrt(2.0)).epsilon(1e-6));

  TrajectorySpec bad = t;
  bad.amplitude = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("trace files") {
  const auto arm = std::make_shared<TwoLinkArm>();
  const TrajectorySpec traj = sinusoid(0.1);
  const auto law = make_control_law(arm, nullptr, GainSchedule::constant(v2(10, 10), v2(10, 10)));
  const SimulationResult r =
      integrate(*arm, UnknownDynamics::analytic_two_link(), law, traj, start_on(traj));
  const auto dir = std::filesystem::temp_directory_path() / "gpct_trace_test";
  std::filesystem::create_directories(dir);
  write_trace_csv(r, dir / "a.csv");
  write_trace_csv(r, dir / "b.csv");
  write_phase_csv(r, dir / "p.csv", 1);
  const std::string a = slurp(dir / "a.csv");
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(std::count(a.begin(), a.end(), '\n') == r.samples() + 1);
  const std::string p = slurp(dir / "p.csv");
  CHECK(std::count(p.begin(), p.end(), '\n') == r.samples() + 1);
  std::filesystem::remove_all(dir);
}
