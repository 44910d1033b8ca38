#include "gpct/simulation.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "gpct/errors.hpp"
#include "gpct/gp_io.hpp"

namespace gpct {

int TrajectorySpec::dof() const {
  if (kind == Kind::table) return static_cast<int>((table.cols() - 1) / 3);
  return static_cast<int>(offset.size());
}

void TrajectorySpec::validate() const {
  if (!(duration > 0.0)) throw InputError("trajectory: duration must be positive");
  switch (kind) {
    case Kind::sinusoid:
      if (amplitude.size() != offset.size() || frequency.size() != offset.size())
        throw InputError("trajectory: per-joint vectors differ in length");
      [[fallthrough]];
    case Kind::hold:
      if (offset.size() == 0) throw InputError("trajectory: no joints");
      break;
    case Kind::table:
      if (table.rows() < 1 || table.cols() < 4 || (table.cols() - 1) % 3 != 0)
        throw InputError("trajectory: table needs rows [t, q, qdot, qddot]");
      for (Eigen::Index r = 1; r < table.rows(); ++r)
        if (!(table(r, 0) > table(r - 1, 0)))
          throw InputError("trajectory: table times must increase");
      break;
  }
}

DesiredState TrajectorySpec::at(double t) const {
  const int n = dof();
  DesiredState d;
  switch (kind) {
    case Kind::sinusoid: {
      const Eigen::ArrayXd phase = frequency.array() * t;
      d.q = offset.array() + amplitude.array() * phase.sin();
      d.qdot = amplitude.array() * frequency.array() * phase.cos();
      d.qddot = -amplitude.array() * frequency.array().square() * phase.sin();
      break;
    }
    case Kind::hold:
      d.q = offset;
      d.qdot = Eigen::VectorXd::Zero(n);
      d.qddot = Eigen::VectorXd::Zero(n);
      break;
    case Kind::table: {
      Eigen::VectorXd row;
      const auto last = table.rows() - 1;
      if (t <= table(0, 0)) {
        row = table.row(0).transpose();
      } else if (t >= table(last, 0)) {
        row = table.row(last).transpose();
      } else {
        Eigen::Index k = 1;
        while (table(k, 0) < t) ++k;
        const double w = (t - table(k - 1, 0)) / (table(k, 0) - table(k - 1, 0));
        row = ((1.0 - w) * table.row(k - 1) + w * table.row(k)).transpose();
      }
      d.q = row.segment(1, n);
      d.qdot = row.segment(1 + n, n);
      d.qddot = row.segment(1 + 2 * n, n);
      break;
    }
  }
  return d;
}

std::pair<double, double> TrajectorySpec::bounds(double dt) const {
  double q_bar = 0.0, qdot_bar = 0.0;
  const long steps = static_cast<long>(std::ceil(duration / dt));
  for (long k = 0; k <= steps; ++k) {
    const DesiredState d = at(std::min(k * dt, duration));
    q_bar = std::max(q_bar, d.q.norm());
    qdot_bar = std::max(qdot_bar, d.qdot.norm());
  }
  return {q_bar, qdot_bar};
}

TrainingSet generate_training_data(const ManipulatorModel& plant_true,
                                   const ManipulatorModel& plant_est,
                                   const UnknownDynamics& kappa, const Box& domain,
                                   const TrainingDataOptions& options) {
  domain.validate();
  const int n = plant_true.dof();
  const int dim = 3 * n;
  if (domain.dim() != dim) throw InputError("training domain must span [qddot; qdot; q]");
  if (options.count < 1) throw InputError("training data: need at least one sample");
  const int m = options.count;

  Eigen::MatrixXd inputs(dim, m);
  std::mt19937_64 rng(options.seed);
  if (options.mode == SamplingMode::uniform) {
    for (int j = 0; j < m; ++j) inputs.col(j) = sample_uniform(domain, rng);
  } else {
    const int per_axis = static_cast<int>(std::ceil(std::pow(m, 1.0 / dim) - 1e-9));
    const double total = std::pow(static_cast<double>(per_axis), dim);
    for (int j = 0; j < m; ++j) {
      // Evenly spaced picks through the full tensor grid.
      long idx = static_cast<long>(std::floor(j * total / m));
      for (int i = 0; i < dim; ++i) {
        const int k = static_cast<int>(idx % per_axis);
        idx /= per_axis;
        const double t = per_axis == 1 ? 0.5 : static_cast<double>(k) / (per_axis - 1);
        inputs(i, j) = domain.lower[i] + t * (domain.upper[i] - domain.lower[i]);
      }
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd outputs(m, n);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd x = inputs.col(j);
    ManipulatorState s{x.segment(2 * n, n), x.segment(n, n), x.head(n)};
    const Eigen::VectorXd tau =
        inverse_dynamics(plant_true, s.q, s.qdot, *s.qddot) + kappa(x);
    Eigen::VectorXd res = residual_torque(plant_est, s, tau);
    if (options.noise_std > 0.0)
      for (int i = 0; i < n; ++i) res[i] += options.noise_std * noise(rng);
    outputs.row(j) = res.transpose();
  }
  return {std::move(inputs), std::move(outputs)};
}

namespace {

template <class Accel>
ManipulatorState rk4(const ManipulatorState& state, double dt, const Accel& accel,
                     const Eigen::VectorXd& a1) {
  const Eigen::VectorXd& q = state.q;
  const Eigen::VectorXd& v = state.qdot;
  const Eigen::VectorXd v2 = v + 0.5 * dt * a1;
  const Eigen::VectorXd a2 = accel(q + 0.5 * dt * v, v2, 0.5 * dt);
  const Eigen::VectorXd v3 = v + 0.5 * dt * a2;
  const Eigen::VectorXd a3 = accel(q + 0.5 * dt * v2, v3, 0.5 * dt);
  const Eigen::VectorXd v4 = v + dt * a3;
  const Eigen::VectorXd a4 = accel(q + dt * v3, v4, dt);
  ManipulatorState next;
  next.q = q + (dt / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4);
  next.qdot = v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  next.qddot = a1;
  return next;
}

}  // namespace

ManipulatorState rk4_step(const ManipulatorModel& plant, const UnknownDynamics& kappa,
                          const ManipulatorState& state, const Eigen::VectorXd& tau,
                          double dt) {
  auto accel = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& qdot, double) {
    return forward_dynamics(plant, ManipulatorState{q, qdot, state.qddot}, tau, kappa);
  };
  return rk4(state, dt, accel, accel(state.q, state.qdot, 0.0));
}

SimulationResult integrate(const ManipulatorModel& plant_true,
                           const UnknownDynamics& kappa, const ControlLaw& controller,
                           const TrajectorySpec& trajectory,
                           const ManipulatorState& initial,
                           const IntegratorOptions& options) {
  trajectory.validate();
  initial.validate();
  const int n = plant_true.dof();
  if (initial.q.size() != n || trajectory.dof() != n)
    throw InputError("integrate: state or trajectory size does not match the plant");
  if (!(options.dt > 0.0)) throw InputError("integrate: dt must be positive");
  const double span = options.duration.value_or(trajectory.duration);
  const long steps = std::lround(span / options.dt);
  const Eigen::Index rows = steps + 1;

  SimulationResult r;
  r.time.resize(rows);
  for (auto* m : {&r.q, &r.qdot, &r.q_d, &r.qdot_d, &r.e, &r.edot, &r.tau, &r.kp, &r.kd,
                  &r.var_p, &r.var_d})
    m->resize(rows, n);

  ManipulatorState state = initial;
  if (!state.qddot) state.qddot = Eigen::VectorXd::Zero(n);
  for (long k = 0; k < rows; ++k) {
    const double t = k * options.dt;
    if (!state.q.allFinite() || !state.qdot.allFinite())
      throw DivergenceError(t, "state became non-finite at t = " + std::to_string(t));
    const DesiredState d = trajectory.at(t);
    const ControlOutput u = controller(state, d);
    if (!u.tau.allFinite())
      throw DivergenceError(t, "control torque became non-finite at t = " + std::to_string(t));
    r.time[k] = t;
    r.q.row(k) = state.q.transpose();
    r.qdot.row(k) = state.qdot.transpose();
    r.q_d.row(k) = d.q.transpose();
    r.qdot_d.row(k) = d.qdot.transpose();
    r.e.row(k) = (state.q - d.q).transpose();
    r.edot.row(k) = (state.qdot - d.qdot).transpose();
    r.tau.row(k) = u.tau.transpose();
    r.kp.row(k) = u.kp.diagonal().transpose();
    r.kd.row(k) = u.kd.diagonal().transpose();
    r.var_p.row(k) = u.var_p.transpose();
    r.var_d.row(k) = u.var_d.transpose();
    if (k + 1 >= rows) break;
    if (options.hold == IntegratorOptions::Hold::zero_order) {
      state = rk4_step(plant_true, kappa, state, u.tau, options.dt);
    } else {
      const Eigen::VectorXd a1 = forward_dynamics(plant_true, state, u.tau, kappa);
      auto accel = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& qdot, double h) {
        const ManipulatorState s{q, qdot, state.qddot};
        return forward_dynamics(plant_true, s, controller(s, trajectory.at(t + h)).tau, kappa);
      };
      state = rk4(state, options.dt, accel, a1);
    }
  }
  return r;
}

double gain_norm(const Eigen::VectorXd& kp_diag, const Eigen::VectorXd& kd_diag) {
  return std::sqrt((kp_diag.array().square() + kd_diag.array().square()).maxCoeff());
}

Metrics metrics(const SimulationResult& r, const std::optional<Box>& region) {
  const Eigen::Index rows = r.samples();
  if (rows == 0) throw InputError("metrics: empty result");
  const int n = r.dof();
  if (region && region->dim() != 2 * n)
    throw InputError("metrics: region must be a box over [q; qdot]");

  Metrics m;
  const double t0 = r.time[0];
  const double t_end = r.time[rows - 1];
  const double window_start = t_end - 0.1 * (t_end - t0);
  double sum_e2 = 0.0, sum_ed2 = 0.0, sum_gain = 0.0, sum_gain_region = 0.0;
  double sum_window = 0.0;
  int window = 0;
  for (Eigen::Index k = 0; k < rows; ++k) {
    const double e = r.e.row(k).norm();
    const double ed = r.edot.row(k).norm();
    sum_e2 += e * e;
    sum_ed2 += ed * ed;
    m.max_error = std::max(m.max_error, e);
    m.max_velocity_error = std::max(m.max_velocity_error, ed);
    const double g = gain_norm(r.kp.row(k).transpose(), r.kd.row(k).transpose());
    sum_gain += g;
    m.max_gain_norm = std::max(m.max_gain_norm, g);
    if (r.time[k] >= window_start) {
      sum_window += e;
      ++window;
      m.final_window_sup = std::max(m.final_window_sup, std::sqrt(e * e + ed * ed));
    }
    if (region) {
      Eigen::VectorXd x(2 * n);
      x << r.q.row(k).transpose(), r.qdot.row(k).transpose();
      if (region->contains(x)) {
        ++m.samples_in_region;
        sum_gain_region += g;
      }
    }
  }
  const double count = static_cast<double>(rows);
  m.rms_error = std::sqrt(sum_e2 / count);
  m.rms_velocity_error = std::sqrt(sum_ed2 / count);
  m.mean_gain_norm = sum_gain / count;
  m.steady_state_error = sum_window / window;
  if (m.samples_in_region > 0)
    m.mean_gain_norm_in_region = sum_gain_region / m.samples_in_region;
  return m;
}

ControlLaw make_control_law(std::shared_ptr<const ManipulatorModel> plant_est,
                            std::shared_ptr<const GPModel> gp, GainSchedule schedule) {
  schedule.validate();
  return [plant_est = std::move(plant_est), gp = std::move(gp),
          schedule = std::move(schedule)](const ManipulatorState& s,
                                          const DesiredState& d) {
    return control_torque(*plant_est, gp.get(), schedule, s, d);
  };
}

ComparisonResult run_comparison(const ComparisonSetup& setup) {
  if (!setup.plant_true || !setup.plant_est)
    throw InputError("run_comparison: plant models required");
  ComparisonResult out;
  out.static_run = integrate(
      *setup.plant_true, setup.kappa,
      make_control_law(setup.plant_est, setup.gp, setup.schedule.without_adaptation()),
      setup.trajectory, setup.initial, setup.integrator);
  out.adaptive_run =
      integrate(*setup.plant_true, setup.kappa,
                make_control_law(setup.plant_est, setup.gp, setup.schedule),
                setup.trajectory, setup.initial, setup.integrator);
  return out;
}

namespace {

void write_columns(std::ofstream& os, const char* prefix, int n, bool doubled) {
  for (int i = 1; i <= n; ++i) {
    os << ',' << prefix << i;
    if (doubled) os << i;
  }
}

void write_row(std::ofstream& os, const Eigen::MatrixXd& m, Eigen::Index k) {
  for (Eigen::Index i = 0; i < m.cols(); ++i) os << ',' << format_double(m(k, i));
}

}  // namespace

void write_trace_csv(const SimulationResult& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  const int n = r.dof();
  os << 't';
  write_columns(os, "q_", n, false);
  write_columns(os, "qdot_", n, false);
  write_columns(os, "q_d_", n, false);
  write_columns(os, "e_", n, false);
  write_columns(os, "tau_", n, false);
  write_columns(os, "Kp_", n, true);
  write_columns(os, "Kd_", n, true);
  write_columns(os, "var_p_", n, false);
  write_columns(os, "var_d_", n, false);
  os << '\n';
  for (Eigen::Index k = 0; k < r.samples(); ++k) {
    os << format_double(r.time[k]);
    for (const auto* m : {&r.q, &r.qdot, &r.q_d, &r.e, &r.tau, &r.kp, &r.kd, &r.var_p,
                          &r.var_d})
      write_row(os, *m, k);
    os << '\n';
  }
}

void write_phase_csv(const SimulationResult& r, const std::filesystem::path& path,
                     int joint) {
  if (joint < 0 || joint >= r.dof()) throw InputError("write_phase_csv: joint out of range");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << "t,q,qdot,q_d,qdot_d,gain_norm\n";
  for (Eigen::Index k = 0; k < r.samples(); ++k) {
    os << format_double(r.time[k]) << ',' << format_double(r.q(k, joint)) << ','
       << format_double(r.qdot(k, joint)) << ',' << format_double(r.q_d(k, joint)) << ','
       << format_double(r.qdot_d(k, joint)) << ','
       << format_double(gain_norm(r.kp.row(k).transpose(), r.kd.row(k).transpose()))
       << '\n';
  }
}

}  // namespace gpct
