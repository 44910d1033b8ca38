#include "gpct/experiment.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "gpct/errors.hpp"
#include "gpct/gp_io.hpp"

namespace gpct {

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

json box_json(const Box& b) {
  json out = json::array();
  for (int i = 0; i < b.dim(); ++i) out.push_back({b.lower[i], b.upper[i]});
  return out;
}

Box json_box(const json& j) {
  Box b{Eigen::VectorXd(j.size()), Eigen::VectorXd(j.size())};
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto pair = j[i].get<std::vector<double>>();
    if (pair.size() != 2) throw ConfigError("interval must be [lower, upper]");
    b.lower[i] = pair[0];
    b.upper[i] = pair[1];
  }
  return b;
}

Box sub_box(const Box& b, int start, int len) {
  return {b.lower.segment(start, len), b.upper.segment(start, len)};
}

json plant_json(const TwoLinkParameters& p) {
  return {{"mass1", p.mass1}, {"mass2", p.mass2},     {"length1", p.length1},
          {"length2", p.length2}, {"com1", p.com1}, {"com2", p.com2},
          {"gravity", p.gravity}};
}

TwoLinkParameters json_plant(const json& j) {
  TwoLinkParameters p;
  p.mass1 = j.value("mass1", p.mass1);
  p.mass2 = j.value("mass2", p.mass2);
  p.length1 = j.value("length1", p.length1);
  p.length2 = j.value("length2", p.length2);
  p.com1 = j.value("com1", p.com1);
  p.com2 = j.value("com2", p.com2);
  p.gravity = j.value("gravity", p.gravity);
  return p;
}

const char* kind_name(UnknownDynamics::Kind k) {
  switch (k) {
    case UnknownDynamics::Kind::zero: return "zero";
    case UnknownDynamics::Kind::analytic: return "analytic";
    case UnknownDynamics::Kind::gp_sample_path: return "gp_sample_path";
  }
  return "";
}

UnknownDynamics::Kind parse_kind(const std::string& s) {
  if (s == "zero") return UnknownDynamics::Kind::zero;
  if (s == "analytic") return UnknownDynamics::Kind::analytic;
  if (s == "gp_sample_path") return UnknownDynamics::Kind::gp_sample_path;
  throw ConfigError("unknown kappa kind '" + s + "'");
}

json optional_vec(const std::optional<Eigen::VectorXd>& v) {
  return v ? vec_json(*v) : json(nullptr);
}

std::optional<Eigen::VectorXd> json_optional_vec(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return json_vec(j.at(key));
}

json trajectory_json(const TrajectorySpec& t) {
  json j;
  switch (t.kind) {
    case TrajectorySpec::Kind::sinusoid:
      j = {{"kind", "sinusoid"}, {"offset", vec_json(t.offset)},
           {"amplitude", vec_json(t.amplitude)}, {"frequency", vec_json(t.frequency)}};
      break;
    case TrajectorySpec::Kind::hold:
      j = {{"kind", "hold"}, {"offset", vec_json(t.offset)}};
      break;
    case TrajectorySpec::Kind::table: {
      json rows = json::array();
      for (Eigen::Index r = 0; r < t.table.rows(); ++r)
        rows.push_back(vec_json(t.table.row(r).transpose()));
      j = {{"kind", "table"}, {"table", rows}};
      break;
    }
  }
  j["duration"] = t.duration;
  return j;
}

TrajectorySpec json_trajectory(const json& j) {
  TrajectorySpec t;
  const std::string kind = j.value("kind", "sinusoid");
  t.duration = j.value("duration", t.duration);
  if (kind == "sinusoid") {
    t.kind = TrajectorySpec::Kind::sinusoid;
    t.offset = json_vec(j.at("offset"));
    t.amplitude = json_vec(j.at("amplitude"));
    t.frequency = json_vec(j.at("frequency"));
  } else if (kind == "hold") {
    t.kind = TrajectorySpec::Kind::hold;
    t.offset = json_vec(j.at("offset"));
  } else if (kind == "table") {
    t.kind = TrajectorySpec::Kind::table;
    const auto& rows = j.at("table");
    if (rows.empty()) throw ConfigError("trajectory table is empty");
    const auto cols = rows[0].size();
    t.table.resize(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Eigen::VectorXd row = json_vec(rows[r]);
      if (static_cast<std::size_t>(row.size()) != cols)
        throw ConfigError("trajectory table rows differ in length");
      t.table.row(r) = row.transpose();
    }
  } else {
    throw ConfigError("unknown trajectory kind '" + kind + "'");
  }
  return t;
}

Box pi_box(int n) {
  return {Eigen::VectorXd::Constant(n, -std::numbers::pi),
          Eigen::VectorXd::Constant(n, std::numbers::pi)};
}

}  // namespace

ExperimentConfig ExperimentConfig::reference() {
  ExperimentConfig c;
  c.training.domain.lower.resize(6);
  c.training.domain.upper.resize(6);
  c.training.domain.lower << -1, -1, -1, -1, 0, 0;
  c.training.domain.upper << 1, 1, 1, 1, 1, 1;

  c.kappa.init.signal_variance = 1.0;
  c.kappa.init.lengthscales = Eigen::VectorXd::Ones(4);
  c.kappa.init.noise_variance = 1e-2;

  c.gp.init.signal_variance = 1.0;
  c.gp.init.lengthscales = Eigen::VectorXd::Ones(6);
  c.gp.init.noise_variance = 1e-2;

  c.schedule.base_p = Eigen::Vector2d(10, 10);
  c.schedule.base_d = Eigen::Vector2d(10, 10);
  c.schedule.weight_p = Eigen::Vector2d(30, 30);
  c.schedule.weight_d = Eigen::Vector2d(30, 30);

  c.trajectory.kind = TrajectorySpec::Kind::sinusoid;
  c.trajectory.offset = Eigen::Vector2d(0, 1);
  c.trajectory.amplitude = Eigen::Vector2d(1, -1);
  c.trajectory.frequency = Eigen::Vector2d(1, 1);
  c.trajectory.duration = 20.0;

  c.initial_state.q = Eigen::Vector2d::Zero();
  c.initial_state.qdot = Eigen::Vector2d::Zero();

  c.analysis.bound_q_domain = pi_box(2);
  c.analysis.bound_qdot_domain = {Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};
  return c;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  constexpr int n = 2;
  require(analysis.delta > 0.0 && analysis.delta < 1.0, "analysis.delta must lie in (0, 1)");
  require(analysis.eps2 > 0.0, "analysis.epsilon2 must be positive");
  require(analysis.delta_bar_samples >= 1, "analysis.delta_bar_samples must be >= 1");
  require(analysis.definiteness_samples >= 0, "analysis.definiteness_samples must be >= 0");
  require(training.count >= 1, "training.count must be >= 1");
  require(training.noise_std >= 0.0, "training.noise_std must be nonnegative");
  require(kappa.source_points >= 1, "kappa.source_points must be >= 1");
  require(kappa.restarts >= 1 && gp.restarts >= 1, "restarts must be >= 1");
  require(dt > 0.0, "integrator.dt must be positive");
  require(training.domain.dim() == 3 * n, "training.domain must cover qddot, qdot and q");
  require(analysis.bound_q_domain.dim() == n && analysis.bound_qdot_domain.dim() == n,
          "analysis bound domains must have one interval per joint");
  require(kappa.init.input_dim() == 2 * n, "kappa.init needs 4 lengthscales");
  require(gp.init.input_dim() == 3 * n, "gp.init needs 6 lengthscales");
  require(initial_state.q.size() == n && initial_state.qdot.size() == n,
          "initial_state must have two joints");
  require(schedule.base_p.size() == n && schedule.base_d.size() == n &&
              schedule.weight_p.size() == n && schedule.weight_d.size() == n,
          "schedule vectors must have two entries");
  if (analysis.rkhs_norms)
    require(analysis.rkhs_norms->size() == n, "analysis.rkhs_norms must have two entries");
  try {
    training.domain.validate();
    analysis.bound_q_domain.validate();
    analysis.bound_qdot_domain.validate();
    kappa.init.validate();
    gp.init.validate();
    trajectory.validate();
    TwoLinkArm{plant};
    if (plant_estimate) TwoLinkArm{*plant_estimate};
    GainSchedule{schedule.base_p,
                 schedule.base_d,
                 schedule.weight_p,
                 schedule.weight_d,
                 schedule.ceiling_p.value_or(schedule.base_p + schedule.weight_p),
                 schedule.ceiling_d.value_or(schedule.base_d + schedule.weight_d)}
        .validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  require(trajectory.dof() == n, "trajectory must have two joints");
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"plant", plant_json(c.plant)},
      {"plant_estimate", c.plant_estimate ? plant_json(*c.plant_estimate) : json(nullptr)},
      {"kappa",
       {{"kind", kind_name(c.kappa.kind)},
        {"source_points", c.kappa.source_points},
        {"restarts", c.kappa.restarts},
        {"max_iterations", c.kappa.max_iterations},
        {"min_noise_variance", c.kappa.min_noise_variance},
        {"init", c.kappa.init}}},
      {"training",
       {{"count", c.training.count},
        {"sampling", c.training.sampling == SamplingMode::grid ? "grid" : "uniform"},
        {"noise_std", c.training.noise_std},
        {"domain",
         {{"qddot", box_json(sub_box(c.training.domain, 0, 2))},
          {"qdot", box_json(sub_box(c.training.domain, 2, 2))},
          {"q", box_json(sub_box(c.training.domain, 4, 2))}}}}},
      {"gp",
       {{"restarts", c.gp.restarts},
        {"max_iterations", c.gp.max_iterations},
        {"min_noise_variance", c.gp.min_noise_variance},
        {"init", c.gp.init}}},
      {"schedule",
       {{"base_p", vec_json(c.schedule.base_p)},
        {"base_d", vec_json(c.schedule.base_d)},
        {"weight_p", vec_json(c.schedule.weight_p)},
        {"weight_d", vec_json(c.schedule.weight_d)},
        {"ceiling_p", optional_vec(c.schedule.ceiling_p)},
        {"ceiling_d", optional_vec(c.schedule.ceiling_d)}}},
      {"trajectory", trajectory_json(c.trajectory)},
      {"initial_state",
       {{"q", vec_json(c.initial_state.q)}, {"qdot", vec_json(c.initial_state.qdot)}}},
      {"integrator",
       {{"dt", c.dt},
        {"hold", c.hold == IntegratorOptions::Hold::continuous ? "continuous" : "zero_order"}}},
      {"analysis",
       {{"delta", c.analysis.delta},
        {"epsilon2", c.analysis.eps2},
        {"delta_bar_samples", c.analysis.delta_bar_samples},
        {"definiteness_samples", c.analysis.definiteness_samples},
        {"rkhs_norms", optional_vec(c.analysis.rkhs_norms)},
        {"bound_q_domain", box_json(c.analysis.bound_q_domain)},
        {"bound_qdot_domain", box_json(c.analysis.bound_qdot_domain)}}}};
}

void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig::reference();
  try {
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("plant")) c.plant = json_plant(j.at("plant"));
    if (j.contains("plant_estimate") && !j.at("plant_estimate").is_null())
      c.plant_estimate = json_plant(j.at("plant_estimate"));
    if (j.contains("kappa")) {
      const auto& k = j.at("kappa");
      c.kappa.kind = parse_kind(k.value("kind", "gp_sample_path"));
      c.kappa.source_points = k.value("source_points", c.kappa.source_points);
      c.kappa.restarts = k.value("restarts", c.kappa.restarts);
      c.kappa.max_iterations = k.value("max_iterations", c.kappa.max_iterations);
      c.kappa.min_noise_variance = k.value("min_noise_variance", c.kappa.min_noise_variance);
      if (k.contains("init")) c.kappa.init = k.at("init").get<Hyperparameters>();
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      c.training.count = t.value("count", c.training.count);
      const std::string mode = t.value("sampling", "uniform");
      if (mode != "uniform" && mode != "grid")
        throw ConfigError("training.sampling must be 'uniform' or 'grid'");
      c.training.sampling = mode == "grid" ? SamplingMode::grid : SamplingMode::uniform;
      c.training.noise_std = t.value("noise_std", c.training.noise_std);
      if (t.contains("domain")) {
        const auto& d = t.at("domain");
        c.training.domain = json_box(d.at("qddot"))
                                .concat(json_box(d.at("qdot")))
                                .concat(json_box(d.at("q")));
      }
    }
    if (j.contains("gp")) {
      const auto& g = j.at("gp");
      c.gp.restarts = g.value("restarts", c.gp.restarts);
      c.gp.max_iterations = g.value("max_iterations", c.gp.max_iterations);
      c.gp.min_noise_variance = g.value("min_noise_variance", c.gp.min_noise_variance);
      if (g.contains("init")) c.gp.init = g.at("init").get<Hyperparameters>();
    }
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      c.schedule.base_p = json_vec(s.at("base_p"));
      c.schedule.base_d = json_vec(s.at("base_d"));
      c.schedule.weight_p = json_vec(s.at("weight_p"));
      c.schedule.weight_d = json_vec(s.at("weight_d"));
      c.schedule.ceiling_p = json_optional_vec(s, "ceiling_p");
      c.schedule.ceiling_d = json_optional_vec(s, "ceiling_d");
    }
    if (j.contains("trajectory")) c.trajectory = json_trajectory(j.at("trajectory"));
    if (j.contains("initial_state")) {
      c.initial_state.q = json_vec(j.at("initial_state").at("q"));
      c.initial_state.qdot = json_vec(j.at("initial_state").at("qdot"));
    }
    if (j.contains("integrator")) {
      const auto& in = j.at("integrator");
      c.dt = in.value("dt", c.dt);
      const std::string hold = in.value("hold", "zero_order");
      if (hold != "zero_order" && hold != "continuous")
        throw ConfigError("integrator.hold must be 'zero_order' or 'continuous'");
      c.hold = hold == "continuous" ? IntegratorOptions::Hold::continuous
                                    : IntegratorOptions::Hold::zero_order;
    }
    if (j.contains("analysis")) {
      const auto& a = j.at("analysis");
      c.analysis.delta = a.value("delta", c.analysis.delta);
      c.analysis.eps2 = a.value("epsilon2", c.analysis.eps2);
      c.analysis.delta_bar_samples = a.value("delta_bar_samples", c.analysis.delta_bar_samples);
      c.analysis.definiteness_samples =
          a.value("definiteness_samples", c.analysis.definiteness_samples);
      c.analysis.rkhs_norms = json_optional_vec(a, "rkhs_norms");
      if (a.contains("bound_q_domain")) c.analysis.bound_q_domain = json_box(a.at("bound_q_domain"));
      if (a.contains("bound_qdot_domain"))
        c.analysis.bound_qdot_domain = json_box(a.at("bound_qdot_domain"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

void save_config(const ExperimentConfig& c, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << json(c).dump(2) << '\n';
}

std::uint64_t stream_seed(const ExperimentConfig& c, SeedStream s) {
  return mix_seed(c.seed, static_cast<std::uint64_t>(s));
}

Eigen::VectorXd posterior_mean_rkhs_norms(const GPModel& gp) {
  Eigen::VectorXd norms(gp.output_dim());
  for (int i = 0; i < gp.output_dim(); ++i) {
    if (gp.size() == 0) {
      norms[i] = 0.0;
      continue;
    }
    const Eigen::MatrixXd k = gram_matrix(gp.training_set().inputs, gp.params()[i]);
    const Eigen::VectorXd& a = gp.weights(i);
    norms[i] = std::sqrt(std::max(0.0, a.dot(k * a)));
  }
  return norms;
}

GroundTruth build_ground_truth(const ExperimentConfig& c) {
  constexpr int n = 2;
  GroundTruth g;
  switch (c.kappa.kind) {
    case UnknownDynamics::Kind::zero:
      g.kappa = UnknownDynamics::zero(n);
      g.rkhs_norms = Eigen::VectorXd::Zero(n);
      break;
    case UnknownDynamics::Kind::analytic:
      g.kappa = UnknownDynamics::analytic_two_link();
      break;
    case UnknownDynamics::Kind::gp_sample_path: {
      const Box state_box = sub_box(c.training.domain, n, 2 * n);  // [qdot; q]
      std::mt19937_64 rng(stream_seed(c, SeedStream::kappa_samples));
      const int m = c.kappa.source_points;
      TrainingSet source{Eigen::MatrixXd(2 * n, m), Eigen::MatrixXd(m, n)};
      for (int j = 0; j < m; ++j) {
        const Eigen::VectorXd x = sample_uniform(state_box, rng);
        source.inputs.col(j) = x;
        source.outputs.row(j) = two_link_disturbance(x.tail(n), x.head(n)).transpose();
      }
      std::vector<Hyperparameters> params;
      for (int i = 0; i < n; ++i) {
        OptimizerOptions opt;
        opt.restarts = c.kappa.restarts;
        opt.max_iterations = c.kappa.max_iterations;
        opt.min_noise_variance = c.kappa.min_noise_variance;
        opt.seed = mix_seed(stream_seed(c, SeedStream::kappa_optimizer), i);
        params.push_back(optimize_hyperparameters(source, c.kappa.init, i, opt).params);
      }
      g.gp = std::make_shared<const GPModel>(std::move(source), std::move(params));
      g.kappa = UnknownDynamics::from_gp(g.gp);
      g.rkhs_norms = posterior_mean_rkhs_norms(*g.gp);
      break;
    }
  }
  if (c.analysis.rkhs_norms) g.rkhs_norms = *c.analysis.rkhs_norms;
  return g;
}

std::shared_ptr<const ManipulatorModel> make_true_plant(const ExperimentConfig& c) {
  return std::make_shared<const TwoLinkArm>(c.plant);
}

std::shared_ptr<const ManipulatorModel> make_estimated_plant(const ExperimentConfig& c) {
  return std::make_shared<const TwoLinkArm>(c.plant_estimate.value_or(c.plant));
}

TrainedModel train_model(const ExperimentConfig& c, const GroundTruth& truth) {
  const auto plant_true = make_true_plant(c);
  const auto plant_est = make_estimated_plant(c);
  TrainingDataOptions opts;
  opts.count = c.training.count;
  opts.seed = stream_seed(c, SeedStream::training_samples);
  opts.mode = c.training.sampling;
  opts.noise_std = c.training.noise_std;
  TrainingSet data =
      generate_training_data(*plant_true, *plant_est, truth.kappa, c.training.domain, opts);

  TrainedModel out;
  std::vector<Hyperparameters> params;
  for (int i = 0; i < data.output_dim(); ++i) {
    OptimizerOptions opt;
    opt.restarts = c.gp.restarts;
    opt.max_iterations = c.gp.max_iterations;
    opt.min_noise_variance = c.gp.min_noise_variance;
    opt.seed = mix_seed(stream_seed(c, SeedStream::gp_optimizer), i);
    out.fits.push_back(optimize_hyperparameters(data, c.gp.init, i, opt));
    params.push_back(out.fits.back().params);
  }
  out.model = std::make_shared<const GPModel>(std::move(data), std::move(params));
  return out;
}

GainSchedule resolve_schedule(const ExperimentConfig& c, const GPModel* gp) {
  const auto& s = c.schedule;
  Eigen::VectorXd sf2 = Eigen::VectorXd::Zero(s.base_p.size());
  if (gp)
    for (int i = 0; i < gp->output_dim() && i < sf2.size(); ++i)
      sf2[i] = gp->params()[i].signal_variance;
  GainSchedule out = GainSchedule::with_variance_ceilings(s.base_p, s.base_d, s.weight_p,
                                                          s.weight_d, sf2);
  if (s.ceiling_p) out.ceiling_p = *s.ceiling_p;
  if (s.ceiling_d) out.ceiling_d = *s.ceiling_d;
  out.validate();
  return out;
}

ComparisonSetup make_comparison_setup(const ExperimentConfig& c, const GroundTruth& truth,
                                      std::shared_ptr<const GPModel> model) {
  ComparisonSetup s;
  s.plant_true = make_true_plant(c);
  s.plant_est = make_estimated_plant(c);
  s.kappa = truth.kappa;
  s.schedule = resolve_schedule(c, model.get());
  s.gp = std::move(model);
  s.trajectory = c.trajectory;
  s.initial = c.initial_state;
  s.integrator.dt = c.dt;
  s.integrator.hold = c.hold;
  return s;
}

Box training_state_region(const ExperimentConfig& c) {
  const Box& d = c.training.domain;
  return sub_box(d, 4, 2).concat(sub_box(d, 2, 2));
}

double initial_lyapunov_value(const ExperimentConfig& c, const ManipulatorModel& plant,
                              const GPModel* model, const GainSchedule& schedule,
                              double eps) {
  const DesiredState d0 = c.trajectory.at(0.0);
  const TrackingError err = tracking_error(c.initial_state, d0);
  const int n = plant.dof();
  const auto subset = position_subset(n);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const ProportionalGainField kp = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    const Eigen::VectorXd q = d0.q + z;
    const Eigen::VectorXd var =
        model ? model->predict_marginal(q, subset).variance : zero;
    return gains_from_variance(schedule, var, zero).kp.diagonal();
  };
  return lyapunov_value(err.edot, err.e, plant.inertia(c.initial_state.q), kp, eps);
}

ErrorBoundParams error_bound_params(const ExperimentConfig& c, const GroundTruth& truth,
                                    const GPModel& model) {
  if (!truth.rkhs_norms)
    throw ConfigError("analysis.rkhs_norms is required for this kappa kind");
  ErrorBoundParams p;
  p.rkhs_norms = *truth.rkhs_norms;
  p.delta = c.analysis.delta;
  p.m = model.size();
  p.info_gains.resize(model.output_dim());
  for (int i = 0; i < model.output_dim(); ++i) {
    const auto& hp = model.params()[i];
    p.info_gains[i] =
        model.size() == 0
            ? 0.0
            : information_gain(gram_matrix(model.training_set().inputs, hp),
                               std::max(hp.noise_variance, 1e-300));
  }
  return p;
}

StabilityReport analyze_stability(const ExperimentConfig& c, const GroundTruth& truth,
                                  const GPModel& model) {
  const auto plant = make_true_plant(c);
  const GainSchedule schedule = resolve_schedule(c, &model);
  const int n = plant->dof();

  StabilityReport r;
  BoundSampling sampling;
  sampling.seed = mix_seed(stream_seed(c, SeedStream::analysis), 0);
  r.bounds = estimate_bounds(*plant, c.analysis.bound_q_domain,
                             c.analysis.bound_qdot_domain, sampling);
  r.bounds.k_p1 = schedule.base_p.minCoeff();
  r.bounds.k_p2 = schedule.ceiling_p.maxCoeff();
  r.bounds.k_d1 = schedule.base_d.minCoeff();
  r.bounds.k_d2 = schedule.ceiling_d.maxCoeff();
  std::tie(r.bounds.q_d_bar, r.bounds.qdot_d_bar) = c.trajectory.bounds(c.dt);

  r.error_bound = error_bound_params(c, truth, model);
  r.beta = compute_beta(r.error_bound);
  {
    std::mt19937_64 rng(mix_seed(stream_seed(c, SeedStream::analysis), 1));
    double sup = 0.0;
    for (int s = 0; s < c.analysis.delta_bar_samples; ++s)
      sup = std::max(sup, model_error_bound(
                              r.beta, model.predict(sample_uniform(c.training.domain, rng))));
    r.bounds.delta_bar = sup;
  }

  // V0 depends on eps only through the affine cross term; take the larger
  // of the values seen so it bounds V at every eps in the final interval.
  r.v0 = initial_lyapunov_value(c, *plant, &model, schedule, 0.0);
  r.interval = epsilon_feasible(r.bounds, r.v0, c.analysis.eps2);
  for (int it = 0; it < 10 && !r.interval.empty; ++it) {
    const double v = initial_lyapunov_value(c, *plant, &model, schedule, r.interval.midpoint());
    if (v <= r.v0) break;
    r.v0 = v;
    r.interval = epsilon_feasible(r.bounds, r.v0, c.analysis.eps2);
  }
  if (r.interval.empty) {
    r.infeasibility = "no admissible eps";
    return r;
  }
  r.eps = r.interval.midpoint();
  try {
    r.constants = convergence_constants(r.bounds, r.eps, c.analysis.eps2, r.v0,
                                        r.bounds.delta_bar);
  } catch (const InfeasibleError& e) {
    r.infeasibility = e.what();
  }

  std::mt19937_64 rng(mix_seed(stream_seed(c, SeedStream::analysis), 2));
  const auto vp = velocity_position_subset(n);
  const auto pp = position_subset(n);
  for (int s = 0; s < c.analysis.definiteness_samples; ++s) {
    const Eigen::VectorXd q = sample_uniform(c.analysis.bound_q_domain, rng);
    const Eigen::VectorXd qdot = sample_uniform(c.analysis.bound_qdot_domain, rng);
    Eigen::VectorXd x(2 * n);
    x << qdot, q;
    const FeedbackGains g = gains_from_variance(schedule, model.predict_marginal(q, pp).variance,
                                                model.predict_marginal(x, vp).variance);
    const Eigen::MatrixXd kd = g.kd.toDenseMatrix();
    const Eigen::MatrixXd kp = g.kp.toDenseMatrix();
    const Eigen::MatrixXd h = plant->inertia(q);
    const Eigen::MatrixXd cm = plant->coriolis(q, qdot);
    const auto check = check_A_negative_definite(r.eps, kd, kp, h, cm);
    const bool schur = schur_negative_definite(r.eps, kd, kp, h, cm);
    ++r.definiteness.samples;
    if (check.negative_definite) ++r.definiteness.negative_definite;
    if (check.negative_definite == schur) ++r.definiteness.schur_agreement;
    r.definiteness.max_lambda = std::max(r.definiteness.max_lambda, check.lambda_max);
  }
  return r;
}

json report_json(const SystemBounds& b) {
  return {{"h1", b.h1},           {"h2", b.h2},       {"k_c", b.k_c},
          {"k_d1", b.k_d1},       {"k_d2", b.k_d2},   {"k_p1", b.k_p1},
          {"k_p2", b.k_p2},       {"q_d_bar", b.q_d_bar},
          {"qdot_d_bar", b.qdot_d_bar}, {"delta_bar", b.delta_bar}};
}

json report_json(const ErrorBoundParams& p) {
  return {{"rkhs_norms", vec_json(p.rkhs_norms)},
          {"delta", p.delta},
          {"info_gains", vec_json(p.info_gains)},
          {"m", p.m}};
}

json report_json(const LyapunovConstants& k) {
  return {{"eps", k.eps},   {"eps2", k.eps2},       {"rho", k.rho},
          {"v1", k.v1},     {"v2", k.v2},           {"xi", k.xi},
          {"varrho", k.varrho}, {"v0", k.v0},       {"c_lower", k.c_lower},
          {"ultimate_radius", k.ultimate_radius}};
}

json report_json(const EpsilonInterval& e) {
  return {{"lower", e.lower},           {"upper", e.upper},
          {"empty", e.empty},           {"converged", e.converged},
          {"iterations", e.iterations}};
}

json report_json(const Metrics& m) {
  return {{"rms_error", m.rms_error},
          {"max_error", m.max_error},
          {"rms_velocity_error", m.rms_velocity_error},
          {"max_velocity_error", m.max_velocity_error},
          {"steady_state_error", m.steady_state_error},
          {"final_window_sup", m.final_window_sup},
          {"mean_gain_norm", m.mean_gain_norm},
          {"max_gain_norm", m.max_gain_norm},
          {"samples_in_region", m.samples_in_region},
          {"mean_gain_norm_in_region", m.mean_gain_norm_in_region}};
}

json report_json(const StabilityReport& r) {
  json j{{"system_bounds", report_json(r.bounds)},
         {"error_bound", report_json(r.error_bound)},
         {"beta", vec_json(r.beta)},
         {"v0", r.v0},
         {"epsilon_interval", report_json(r.interval)},
         {"eps", r.eps},
         {"lyapunov_constants", r.constants ? report_json(*r.constants) : json(nullptr)},
         {"ultimate_radius", r.constants ? json(r.constants->ultimate_radius) : json(nullptr)},
         {"infeasibility", r.infeasibility},
         {"negative_definiteness",
          {{"samples", r.definiteness.samples},
           {"negative_definite", r.definiteness.negative_definite},
           {"schur_agreement", r.definiteness.schur_agreement},
           {"max_lambda", r.definiteness.samples ? json(r.definiteness.max_lambda)
                                                 : json(nullptr)},
           {"pass", r.definiteness.samples > 0 && r.definiteness.all_pass()}}}};
  return j;
}

json train_report(const TrainedModel& trained, const GroundTruth& truth,
                  const ExperimentConfig& c) {
  const GPModel& model = *trained.model;
  json outputs = json::array();
  std::optional<Eigen::VectorXd> beta;
  ErrorBoundParams bp;
  if (truth.rkhs_norms) {
    bp = error_bound_params(c, truth, model);
    beta = compute_beta(bp);
  }
  for (int i = 0; i < model.output_dim(); ++i) {
    const auto& fit = trained.fits.at(i);
    json o{{"hyperparameters", fit.params},
           {"log_likelihood", fit.log_likelihood},
           {"initial_log_likelihood", fit.initial_log_likelihood},
           {"successful_restarts", fit.successful_restarts},
           {"jitter", model.jitter(i)}};
    if (beta) {
      o["info_gain"] = bp.info_gains[i];
      o["beta"] = (*beta)[i];
      o["rkhs_norm"] = bp.rkhs_norms[i];
    }
    outputs.push_back(std::move(o));
  }
  json truth_json{{"kind", kind_name(c.kappa.kind)}};
  if (truth.gp) truth_json["hyperparameters"] = truth.gp->params();
  if (truth.rkhs_norms) truth_json["rkhs_norms"] = vec_json(*truth.rkhs_norms);
  return {{"seed", c.seed},
          {"training_count", model.size()},
          {"delta", c.analysis.delta},
          {"outputs", std::move(outputs)},
          {"ground_truth", std::move(truth_json)}};
}

}  // namespace gpct
