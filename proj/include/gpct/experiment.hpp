#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpct/box.hpp"
#include "gpct/controller.hpp"
#include "gpct/gp_regression.hpp"
#include "gpct/hyperparameter_optimizer.hpp"
#include "gpct/lagrangian.hpp"
#include "gpct/simulation.hpp"
#include "gpct/stability.hpp"

namespace gpct {

struct KappaConfig {
  UnknownDynamics::Kind kind = UnknownDynamics::Kind::gp_sample_path;
  /// GP stand-in: number of samples of the analytic function it is fit to.
  int source_points = 50;
  int restarts = 5;
  int max_iterations = 100;
  double min_noise_variance = 1e-6;
  Hyperparameters init;  ///< over [qdot; q]
};

struct TrainingConfig {
  Box domain;  ///< over [qddot; qdot; q]
  int count = 225;
  SamplingMode sampling = SamplingMode::uniform;
  double noise_std = 0.0;
};

struct GpConfig {
  int restarts = 5;
  int max_iterations = 100;
  double min_noise_variance = 1e-6;
  Hyperparameters init;  ///< over [qddot; qdot; q]
};

struct ScheduleConfig {
  Eigen::VectorXd base_p, base_d, weight_p, weight_d;
  std::optional<Eigen::VectorXd> ceiling_p, ceiling_d;
};

struct AnalysisConfig {
  double delta = 0.1;
  double eps2 = 1.0;
  int delta_bar_samples = 10000;
  int definiteness_samples = 1000;
  /// Required for analytic kappa; computed exactly for the GP stand-in.
  std::optional<Eigen::VectorXd> rkhs_norms;
  Box bound_q_domain;
  Box bound_qdot_domain;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  TwoLinkParameters plant;
  std::optional<TwoLinkParameters> plant_estimate;
  KappaConfig kappa;
  TrainingConfig training;
  GpConfig gp;
  ScheduleConfig schedule;
  TrajectorySpec trajectory;
  ManipulatorState initial_state;
  double dt = 1e-3;
  IntegratorOptions::Hold hold = IntegratorOptions::Hold::zero_order;
  AnalysisConfig analysis;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  /// The reference two-link setup with all defaults filled in.
  static ExperimentConfig reference();
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& c, const std::filesystem::path& path);

/// Stream seeds derived from the master seed.
enum class SeedStream : std::uint64_t {
  kappa_samples = 1,
  kappa_optimizer = 2,
  training_samples = 3,
  gp_optimizer = 4,
  analysis = 5,
};
std::uint64_t stream_seed(const ExperimentConfig& c, SeedStream s);

struct GroundTruth {
  UnknownDynamics kappa;
  std::shared_ptr<const GPModel> gp;  ///< set for the GP stand-in only
  std::optional<Eigen::VectorXd> rkhs_norms;
};

/// Deterministic in (config, seed).
GroundTruth build_ground_truth(const ExperimentConfig& c);

/// sqrt(alpha^T K alpha) per output: the RKHS norm of a GP posterior mean.
Eigen::VectorXd posterior_mean_rkhs_norms(const GPModel& gp);

struct TrainedModel {
  std::shared_ptr<const GPModel> model;
  std::vector<OptimizationResult> fits;
};

TrainedModel train_model(const ExperimentConfig& c, const GroundTruth& truth);

/// Fills default ceilings (base + weight * sigma_f^2 of the matching output).
GainSchedule resolve_schedule(const ExperimentConfig& c, const GPModel* gp);

std::shared_ptr<const ManipulatorModel> make_true_plant(const ExperimentConfig& c);
std::shared_ptr<const ManipulatorModel> make_estimated_plant(const ExperimentConfig& c);

ComparisonSetup make_comparison_setup(const ExperimentConfig& c, const GroundTruth& truth,
                                      std::shared_ptr<const GPModel> model);

struct DefinitenessSummary {
  int samples = 0;
  int negative_definite = 0;
  int schur_agreement = 0;
  double max_lambda = -std::numeric_limits<double>::infinity();
  bool all_pass() const { return negative_definite == samples && schur_agreement == samples; }
};

struct StabilityReport {
  SystemBounds bounds;
  ErrorBoundParams error_bound;
  Eigen::VectorXd beta;
  double v0 = 0.0;
  EpsilonInterval interval;
  double eps = 0.0;
  std::optional<LyapunovConstants> constants;
  std::string infeasibility;
  DefinitenessSummary definiteness;
};

StabilityReport analyze_stability(const ExperimentConfig& c, const GroundTruth& truth,
                                  const GPModel& model);

/// Lyapunov value at the configured initial state for the adaptive schedule.
double initial_lyapunov_value(const ExperimentConfig& c, const ManipulatorModel& plant,
                              const GPModel* model, const GainSchedule& schedule,
                              double eps);

/// Box over [q; qdot] covered by the training inputs.
Box training_state_region(const ExperimentConfig& c);

/// Error-bound inputs for a trained model: RKHS norms of the ground truth,
/// information gains of the training set, configured delta.
ErrorBoundParams error_bound_params(const ExperimentConfig& c, const GroundTruth& truth,
                                    const GPModel& model);

nlohmann::json report_json(const SystemBounds& b);
nlohmann::json report_json(const ErrorBoundParams& p);
nlohmann::json report_json(const LyapunovConstants& k);
nlohmann::json report_json(const EpsilonInterval& e);
nlohmann::json report_json(const Metrics& m);
nlohmann::json report_json(const StabilityReport& r);
nlohmann::json train_report(const TrainedModel& trained, const GroundTruth& truth,
                            const ExperimentConfig& c);

}  // namespace gpct
