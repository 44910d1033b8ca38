#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpct/errors.hpp"
#include "gpct/experiment.hpp"
#include "gpct/gp_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kNumerical = 3,
  kDivergence = 4,
  kIo = 5,
};

struct CommonArgs {
  std::string config;
  std::string model;
  std::string mode = "compare";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

gpct::ExperimentConfig load(const CommonArgs& a) {
  gpct::ExperimentConfig c =
      a.config.empty() ? gpct::ExperimentConfig::reference() : gpct::load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.out) c.output_dir = *a.out;
  return c;
}

fs::path output_dir(const gpct::ExperimentConfig& c) {
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::shared_ptr<const gpct::GPModel> read_model(const std::string& path) {
  if (path.empty()) throw gpct::ConfigError("--model is required for this command");
  return std::make_shared<const gpct::GPModel>(gpct::load_model(path));
}

void cmd_train(const CommonArgs& a) {
  const auto cfg = load(a);
  const fs::path dir = output_dir(cfg);
  const auto truth = gpct::build_ground_truth(cfg);
  const auto trained = gpct::train_model(cfg, truth);
  gpct::save_model(*trained.model, dir / "model.json");
  gpct::save_training_csv(trained.model->training_set(), dir / "training_set.csv",
                          {"qddot_1", "qddot_2", "qdot_1", "qdot_2", "q_1", "q_2"},
                          {"tau_tilde_1", "tau_tilde_2"});
  write_json(gpct::train_report(trained, truth, cfg), dir / "train_report.json");
  std::cout << "model written to " << (dir / "model.json").string() << '\n';
}

json run_simulation(const gpct::ExperimentConfig& cfg, const gpct::GroundTruth& truth,
                    std::shared_ptr<const gpct::GPModel> model, const std::string& mode,
                    const fs::path& dir) {
  const gpct::Box region = gpct::training_state_region(cfg);
  const auto setup = gpct::make_comparison_setup(cfg, truth, model);
  json report{{"seed", cfg.seed}, {"mode", mode}};

  auto emit = [&](const gpct::SimulationResult& r, const std::string& name) {
    gpct::write_trace_csv(r, dir / (name + ".csv"));
    for (int j = 0; j < r.dof(); ++j)
      gpct::write_phase_csv(r, dir / ("phase_" + name + "_" + std::to_string(j + 1) + ".csv"), j);
    report[name] = gpct::report_json(gpct::metrics(r, region));
  };

  if (mode == "compare") {
    const auto res = gpct::run_comparison(setup);
    emit(res.static_run, "static");
    emit(res.adaptive_run, "adaptive");
    report["adaptive_not_worse"] =
        report["adaptive"]["rms_error"].get<double>() <= report["static"]["rms_error"].get<double>();
  } else {
    const auto schedule =
        mode == "static" ? setup.schedule.without_adaptation() : setup.schedule;
    const auto law = gpct::make_control_law(setup.plant_est, setup.gp, schedule);
    emit(gpct::integrate(*setup.plant_true, setup.kappa, law, setup.trajectory, setup.initial,
                         setup.integrator),
         mode);
  }
  write_json(report, dir / "metrics.json");
  return report;
}

void cmd_simulate(const CommonArgs& a) {
  const auto cfg = load(a);
  std::shared_ptr<const gpct::GPModel> model;
  if (a.mode != "static" || !a.model.empty()) model = read_model(a.model);
  const fs::path dir = output_dir(cfg);
  const auto truth = gpct::build_ground_truth(cfg);
  const json report = run_simulation(cfg, truth, model, a.mode, dir);
  for (const char* name : {"static", "adaptive"})
    if (report.contains(name))
      std::cout << name << " rms error " << report[name]["rms_error"].get<double>() << '\n';
}

void cmd_analyze(const CommonArgs& a) {
  const auto cfg = load(a);
  const auto model = read_model(a.model);
  const fs::path dir = output_dir(cfg);
  const auto truth = gpct::build_ground_truth(cfg);
  const auto report = gpct::analyze_stability(cfg, truth, *model);
  write_json(gpct::report_json(report), dir / "analysis.json");
  if (!report.infeasibility.empty())
    std::cout << "infeasible: " << report.infeasibility << '\n';
  else
    std::cout << "eps " << report.eps << ", ultimate radius "
              << report.constants->ultimate_radius << '\n';
}

void cmd_compare(const CommonArgs& a) {
  const auto cfg = load(a);
  const fs::path dir = output_dir(cfg);
  const auto truth = gpct::build_ground_truth(cfg);
  const auto trained = gpct::train_model(cfg, truth);
  gpct::save_model(*trained.model, dir / "model.json");
  write_json(gpct::train_report(trained, truth, cfg), dir / "train_report.json");
  const json metrics = run_simulation(cfg, truth, trained.model, "compare", dir);
  const auto analysis = gpct::analyze_stability(cfg, truth, *trained.model);
  write_json(gpct::report_json(analysis), dir / "analysis.json");
  std::cout << "static rms " << metrics["static"]["rms_error"].get<double>() << ", adaptive rms "
            << metrics["adaptive"]["rms_error"].get<double>() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP computed-torque control experiments"};
  app.require_subcommand(1);
  CommonArgs args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "master seed override");
    sub->add_option("--out", args.out, "output directory override");
  };

  auto* train = app.add_subcommand("train", "generate data, fit the GP, save the model");
  add_common(train);
  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation");
  add_common(simulate);
  simulate->add_option("--model", args.model, "trained model (JSON)");
  simulate->add_option("--mode", args.mode, "static, adaptive or compare")
      ->check(CLI::IsMember({"static", "adaptive", "compare"}));
  auto* analyze = app.add_subcommand("analyze", "error bound and Lyapunov constants");
  add_common(analyze);
  analyze->add_option("--model", args.model, "trained model (JSON)")->required();
  auto* compare = app.add_subcommand("compare", "train, simulate both schedules, analyze");
  add_common(compare);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) cmd_train(args);
    if (*simulate) cmd_simulate(args);
    if (*analyze) cmd_analyze(args);
    if (*compare) cmd_compare(args);
  } catch (const gpct::DivergenceError& e) {
    std::cerr << "divergence at t = " << e.time() << ": " << e.what() << '\n';
    return kDivergence;
  } catch (const gpct::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const gpct::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfig;
  } catch (const gpct::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const gpct::InfeasibleError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
