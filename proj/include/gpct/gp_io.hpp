#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpct/gp_regression.hpp"

namespace gpct {

/// CSV: header row, then one row per sample (d inputs followed by n outputs).
/// Empty name lists produce x_1..x_d, y_1..y_n.
void save_training_csv(const TrainingSet& data, const std::filesystem::path& path,
                       std::vector<std::string> input_names = {},
                       std::vector<std::string> output_names = {});
TrainingSet load_training_csv(const std::filesystem::path& path, int input_dim);

void to_json(nlohmann::json& j, const Hyperparameters& p);
void from_json(const nlohmann::json& j, Hyperparameters& p);

/// Training data plus hyperparameters; the factorization is rebuilt on load.
nlohmann::json model_to_json(const GPModel& model);
GPModel model_from_json(const nlohmann::json& j);
void save_model(const GPModel& model, const std::filesystem::path& path);
GPModel load_model(const std::filesystem::path& path);

/// Shortest representation that round-trips through strtod.
std::string format_double(double v);

}  // namespace gpct
