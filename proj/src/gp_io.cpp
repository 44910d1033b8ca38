#include "gpct/gp_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gpct/errors.hpp"

namespace gpct {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void save_training_csv(const TrainingSet& data, const std::filesystem::path& path,
                       std::vector<std::string> input_names,
                       std::vector<std::string> output_names) {
  data.validate();
  const int d = data.input_dim();
  const int n = data.output_dim();
  if (input_names.empty())
    for (int i = 0; i < d; ++i) input_names.push_back("x_" + std::to_string(i + 1));
  if (output_names.empty())
    for (int i = 0; i < n; ++i) output_names.push_back("y_" + std::to_string(i + 1));
  if (static_cast<int>(input_names.size()) != d ||
      static_cast<int>(output_names.size()) != n)
    throw InputError("save_training_csv: column name count mismatch");

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  std::string sep;
  for (const auto& name : input_names) { os << sep << name; sep = ","; }
  for (const auto& name : output_names) { os << sep << name; sep = ","; }
  os << '\n';
  for (int j = 0; j < data.size(); ++j) {
    sep.clear();
    for (int i = 0; i < d; ++i) { os << sep << format_double(data.inputs(i, j)); sep = ","; }
    for (int i = 0; i < n; ++i) { os << sep << format_double(data.outputs(j, i)); sep = ","; }
    os << '\n';
  }
}

TrainingSet load_training_csv(const std::filesystem::path& path, int input_dim) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw InputError(path.string() + ": missing header");
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if (input_dim < 0 || columns <= input_dim)
    throw InputError(path.string() + ": header has " + std::to_string(columns) +
                     " columns, need more than " + std::to_string(input_dim));
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw InputError(path.string() + ":" + std::to_string(line_no) +
                         ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (static_cast<long>(row.size()) != columns)
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": wrong column count");
    rows.push_back(std::move(row));
  }
  const int m = static_cast<int>(rows.size());
  const int n = static_cast<int>(columns) - input_dim;
  TrainingSet out{Eigen::MatrixXd(input_dim, m), Eigen::MatrixXd(m, n)};
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < input_dim; ++i) out.inputs(i, j) = rows[j][i];
    for (int i = 0; i < n; ++i) out.outputs(j, i) = rows[j][input_dim + i];
  }
  out.validate();
  return out;
}

void to_json(nlohmann::json& j, const Hyperparameters& p) {
  j = nlohmann::json{
      {"signal_variance", p.signal_variance},
      {"lengthscales", std::vector<double>(p.lengthscales.data(),
                                           p.lengthscales.data() + p.lengthscales.size())},
      {"noise_variance", p.noise_variance}};
}

void from_json(const nlohmann::json& j, Hyperparameters& p) {
  p.signal_variance = j.at("signal_variance").get<double>();
  const auto ls = j.at("lengthscales").get<std::vector<double>>();
  p.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), ls.size());
  p.noise_variance = j.at("noise_variance").get<double>();
  p.validate();
}

nlohmann::json model_to_json(const GPModel& model) {
  const auto& data = model.training_set();
  nlohmann::json inputs = nlohmann::json::array();
  nlohmann::json outputs = nlohmann::json::array();
  for (int j = 0; j < data.size(); ++j) {
    std::vector<double> x(data.inputs.col(j).data(),
                          data.inputs.col(j).data() + data.input_dim());
    std::vector<double> y(data.output_dim());
    for (int i = 0; i < data.output_dim(); ++i) y[i] = data.outputs(j, i);
    inputs.push_back(std::move(x));
    outputs.push_back(std::move(y));
  }
  return {{"input_dim", data.input_dim()},
          {"output_dim", data.output_dim()},
          {"inputs", std::move(inputs)},
          {"outputs", std::move(outputs)},
          {"hyperparameters", model.params()}};
}

GPModel model_from_json(const nlohmann::json& j) {
  try {
    const int d = j.at("input_dim").get<int>();
    const int n = j.at("output_dim").get<int>();
    const auto& inputs = j.at("inputs");
    const auto& outputs = j.at("outputs");
    if (inputs.size() != outputs.size())
      throw InputError("model: inputs and outputs differ in length");
    const int m = static_cast<int>(inputs.size());
    TrainingSet data{Eigen::MatrixXd(d, m), Eigen::MatrixXd(m, n)};
    for (int k = 0; k < m; ++k) {
      const auto x = inputs[k].get<std::vector<double>>();
      const auto y = outputs[k].get<std::vector<double>>();
      if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != n)
        throw InputError("model: sample " + std::to_string(k) + " has wrong size");
      for (int i = 0; i < d; ++i) data.inputs(i, k) = x[i];
      for (int i = 0; i < n; ++i) data.outputs(k, i) = y[i];
    }
    auto params = j.at("hyperparameters").get<std::vector<Hyperparameters>>();
    return GPModel(std::move(data), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

void save_model(const GPModel& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << model_to_json(model).dump(2) << '\n';
}

GPModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace gpct
