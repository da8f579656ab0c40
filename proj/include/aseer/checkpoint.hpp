#pragma once

// Checkpoint file: one JSON document holding the model configuration, the
// graph threshold and sensor order, normalization statistics and every
// parameter by name as (rows, cols, row-major data).

#include "aseer/io.hpp"
#include "aseer/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace aseer {

inline constexpr const char* checkpoint_format = "aseer-checkpoint-1";

inline nlohmann::json parameters_to_json(const ParameterSet& ps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : ps) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) data.push_back(p.value(r, c));
    arr.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", data}});
  }
  return arr;
}

inline void parameters_from_json(ParameterSet& ps, const nlohmann::json& arr) {
  std::size_t seen = 0;
  for (const auto& e : arr) {
    const std::string name = e.at("name");
    if (!ps.contains(name)) throw DataError("checkpoint has unknown parameter " + name);
    Parameter& p = ps.at(name);
    const Eigen::Index rows = e.at("rows"), cols = e.at("cols");
    const auto& data = e.at("data");
    if (rows != p.value.rows() || cols != p.value.cols() || data.size() != static_cast<std::size_t>(rows * cols))
      throw DataError("checkpoint parameter " + name + " has the wrong shape");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) p.value(r, c) = data[k++].get<double>();
    ++seen;
  }
  if (seen != ps.size()) throw DataError("checkpoint is missing parameters");
}

inline nlohmann::json checkpoint_json(const SequenceModel& m) {
  std::vector<std::string> ids;
  for (const auto& n : m.graph().nodes) ids.push_back(n.sensor_id);
  return {{"format", checkpoint_format},
          {"model", to_json(m.config())},
          {"graph", {{"epsilon_km", m.graph().epsilon_km}, {"sensors", ids}}},
          {"norm", io::norm_to_json(m.norm())},
          {"parameters", parameters_to_json(m.parameters())}};
}

inline void save_checkpoint(const SequenceModel& m, const std::filesystem::path& path) {
  io::write_json(checkpoint_json(m), path);
}

// Rebuilds the model over `graph`, whose sensors must match the checkpoint's.
inline std::unique_ptr<SequenceModel> model_from_checkpoint(const nlohmann::json& j, DiffusionGraph graph) {
  try {
    if (j.at("format") != checkpoint_format) throw DataError("not a checkpoint file");
    const auto& ids = j.at("graph").at("sensors");
    if (ids.size() != graph.size()) throw DataError("checkpoint was trained on a different sensor set");
    for (std::size_t i = 0; i < graph.size(); ++i)
      if (ids[i].get<std::string>() != graph.nodes[i].sensor_id)
        throw DataError("checkpoint sensor " + ids[i].get<std::string>() + " does not match dataset");
    auto model = make_model(model_config_from_json(j.at("model")), std::move(graph),
                            io::norm_from_json(j.at("norm")));
    parameters_from_json(model->parameters(), j.at("parameters"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline double checkpoint_epsilon(const nlohmann::json& j) {
  return j.at("graph").at("epsilon_km").get<double>();
}

}  // namespace aseer
