#pragma once

// Run configuration: one JSON document describing a whole run, with CLI
// flags layered on top by the tools. Field names in JSON match the struct
// members below.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ogrid/training.hpp"

namespace ogrid {

struct RunConfig {
  std::string mesh_path;
  std::string model_out = "model.bin";
  std::string log_csv = "train_log.csv";
  std::string mesh_out = "extracted.obj";
  std::string metrics_csv = "metrics.csv";

  TrainConfig train;
  int grid_res = 256;                    // extraction lattice Q
  std::size_t metric_samples = 100'000;  // chamfer/NC point budget
  int metric_res = 128;                  // IoU lattice resolution
};

// Desk preset: small enough that a full fit plus metrics runs in minutes on
// one machine, large enough that the quality gates are meaningful.
inline void apply_desk_preset(RunConfig& rc) {
  rc.train.lods = {3, 4, 5};
  rc.train.F = 16;
  rc.train.n_samples = 200'000;
  rc.train.epochs = 10;
  rc.grid_res = 128;
  rc.metric_samples = 10'000;
}

namespace detail {

template <typename E>
E enum_from_string(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
                   const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw InvalidConfigError(std::string(what) + ": unknown value '" + s + "'");
}

}  // namespace detail

inline InterpMode interp_from_string(const std::string& s) {
  return detail::enum_from_string<InterpMode>(
      s, {{"cylindrical", InterpMode::Cylindrical}, {"trilinear", InterpMode::Trilinear}},
      "interp");
}
inline GridMode grid_from_string(const std::string& s) {
  return detail::enum_from_string<GridMode>(
      s, {{"oriented", GridMode::Oriented}, {"regular", GridMode::Regular}}, "grid");
}
inline RadiusMode radius_from_string(const std::string& s) {
  return detail::enum_from_string<RadiusMode>(
      s, {{"circumscribed", RadiusMode::Circumscribed}, {"inscribed", RadiusMode::Inscribed}},
      "radius");
}
inline OutputMode mode_from_string(const std::string& s) {
  return detail::enum_from_string<OutputMode>(
      s, {{"sdf", OutputMode::Sdf}, {"occupancy", OutputMode::Occupancy}}, "mode");
}

inline const char* to_string(InterpMode m) {
  return m == InterpMode::Cylindrical ? "cylindrical" : "trilinear";
}
inline const char* to_string(GridMode m) {
  return m == GridMode::Oriented ? "oriented" : "regular";
}
inline const char* to_string(RadiusMode m) {
  return m == RadiusMode::Circumscribed ? "circumscribed" : "inscribed";
}
inline const char* to_string(OutputMode m) {
  return m == OutputMode::Sdf ? "sdf" : "occupancy";
}

// Applies the keys present in `j` on top of `rc`. Unknown keys are an error:
// silent typos in experiment configs are worse than a failed run.
inline void apply_json(RunConfig& rc, const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfigError("config root must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "mesh") rc.mesh_path = val.get<std::string>();
      else if (key == "model_out") rc.model_out = val.get<std::string>();
      else if (key == "log_csv") rc.log_csv = val.get<std::string>();
      else if (key == "mesh_out") rc.mesh_out = val.get<std::string>();
      else if (key == "metrics_csv") rc.metrics_csv = val.get<std::string>();
      else if (key == "desk") { if (val.get<bool>()) apply_desk_preset(rc); }
      else if (key == "lods") rc.train.lods = val.get<std::vector<int>>();
      else if (key == "F") rc.train.F = val.get<int>();
      else if (key == "conv_k") rc.train.conv_k = val.get<int>();
      else if (key == "interp") rc.train.interp = interp_from_string(val.get<std::string>());
      else if (key == "grid") rc.train.grid = grid_from_string(val.get<std::string>());
      else if (key == "radius") rc.train.radius_mode = radius_from_string(val.get<std::string>());
      else if (key == "mode") rc.train.mode = mode_from_string(val.get<std::string>());
      else if (key == "hidden") rc.train.hidden = val.get<int>();
      else if (key == "L_p") rc.train.enc.L_p = val.get<int>();
      else if (key == "L_n") rc.train.enc.L_n = val.get<int>();
      else if (key == "n_samples") rc.train.n_samples = val.get<std::size_t>();
      else if (key == "batch") rc.train.batch = val.get<int>();
      else if (key == "epochs") rc.train.epochs = val.get<int>();
      else if (key == "lr") rc.train.lr = val.get<double>();
      else if (key == "alpha_n") rc.train.alpha_n = val.get<double>();
      else if (key == "sigma_near") rc.train.sigma_near = val.get<double>();
      else if (key == "sigma_far") rc.train.sigma_far = val.get<double>();
      else if (key == "per_cell_min") rc.train.per_cell_min = val.get<int>();
      else if (key == "tree_samples") rc.train.tree_samples = val.get<std::size_t>();
      else if (key == "seed") rc.train.seed = val.get<std::uint64_t>();
      else if (key == "grid_res") rc.grid_res = val.get<int>();
      else if (key == "metric_samples") rc.metric_samples = val.get<std::size_t>();
      else if (key == "metric_res") rc.metric_res = val.get<int>();
      else throw InvalidConfigError("config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfigError("config key '" + key + "': " + e.what());
    }
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  RunConfig rc;
  apply_json(rc, j);
  return rc;
}

// JSON echo of the effective configuration, written next to run outputs.
inline nlohmann::json to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["mesh"] = rc.mesh_path;
  j["model_out"] = rc.model_out;
  j["log_csv"] = rc.log_csv;
  j["mesh_out"] = rc.mesh_out;
  j["metrics_csv"] = rc.metrics_csv;
  j["lods"] = rc.train.lods;
  j["F"] = rc.train.F;
  j["conv_k"] = rc.train.conv_k;
  j["interp"] = to_string(rc.train.interp);
  j["grid"] = to_string(rc.train.grid);
  j["radius"] = to_string(rc.train.radius_mode);
  j["mode"] = to_string(rc.train.mode);
  j["hidden"] = rc.train.hidden;
  j["L_p"] = rc.train.enc.L_p;
  j["L_n"] = rc.train.enc.L_n;
  j["n_samples"] = rc.train.n_samples;
  j["batch"] = rc.train.batch;
  j["epochs"] = rc.train.epochs;
  j["lr"] = rc.train.lr;
  j["alpha_n"] = rc.train.alpha_n;
  j["sigma_near"] = rc.train.sigma_near;
  j["sigma_far"] = rc.train.sigma_far;
  j["per_cell_min"] = rc.train.per_cell_min;
  j["tree_samples"] = rc.train.tree_samples;
  j["seed"] = rc.train.seed;
  j["grid_res"] = rc.grid_res;
  j["metric_samples"] = rc.metric_samples;
  j["metric_res"] = rc.metric_res;
  return j;
}

}  // namespace ogrid
