// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/json_io.hpp"

#include <fstream>

#include "tmpsim/errors.hpp"

namespace tmpsim {
namespace {

template <typename T>
T require(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) {
    throw ConfigError(std::string("config: missing field '") + field + "'");
  }
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field '") + field + "' has the wrong type");
  }
}

template <typename T>
T optional_or(const nlohmann::json& j, const char* field, T fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field '") + field + "' has the wrong type");
  }
}

std::map<int, double> group_map(const nlohmann::json& j, const char* field) {
  std::map<int, double> out;
  if (!j.contains(field)) return out;
  for (const auto& [key, value] : j.at(field).items()) {
    try {
      out[std::stoi(key)] = value.get<double>();
    } catch (const std::exception&) {
      throw ConfigError(std::string("config: bad entry '") + key + "' in '" + field + "'");
    }
  }
  return out;
}

}  // namespace

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.hidden_size = require<int>(j, "hidden_size");
  spec.num_layers = require<int>(j, "num_layers");
  spec.seq_len = require<int>(j, "seq_len");
  spec.attention_heads = require<int>(j, "attention_heads");
  spec.global_batch = require<int>(j, "global_batch");
  spec.bytes_per_element = require<int>(j, "bytes_per_element");
  spec.recompute_enabled = optional_or<bool>(j, "recompute_enabled", true);
  spec.validate();
  return spec;
}

HardwareProfile hardware_profile_from_json(const nlohmann::json& j) {
  if (j.is_string()) return preset_profile(j.get<std::string>());
  HardwareProfile hw;
  if (j.contains("preset")) {
    hw = preset_profile(j.at("preset").get<std::string>());
  } else {
    hw.num_devices = require<int>(j, "num_devices");
    hw.memory_capacity = require<std::int64_t>(j, "memory_capacity");
    hw.compute_throughput = require<double>(j, "compute_throughput");
    hw.bandwidth_by_group = group_map(j, "bandwidth_by_group");
    hw.latency_by_group = group_map(j, "latency_by_group");
    hw.candidate_degrees = require<std::vector<int>>(j, "candidate_degrees");
  }
  hw.optimizer_bytes_per_element =
      optional_or<double>(j, "optimizer_bytes_per_element", hw.optimizer_bytes_per_element);
  if (j.contains("memory_capacity")) {
    hw.memory_capacity = j.at("memory_capacity").get<std::int64_t>();
  }
  if (j.contains("candidate_degrees")) {
    hw.candidate_degrees = j.at("candidate_degrees").get<std::vector<int>>();
  }
  hw.validate();
  return hw;
}

void RunConfig::validate() const {
  model.validate();
  hardware.validate();
  if (variants.empty()) throw ConfigError("config: 'variants' must be nonempty");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig config;
  config.model = model_spec_from_json(
      j.contains("model") ? j.at("model")
                          : throw ConfigError("config: missing field 'model'"));
  config.hardware = hardware_profile_from_json(
      j.contains("hardware") ? j.at("hardware")
                             : throw ConfigError("config: missing field 'hardware'"));
  if (j.contains("variants")) {
    for (const auto& name : j.at("variants")) {
      config.variants.push_back(variant_from_string(name.get<std::string>()));
    }
  } else {
    config.variants = {ScheduleVariant::Default, ScheduleVariant::IntraPass,
                       ScheduleVariant::CrossPass, ScheduleVariant::Oases};
  }
  if (j.contains("strategy")) {
    const auto& s = j.at("strategy");
    if (s.is_string()) {
      if (s.get<std::string>() != "plan") {
        throw ConfigError("config: 'strategy' must be a degree list, a single degree, or \"plan\"");
      }
    } else if (s.is_number_integer()) {
      Strategy strategy;
      strategy.degrees.assign(
          static_cast<std::size_t>(config.model.num_layers) * 2, s.get<int>());
      config.strategy = strategy;
    } else if (s.is_array()) {
      Strategy strategy;
      strategy.degrees = s.get<std::vector<int>>();
      config.strategy = strategy;
    } else {
      throw ConfigError("config: 'strategy' must be a degree list, a single degree, or \"plan\"");
    }
  }
  config.output_dir = optional_or<std::string>(j, "output_dir", config.output_dir);
  config.seed = optional_or<long>(j, "seed", 0);
  config.mem_granularity = optional_or<double>(j, "mem_granularity", config.mem_granularity);
  if (j.contains("budget")) config.budget_bytes = j.at("budget").get<double>();
  if (j.contains("measured_costs")) {
    config.measured_costs_path = j.at("measured_costs").get<std::string>();
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json plan_result_to_json(const PlanResult& result) {
  return {{"degrees", result.strategy.degrees},
          {"run_length", run_length_notation(result.strategy.degrees)},
          {"predicted_time", result.predicted_time},
          {"predicted_memory", result.predicted_memory},
          {"solve_time_ms", result.solve_time_ms}};
}

HardwareProfile preset_profile(const std::string& name) {
  HardwareProfile hw;
  hw.num_devices = 8;
  hw.memory_capacity = 24LL * 1024 * 1024 * 1024;
  hw.compute_throughput = 1.4e13;  // fused-sublayer elements per second
  hw.candidate_degrees = {2, 4, 8};
  hw.latency_by_group = {{2, 5e-6}, {4, 1e-5}, {8, 2e-5}};
  if (name == "nvlink-3090") {
    // Paired fast links; groups past a pair fall back to contended PCIe/IB.
    hw.bandwidth_by_group = {{2, 2.0e10}, {4, 1.7e9}, {8, 1.2e9}};
  } else if (name == "3090") {
    hw.bandwidth_by_group = {{2, 5.0e9}, {4, 4.2e9}, {8, 3.0e9}};
  } else {
    throw ConfigError("unknown hardware preset '" + name + "' (have: 3090, nvlink-3090)");
  }
  return hw;
}

std::vector<std::string> preset_profile_names() { return {"3090", "nvlink-3090"}; }

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

}  // namespace tmpsim
