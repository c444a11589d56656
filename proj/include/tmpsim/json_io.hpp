// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmpsim/costs.hpp"
#include "tmpsim/model.hpp"
#include "tmpsim/planner.hpp"
#include "tmpsim/schedule.hpp"

namespace tmpsim {

struct RunConfig {
  ModelSpec model;
  HardwareProfile hardware;
  std::vector<ScheduleVariant> variants;
  std::optional<Strategy> strategy;  // empty: "plan", run the planner
  std::string output_dir = "out";
  long seed = 0;
  double mem_granularity = 1 << 20;
  std::optional<double> budget_bytes;  // defaults to hardware memory capacity
  std::optional<std::string> measured_costs_path;

  void validate() const;
};

ModelSpec model_spec_from_json(const nlohmann::json& j);
HardwareProfile hardware_profile_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json plan_result_to_json(const PlanResult& result);

/// Synthetic calibrations of two commodity 4-GPU-per-node clusters. The
/// "nvlink-3090" preset has fast pairwise links; "3090" is PCIe/IB only.
HardwareProfile preset_profile(const std::string& name);
std::vector<std::string> preset_profile_names();

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace tmpsim
