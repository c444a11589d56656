// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/costs.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "json.hpp"
#include "tmpsim/errors.hpp"

namespace tmpsim {
namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Rough working-set multiplier for activations internal to a fused sublayer,
// relative to the boundary tensor. QKV/context for attention, the 4H
// intermediate plus projections for the FFN.
double internal_activation_multiplier(const Block& block) {
  if (!block.compute_ops.empty() && block.compute_ops.front().sublayer == Sublayer::Ffn) {
    return 6.0;
  }
  return 4.0;
}

}  // namespace

void HardwareProfile::validate() const {
  if (num_devices <= 0) throw ConfigError("hardware profile: 'num_devices' must be positive");
  if (memory_capacity <= 0) {
    throw ConfigError("hardware profile: 'memory_capacity' must be positive");
  }
  if (compute_throughput <= 0.0) {
    throw ConfigError("hardware profile: 'compute_throughput' must be positive");
  }
  if (candidate_degrees.empty()) {
    throw ConfigError("hardware profile: 'candidate_degrees' must be nonempty");
  }
  int prev = 0;
  for (int degree : candidate_degrees) {
    if (!is_power_of_two(degree)) {
      throw ConfigError("hardware profile: candidate degree " + std::to_string(degree) +
                        " is not a power of two");
    }
    if (degree > num_devices) {
      throw ConfigError("hardware profile: candidate degree " + std::to_string(degree) +
                        " exceeds num_devices");
    }
    if (degree <= prev) {
      throw ConfigError("hardware profile: candidate_degrees must be strictly ascending");
    }
    prev = degree;
    if (degree > 1 && bandwidth_by_group.find(degree) == bandwidth_by_group.end()) {
      throw ConfigError("hardware profile: missing bandwidth_by_group entry for group size " +
                        std::to_string(degree));
    }
  }
  for (const auto& [group, bw] : bandwidth_by_group) {
    if (bw <= 0.0) {
      throw ConfigError("hardware profile: bandwidth for group " + std::to_string(group) +
                        " must be positive");
    }
  }
  if (optimizer_bytes_per_element <= 0.0) {
    throw ConfigError("hardware profile: 'optimizer_bytes_per_element' must be positive");
  }
}

int CostVectors::degree_index(int degree) const {
  auto it = std::find(degrees.begin(), degrees.end(), degree);
  if (it == degrees.end()) {
    throw ConfigError("degree " + std::to_string(degree) + " is not a candidate degree");
  }
  return static_cast<int>(it - degrees.begin());
}

double allreduce_volume(double message_bytes, int degree) {
  if (message_bytes < 0.0 || degree < 1) {
    throw ConfigError("allreduce_volume: message size must be >= 0 and degree >= 1");
  }
  return 2.0 * message_bytes * (degree - 1) / degree;
}

double allgather_volume(double message_bytes, int degree) {
  if (message_bytes < 0.0 || degree < 1) {
    throw ConfigError("allgather_volume: message size must be >= 0 and degree >= 1");
  }
  return message_bytes * (degree - 1) / degree;
}

double comm_time(double volume_bytes, int degree, const HardwareProfile& profile) {
  if (degree == 1) return 0.0;
  auto bw = profile.bandwidth_by_group.find(degree);
  if (bw == profile.bandwidth_by_group.end()) {
    throw ConfigError("comm_time: no bandwidth entry for group size " + std::to_string(degree));
  }
  double latency = 0.0;
  if (auto it = profile.latency_by_group.find(degree); it != profile.latency_by_group.end()) {
    latency = it->second;
  }
  return volume_bytes / bw->second + latency;
}

CostVectors build_cost_vectors(const ModelGraph& graph, const ModelSpec& spec,
                               const HardwareProfile& profile) {
  spec.validate();
  profile.validate();

  CostVectors costs;
  costs.degrees = profile.candidate_degrees;
  costs.backward_includes_recompute = graph.recompute_enabled;

  const double half_batch = spec.global_batch / 2.0;
  const double bytes = static_cast<double>(spec.bytes_per_element);
  const double backward_factor = graph.recompute_enabled ? 3.0 : 2.0;

  for (const Block& block : graph.blocks) {
    BlockCosts bc;
    const double boundary_full =
        static_cast<double>(block.activation_elements) * spec.global_batch * bytes;
    const double boundary_half = boundary_full / 2.0;
    const double internal_full =
        internal_activation_multiplier(block) * static_cast<double>(block.activation_elements) *
        spec.global_batch * bytes;
    // Work per sub-batch: one multiply-accumulate sweep over the parameters
    // for every token of the half batch.
    const double work =
        static_cast<double>(block.param_count) * static_cast<double>(spec.seq_len) * half_batch;
    const double comm_message = half_batch * static_cast<double>(block.activation_elements) * bytes;

    for (int degree : costs.degrees) {
      const double d = work / (degree * profile.compute_throughput);
      bc.d_fwd.push_back(d);
      bc.d_bwd.push_back(backward_factor * d);
      double c = 0.0;
      if (block.comm_op && degree > 1) {
        c = comm_time(allreduce_volume(comm_message, degree), degree, profile);
      }
      bc.c_fwd.push_back(c);
      bc.c_bwd.push_back(c);
      bc.m_param.push_back(static_cast<double>(block.param_count) *
                           profile.optimizer_bytes_per_element / degree);
      if (graph.recompute_enabled) {
        // Only the post-communication boundary tensor is retained; it is the
        // AllReduce output and therefore replicated across the group.
        bc.m_saved.push_back(boundary_full);
      } else {
        bc.m_saved.push_back(boundary_full + internal_full / degree);
      }
      bc.m_runtime.push_back(2.0 * internal_full / degree);
      bc.allgather_time.push_back(
          degree > 1 ? comm_time(allgather_volume(boundary_half, degree), degree, profile) : 0.0);
    }
    costs.blocks.push_back(std::move(bc));
    costs.boundary_bytes_half.push_back(boundary_half);
  }
  return costs;
}

CostVectors load_measured_costs(const std::filesystem::path& path, CostVectors base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open measured-cost table: " + path.string());
  nlohmann::json rows;
  try {
    in >> rows;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("measured-cost table " + path.string() + ": " + e.what());
  }
  if (!rows.is_array()) {
    throw ConfigError("measured-cost table must be a JSON array of rows");
  }
  for (const auto& row : rows) {
    int block_index, degree;
    std::string field;
    double value;
    try {
      block_index = row.at("block_index").get<int>();
      degree = row.at("degree").get<int>();
      field = row.at("field").get<std::string>();
      value = row.at("seconds_or_bytes").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("measured-cost row: ") + e.what());
    }
    if (block_index < 0 || block_index >= base.block_count()) {
      throw ConfigError("measured-cost row: unknown block index " + std::to_string(block_index));
    }
    if (value < 0.0) {
      throw ConfigError("measured-cost row: negative value for block " +
                        std::to_string(block_index));
    }
    const int slot = base.degree_index(degree);
    BlockCosts& bc = base.blocks[block_index];
    if (field == "d_fwd") {
      bc.d_fwd[slot] = value;
    } else if (field == "d_bwd") {
      bc.d_bwd[slot] = value;
    } else if (field == "c_fwd") {
      bc.c_fwd[slot] = value;
    } else if (field == "c_bwd") {
      bc.c_bwd[slot] = value;
    } else if (field == "m_param") {
      bc.m_param[slot] = value;
    } else if (field == "m_saved") {
      bc.m_saved[slot] = value;
    } else if (field == "m_runtime") {
      bc.m_runtime[slot] = value;
    } else {
      throw ConfigError("measured-cost row: unknown field '" + field + "'");
    }
  }
  return base;
}

void validate_strategy(const Strategy& strategy, const CostVectors& costs) {
  if (static_cast<int>(strategy.degrees.size()) != costs.block_count()) {
    throw ConfigError("strategy length " + std::to_string(strategy.degrees.size()) +
                      " does not match block count " + std::to_string(costs.block_count()));
  }
  for (int degree : strategy.degrees) costs.degree_index(degree);
}

}  // namespace tmpsim
