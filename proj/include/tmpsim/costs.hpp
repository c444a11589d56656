// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "tmpsim/model.hpp"

namespace tmpsim {

/// Link model: bandwidth and latency are step functions of the collective
/// group size, which captures NVLink-pair / intra-node / inter-node tiers.
struct HardwareProfile {
  int num_devices = 0;
  std::int64_t memory_capacity = 0;     // bytes per device
  double compute_throughput = 0.0;      // elements per second
  std::map<int, double> bandwidth_by_group;  // group size -> bytes/s
  std::map<int, double> latency_by_group;    // group size -> seconds
  std::vector<int> candidate_degrees;        // powers of two, ascending
  double optimizer_bytes_per_element = 16.0;  // param + grad + optimizer state

  void validate() const;
};

/// One TMP degree per block, each taken from candidate_degrees.
struct Strategy {
  std::vector<int> degrees;
};

struct BlockCosts {
  // Indexed by candidate-degree slot. Times are per sub-batch seconds,
  // memory entries are bytes per device.
  std::vector<double> d_fwd;
  std::vector<double> d_bwd;
  std::vector<double> c_fwd;
  std::vector<double> c_bwd;
  std::vector<double> m_param;
  std::vector<double> m_saved;
  std::vector<double> m_runtime;
  std::vector<double> allgather_time;  // resharding at this group size
};

struct CostVectors {
  std::vector<int> degrees;       // candidate degrees, ascending
  std::vector<BlockCosts> blocks;
  std::vector<double> boundary_bytes_half;  // half-batch boundary tensor, bytes
  bool backward_includes_recompute = true;

  int degree_index(int degree) const;  // throws ConfigError when unknown
  int block_count() const { return static_cast<int>(blocks.size()); }
};

/// Per-device ring AllReduce traffic: 2K(N-1)/N.
double allreduce_volume(double message_bytes, int degree);

/// Per-device ring AllGather traffic: K(N-1)/N.
double allgather_volume(double message_bytes, int degree);

/// volume / bandwidth[N] + latency[N]; zero for N = 1.
double comm_time(double volume_bytes, int degree, const HardwareProfile& profile);

CostVectors build_cost_vectors(const ModelGraph& graph, const ModelSpec& spec,
                               const HardwareProfile& profile);

/// Applies measured-cost rows on top of an analytic table. Rows:
/// {block_index, degree, field, seconds_or_bytes}.
CostVectors load_measured_costs(const std::filesystem::path& path, CostVectors base);

void validate_strategy(const Strategy& strategy, const CostVectors& costs);

}  // namespace tmpsim
