// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "tmpsim/costs.hpp"
#include "tmpsim/model.hpp"

namespace tmpsim::test {

inline ModelSpec small_spec(int layers, int hidden = 64, int batch = 4) {
  ModelSpec spec;
  spec.hidden_size = hidden;
  spec.num_layers = layers;
  spec.seq_len = 8;
  spec.attention_heads = 4;
  spec.global_batch = batch;
  spec.bytes_per_element = 2;
  spec.recompute_enabled = true;
  return spec;
}

inline HardwareProfile flat_profile() {
  HardwareProfile hw;
  hw.num_devices = 8;
  hw.memory_capacity = 1LL << 40;
  hw.compute_throughput = 1e9;
  hw.bandwidth_by_group = {{2, 1e9}, {4, 8e8}, {8, 6e8}};
  hw.latency_by_group = {{2, 0.0}, {4, 1e-5}, {8, 2e-5}};
  hw.candidate_degrees = {2, 4, 8};
  return hw;
}

inline ModelGraph small_graph(int layers, bool recompute = true) {
  ModelSpec spec = small_spec(layers);
  spec.recompute_enabled = recompute;
  return build_block_graph(build_operator_sequence(spec), spec);
}

// Arbitrary nonnegative cost table over the given graph; communication and
// compute ranges are controlled so tests can force either regime.
inline CostVectors random_table(const ModelGraph& graph, std::mt19937& rng, int degrees,
                                double d_lo, double d_hi, double c_lo, double c_hi) {
  CostVectors costs;
  for (int i = 0; i < degrees; ++i) costs.degrees.push_back(1 << (i + 1));
  costs.backward_includes_recompute = graph.recompute_enabled;
  std::uniform_real_distribution<double> d_dist(d_lo, d_hi);
  std::uniform_real_distribution<double> c_dist(c_lo, c_hi);
  std::uniform_real_distribution<double> b_dist(1.0, 3.0);
  std::uniform_real_distribution<double> m_dist(1.0, 100.0);
  for (int b = 0; b < graph.block_count(); ++b) {
    BlockCosts bc;
    for (int i = 0; i < degrees; ++i) {
      const double d = d_dist(rng);
      const double c = graph.blocks[b].comm_op ? c_dist(rng) : 0.0;
      bc.d_fwd.push_back(d);
      bc.d_bwd.push_back(d * b_dist(rng));
      bc.c_fwd.push_back(c);
      bc.c_bwd.push_back(c);
      bc.m_param.push_back(m_dist(rng));
      bc.m_saved.push_back(m_dist(rng));
      bc.m_runtime.push_back(m_dist(rng));
      bc.allgather_time.push_back(c_dist(rng) * 0.25);
    }
    costs.blocks.push_back(std::move(bc));
    costs.boundary_bytes_half.push_back(1024.0);
  }
  return costs;
}

inline Strategy uniform_strategy(const CostVectors& costs, int degree) {
  Strategy s;
  s.degrees.assign(static_cast<std::size_t>(costs.block_count()), degree);
  return s;
}

}  // namespace tmpsim::test
