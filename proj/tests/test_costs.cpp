// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "tmpsim/costs.hpp"
#include "tmpsim/errors.hpp"

using namespace tmpsim;
using test::small_spec;

namespace {

std::filesystem::path write_temp_json(const char* name, const char* content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("allreduce volume is 2K(N-1)/N") {
  CHECK(allreduce_volume(4.0, 4) == doctest::Approx(6.0));
  CHECK(allreduce_volume(3.0, 2) == doctest::Approx(3.0));
  CHECK(allreduce_volume(123.0, 1) == 0.0);
}

TEST_CASE("allreduce volume is nondecreasing in N and bounded by 2K") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> k_dist(0.0, 1e9);
  for (int trial = 0; trial < 200; ++trial) {
    const double k = k_dist(rng);
    double prev = 0.0;
    for (int degree = 1; degree <= 64; degree *= 2) {
      const double v = allreduce_volume(k, degree);
      CHECK(v >= prev);
      CHECK(v <= 2.0 * k);
      prev = v;
    }
  }
}

TEST_CASE("allgather volume matches the ring step count") {
  // Independent oracle: N-1 ring steps, each moving K/N bytes.
  auto ring = [](double k, int n) { return (n - 1) * (k / n); };
  CHECK(allgather_volume(4.0, 4) == doctest::Approx(ring(4.0, 4)));
  CHECK(allgather_volume(4.0, 4) == doctest::Approx(3.0));
  CHECK(allgather_volume(8.0, 2) == doctest::Approx(4.0));
  CHECK(allgather_volume(100.0, 1) == 0.0);
  std::mt19937 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const double k = static_cast<double>(rng() % 100000);
    for (int n : {2, 4, 8, 16}) CHECK(allgather_volume(k, n) == doctest::Approx(ring(k, n)));
  }
}

TEST_CASE("comm time is volume over bandwidth plus latency") {
  HardwareProfile hw = test::flat_profile();
  hw.bandwidth_by_group = {{2, 1e9}, {4, 3e8}};
  hw.latency_by_group = {{2, 0.0}, {4, 1e-3}};
  hw.candidate_degrees = {2, 4};
  CHECK(comm_time(1e9, 2, hw) == doctest::Approx(1.0));
  CHECK(comm_time(6e8, 4, hw) == doctest::Approx(2.001));
  CHECK(comm_time(5e9, 1, hw) == 0.0);
  CHECK_THROWS_AS(comm_time(1.0, 16, hw), ConfigError);
}

TEST_CASE("hardware profile invariants") {
  HardwareProfile hw = test::flat_profile();
  hw.candidate_degrees = {2, 3};
  CHECK_THROWS_AS(hw.validate(), ConfigError);
  hw = test::flat_profile();
  hw.candidate_degrees = {2, 16};
  CHECK_THROWS_AS(hw.validate(), ConfigError);  // exceeds num_devices
  hw = test::flat_profile();
  hw.bandwidth_by_group.erase(4);
  CHECK_THROWS_AS(hw.validate(), ConfigError);
}

TEST_CASE("analytic cost vectors for a one-layer toy model, checked by hand") {
  // hidden 4, heads 2, seq 2, batch 2, one byte per element.
  ModelSpec spec;
  spec.hidden_size = 4;
  spec.num_layers = 1;
  spec.seq_len = 2;
  spec.attention_heads = 2;
  spec.global_batch = 2;
  spec.bytes_per_element = 1;
  HardwareProfile hw;
  hw.num_devices = 2;
  hw.memory_capacity = 1 << 20;
  hw.compute_throughput = 100.0;  // elements per second
  hw.bandwidth_by_group = {{2, 10.0}};
  hw.latency_by_group = {{2, 0.5}};
  hw.candidate_degrees = {1, 2};
  hw.optimizer_bytes_per_element = 16.0;

  const auto graph = build_block_graph(build_operator_sequence(spec), spec);
  const auto costs = build_cost_vectors(graph, spec, hw);
  REQUIRE(costs.block_count() == 2);

  // Attention block: 4H^2 = 64 params; work = 64 * seq 2 * half-batch 1 = 128.
  const BlockCosts& attn = costs.blocks[0];
  CHECK(attn.d_fwd[0] == doctest::Approx(1.28));
  CHECK(attn.d_fwd[1] == doctest::Approx(0.64));
  CHECK(attn.d_bwd[1] == doctest::Approx(3 * 0.64));
  // Boundary tensor: seq 2 * hidden 4 = 8 elements; K = 8 bytes at half batch.
  // AllReduce volume at N=2: 2*8*(1/2) = 8 bytes -> 0.8 s + 0.5 s latency.
  CHECK(attn.c_fwd[0] == 0.0);
  CHECK(attn.c_fwd[1] == doctest::Approx(1.3));
  CHECK(attn.c_bwd[1] == attn.c_fwd[1]);
  CHECK(attn.m_param[0] == doctest::Approx(64 * 16.0));
  CHECK(attn.m_param[1] == doctest::Approx(64 * 8.0));
  // Saved boundary tensor: 8 elements * batch 2 = 16 bytes, replicated.
  CHECK(attn.m_saved[0] == doctest::Approx(16.0));
  CHECK(attn.m_saved[1] == doctest::Approx(16.0));
  // Working set: 2 * (4 * 8 * 2) / N.
  CHECK(attn.m_runtime[0] == doctest::Approx(128.0));
  CHECK(attn.m_runtime[1] == doctest::Approx(64.0));
  // Resharding gather: half-batch boundary 8 bytes -> 4 bytes moved at N=2.
  CHECK(attn.allgather_time[1] == doctest::Approx(0.9));

  // FFN block doubles the parameter count.
  const BlockCosts& ffn = costs.blocks[1];
  CHECK(ffn.d_fwd[0] == doctest::Approx(2.56));
  CHECK(ffn.m_param[0] == doctest::Approx(128 * 16.0));
  CHECK(ffn.c_fwd[1] == attn.c_fwd[1]);  // same boundary tensor
}

TEST_CASE("doubling the degree halves compute and keeps m_param * N constant") {
  const auto spec = small_spec(2);
  const auto graph = build_block_graph(build_operator_sequence(spec), spec);
  const auto costs = build_cost_vectors(graph, spec, test::flat_profile());
  for (const BlockCosts& bc : costs.blocks) {
    for (std::size_t i = 0; i + 1 < costs.degrees.size(); ++i) {
      CHECK(bc.d_fwd[i] == doctest::Approx(2.0 * bc.d_fwd[i + 1]));
      CHECK(bc.m_param[i] * costs.degrees[i] ==
            doctest::Approx(bc.m_param[i + 1] * costs.degrees[i + 1]));
      CHECK(bc.c_fwd[i] == bc.c_bwd[i]);
      CHECK(bc.d_bwd[i] >= bc.d_fwd[i]);
    }
  }
}

TEST_CASE("backward factor drops to 2x without recomputation") {
  auto spec = small_spec(1);
  spec.recompute_enabled = false;
  const auto graph = build_block_graph(build_operator_sequence(spec), spec);
  const auto costs = build_cost_vectors(graph, spec, test::flat_profile());
  CHECK_FALSE(costs.backward_includes_recompute);
  CHECK(costs.blocks[0].d_bwd[0] == doctest::Approx(2.0 * costs.blocks[0].d_fwd[0]));
  // Without recomputation every internal activation stays resident.
  const auto spec_r = small_spec(1);
  const auto graph_r = build_block_graph(build_operator_sequence(spec_r), spec_r);
  const auto costs_r = build_cost_vectors(graph_r, spec_r, test::flat_profile());
  CHECK(costs.blocks[0].m_saved[0] > costs_r.blocks[0].m_saved[0]);
}

TEST_CASE("measured costs override the analytic table") {
  const auto spec = small_spec(1);
  const auto graph = build_block_graph(build_operator_sequence(spec), spec);
  const auto base = build_cost_vectors(graph, spec, test::flat_profile());

  SUBCASE("empty table changes nothing") {
    const auto path = write_temp_json("tmpsim_measured_empty.json", "[]");
    const auto merged = load_measured_costs(path, base);
    for (int b = 0; b < base.block_count(); ++b) {
      CHECK(merged.blocks[b].d_fwd == base.blocks[b].d_fwd);
      CHECK(merged.blocks[b].c_fwd == base.blocks[b].c_fwd);
    }
  }
  SUBCASE("a single row updates exactly one entry") {
    const auto path = write_temp_json(
        "tmpsim_measured_one.json",
        R"([{"block_index": 1, "degree": 4, "field": "d_fwd", "seconds_or_bytes": 0.125}])");
    const auto merged = load_measured_costs(path, base);
    const int slot = base.degree_index(4);
    CHECK(merged.blocks[1].d_fwd[slot] == 0.125);
    for (int b = 0; b < base.block_count(); ++b) {
      for (std::size_t i = 0; i < base.degrees.size(); ++i) {
        if (b == 1 && static_cast<int>(i) == slot) continue;
        CHECK(merged.blocks[b].d_fwd[i] == base.blocks[b].d_fwd[i]);
      }
    }
  }
  SUBCASE("full table replaces the analytic model") {
    std::string rows = "[";
    for (int b = 0; b < base.block_count(); ++b) {
      for (int degree : base.degrees) {
        for (const char* field : {"d_fwd", "d_bwd", "c_fwd", "c_bwd"}) {
          if (rows.size() > 1) rows += ",";
          rows += "{\"block_index\": " + std::to_string(b) +
                  ", \"degree\": " + std::to_string(degree) + ", \"field\": \"" + field +
                  "\", \"seconds_or_bytes\": 7.5}";
        }
      }
    }
    rows += "]";
    const auto path = write_temp_json("tmpsim_measured_full.json", rows.c_str());
    const auto merged = load_measured_costs(path, base);
    for (int b = 0; b < base.block_count(); ++b) {
      for (std::size_t i = 0; i < base.degrees.size(); ++i) {
        CHECK(merged.blocks[b].d_fwd[i] == 7.5);
        CHECK(merged.blocks[b].c_bwd[i] == 7.5);
      }
    }
  }
  SUBCASE("bad rows are rejected") {
    CHECK_THROWS_AS(
        load_measured_costs(
            write_temp_json("tmpsim_measured_bad1.json",
                            R"([{"block_index": 99, "degree": 4, "field": "d_fwd",
                                 "seconds_or_bytes": 1.0}])"),
            base),
        ConfigError);
    CHECK_THROWS_AS(
        load_measured_costs(
            write_temp_json("tmpsim_measured_bad2.json",
                            R"([{"block_index": 0, "degree": 4, "field": "d_fwd",
                                 "seconds_or_bytes": -1.0}])"),
            base),
        ConfigError);
    CHECK_THROWS_AS(
        load_measured_costs(
            write_temp_json("tmpsim_measured_bad3.json",
                            R"([{"block_index": 0, "degree": 4, "field": "nope",
                                 "seconds_or_bytes": 1.0}])"),
            base),
        ConfigError);
    CHECK_THROWS_AS(load_measured_costs("/nonexistent/measured.json", base), IoError);
  }
}
