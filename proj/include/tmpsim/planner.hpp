// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tmpsim/costs.hpp"
#include "tmpsim/model.hpp"
#include "tmpsim/schedule.hpp"

namespace tmpsim {

/// Resharding penalty between adjacent blocks, indexed by the degree slots
/// of the upstream and downstream block. Zero on the diagonal.
struct EdgeCostMatrix {
  int p = 0;
  std::vector<double> entries;  // row-major p x p

  double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * p + j]; }
  double& at(int i, int j) { return entries[static_cast<std::size_t>(i) * p + j]; }
};

struct PlanResult {
  Strategy strategy;
  double predicted_time = 0.0;    // seconds
  double predicted_memory = 0.0;  // bytes
  double solve_time_ms = 0.0;
  std::uint64_t evaluated = 0;    // strategies scored (brute force only)
};

struct SolveOptions {
  double mem_granularity = 1 << 20;  // bytes; engages only past frontier_cap
  std::size_t frontier_cap = 20000;
  std::uint64_t brute_force_cap = 1000000;
};

/// Pipelined two-sub-batch execution time of one pass over the block chain.
/// For the backward pass the chain is traversed last block first.
double node_cost(const CostVectors& costs, const Strategy& strategy, Pass pass);

/// Resharding cost of edge (v, v+1): the AllGather plus the adjacent overlap
/// it forfeits. Gathers happen in forward when the degree grows and in
/// backward when it shrinks.
EdgeCostMatrix edge_cost_matrix(const CostVectors& costs, int v, int u,
                                const HardwareProfile& profile);
std::vector<EdgeCostMatrix> build_edge_costs(const CostVectors& costs,
                                             const HardwareProfile& profile);

/// Forward node cost + backward node cost + resharding edge costs.
double objective(const CostVectors& costs, const std::vector<EdgeCostMatrix>& edges,
                 const Strategy& strategy);

/// Parameter state and saved tensors of every block plus the worst
/// backward working set, evaluated at the last block's degree.
double memory_usage(const CostVectors& costs, const Strategy& strategy);

/// Exact chain DP over (block, degree) with a memory/objective frontier per
/// state; the frontier is coarsened to mem_granularity buckets only when it
/// outgrows frontier_cap. Ties resolve to the lexicographically smallest
/// degree vector. Throws InfeasibleError when no strategy fits the budget.
PlanResult solve(const ModelGraph& graph, const CostVectors& costs,
                 const std::vector<EdgeCostMatrix>& edges, const HardwareProfile& profile,
                 double budget_bytes, SolveOptions options = {});

/// Enumerates all strategies (up to brute_force_cap); the optimality oracle.
PlanResult brute_force(const ModelGraph& graph, const CostVectors& costs,
                       const std::vector<EdgeCostMatrix>& edges,
                       const HardwareProfile& profile, double budget_bytes,
                       SolveOptions options = {});

/// Spearman rank correlation between cost-model predictions for the given
/// strategies and externally obtained (e.g. simulated) times.
double rank_correlation(const CostVectors& costs, const std::vector<EdgeCostMatrix>& edges,
                        const std::vector<Strategy>& strategies,
                        const std::vector<double>& measured_times);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// "[[2] * 8 + [4] * 16]"-style rendering of a degree vector.
std::string run_length_notation(const std::vector<int>& degrees);

}  // namespace tmpsim
