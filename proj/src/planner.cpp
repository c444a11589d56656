// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tmpsim/errors.hpp"

namespace tmpsim {
namespace {

double checked(const std::vector<double>& v, int slot) { return v[static_cast<std::size_t>(slot)]; }

std::vector<int> strategy_slots(const CostVectors& costs, const Strategy& strategy) {
  validate_strategy(strategy, costs);
  std::vector<int> slots;
  slots.reserve(strategy.degrees.size());
  for (int degree : strategy.degrees) slots.push_back(costs.degree_index(degree));
  return slots;
}

}  // namespace

double node_cost(const CostVectors& costs, const Strategy& strategy, Pass pass) {
  if (pass == Pass::Recompute) {
    throw ConfigError("node_cost: pass must be Forward or Backward");
  }
  const std::vector<int> slots = strategy_slots(costs, strategy);
  const int k = costs.block_count() - 1;
  if (k < 0) return 0.0;
  const bool fwd = pass == Pass::Forward;
  // Chain position -> block: the backward pass walks the chain in reverse.
  auto blk = [&](int pos) { return fwd ? pos : k - pos; };
  auto d = [&](int pos) {
    const BlockCosts& bc = costs.blocks[blk(pos)];
    return checked(fwd ? bc.d_fwd : bc.d_bwd, slots[blk(pos)]);
  };
  auto c = [&](int pos) {
    const BlockCosts& bc = costs.blocks[blk(pos)];
    return checked(fwd ? bc.c_fwd : bc.c_bwd, slots[blk(pos)]);
  };
  // Warm-up compute of the first sub-batch, then each sub-batch's compute
  // overlaps the other's in-flight communication, then the trailing sync.
  double total = d(0);
  for (int pos = 1; pos <= k; ++pos) total += std::max(d(pos), c(pos - 1));
  for (int pos = 0; pos <= k; ++pos) total += std::max(d(pos), c(pos));
  total += c(k);
  return total;
}

EdgeCostMatrix edge_cost_matrix(const CostVectors& costs, int v, int u,
                                const HardwareProfile& profile) {
  if (u != v + 1 || v < 0 || u >= costs.block_count()) {
    throw ConfigError("edge_cost_matrix: blocks must be adjacent");
  }
  profile.validate();
  const int p = static_cast<int>(costs.degrees.size());
  EdgeCostMatrix m;
  m.p = p;
  m.entries.assign(static_cast<std::size_t>(p) * p, 0.0);
  const BlockCosts& bv = costs.blocks[v];
  const BlockCosts& bu = costs.blocks[u];
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      const int group = std::max(costs.degrees[i], costs.degrees[j]);
      const double gather = bv.allgather_time[costs.degree_index(group)];
      if (i < j) {
        m.at(i, j) = gather + std::min(bv.c_fwd[i], bu.d_fwd[j]);
      } else {
        m.at(i, j) = gather + std::min(bv.c_bwd[i], bu.d_bwd[j]);
      }
    }
  }
  return m;
}

std::vector<EdgeCostMatrix> build_edge_costs(const CostVectors& costs,
                                             const HardwareProfile& profile) {
  std::vector<EdgeCostMatrix> edges;
  for (int v = 0; v + 1 < costs.block_count(); ++v) {
    edges.push_back(edge_cost_matrix(costs, v, v + 1, profile));
  }
  return edges;
}

double objective(const CostVectors& costs, const std::vector<EdgeCostMatrix>& edges,
                 const Strategy& strategy) {
  if (static_cast<int>(edges.size()) != std::max(0, costs.block_count() - 1)) {
    throw ConfigError("objective: edge matrix count does not match block count");
  }
  const std::vector<int> slots = strategy_slots(costs, strategy);
  double total = node_cost(costs, strategy, Pass::Forward) +
                 node_cost(costs, strategy, Pass::Backward);
  for (int v = 0; v + 1 < costs.block_count(); ++v) {
    total += edges[v].at(slots[v], slots[v + 1]);
  }
  return total;
}

double memory_usage(const CostVectors& costs, const Strategy& strategy) {
  const std::vector<int> slots = strategy_slots(costs, strategy);
  const int n = costs.block_count();
  if (n == 0) return 0.0;
  double total = 0.0;
  for (int v = 0; v < n; ++v) {
    total += checked(costs.blocks[v].m_param, slots[v]);
    total += checked(costs.blocks[v].m_saved, slots[v]);
  }
  // Worst backward working set across blocks, at the last node's degree.
  double runtime = 0.0;
  for (int v = 0; v < n; ++v) {
    runtime = std::max(runtime, checked(costs.blocks[v].m_runtime, slots[n - 1]));
  }
  return total + runtime;
}

namespace {

struct DpPoint {
  double mem = 0.0;
  double obj = 0.0;
  int prev_slot = -1;
  int prev_point = -1;
};

struct DpTerms {
  const CostVectors& costs;
  const std::vector<EdgeCostMatrix>& edges;

  double self(int v, int j) const {
    const BlockCosts& bc = costs.blocks[v];
    return std::max(bc.d_fwd[j], bc.c_fwd[j]) + std::max(bc.d_bwd[j], bc.c_bwd[j]);
  }
  double first(int j) const {
    const BlockCosts& bc = costs.blocks.front();
    return bc.d_fwd[j] + bc.c_bwd[j];
  }
  double last(int j) const {
    const BlockCosts& bc = costs.blocks.back();
    return bc.c_fwd[j] + bc.d_bwd[j];
  }
  double trans(int v, int a, int b) const {
    // v-1 -> v with slots (a, b): the forward overlap pair, the backward
    // overlap pair, and the resharding edge.
    const BlockCosts& prev = costs.blocks[v - 1];
    const BlockCosts& cur = costs.blocks[v];
    return std::max(cur.d_fwd[b], prev.c_fwd[a]) + std::max(prev.d_bwd[a], cur.c_bwd[b]) +
           edges[v - 1].at(a, b);
  }
  double mem(int v, int j) const {
    return costs.blocks[v].m_param[j] + costs.blocks[v].m_saved[j];
  }
};

// Keep the frontier Pareto-minimal in (mem, obj). A point is discarded only
// when another one is no heavier and better by more than rounding noise, so
// a true optimum always survives to the final re-scoring.
void prune(std::vector<DpPoint>* points) {
  std::stable_sort(points->begin(), points->end(), [](const DpPoint& a, const DpPoint& b) {
    if (a.mem != b.mem) return a.mem < b.mem;
    return a.obj < b.obj;
  });
  std::vector<DpPoint> kept;
  double best_obj = std::numeric_limits<double>::infinity();
  for (const DpPoint& pt : *points) {
    const double eps = 1e-12 * (1.0 + std::abs(pt.obj));
    if (pt.obj < best_obj + eps) {
      kept.push_back(pt);
      best_obj = std::min(best_obj, pt.obj);
    }
  }
  *points = std::move(kept);
}

void coarsen(std::vector<DpPoint>* points, double granularity, std::size_t cap) {
  if (points->size() <= cap || granularity <= 0.0) return;
  // One representative per memory bucket: the cheapest, carrying its exact
  // memory so feasibility never degrades.
  std::vector<DpPoint> kept;
  std::int64_t bucket = std::numeric_limits<std::int64_t>::min();
  std::size_t best = 0;
  bool open = false;
  auto flush = [&]() {
    if (open) kept.push_back((*points)[best]);
    open = false;
  };
  for (std::size_t i = 0; i < points->size(); ++i) {
    const std::int64_t b = static_cast<std::int64_t>((*points)[i].mem / granularity);
    if (!open || b != bucket) {
      flush();
      bucket = b;
      best = i;
      open = true;
    } else if ((*points)[i].obj < (*points)[best].obj) {
      best = i;
    }
  }
  flush();
  *points = std::move(kept);
}

}  // namespace

PlanResult solve(const ModelGraph& graph, const CostVectors& costs,
                 const std::vector<EdgeCostMatrix>& edges, const HardwareProfile& profile,
                 double budget_bytes, SolveOptions options) {
  const auto t0 = std::chrono::steady_clock::now();
  profile.validate();
  const int n = costs.block_count();
  if (graph.block_count() != n) {
    throw ConfigError("solve: graph and cost table disagree on block count");
  }
  PlanResult result;
  if (n == 0) {
    result.predicted_time = 0.0;
    result.predicted_memory = 0.0;
    return result;
  }
  const int p = static_cast<int>(costs.degrees.size());
  DpTerms terms{costs, edges};

  std::vector<std::vector<std::vector<DpPoint>>> frontier(
      static_cast<std::size_t>(n), std::vector<std::vector<DpPoint>>(p));
  for (int j = 0; j < p; ++j) {
    frontier[0][j].push_back({terms.mem(0, j), terms.first(j) + terms.self(0, j), -1, -1});
  }
  for (int v = 1; v < n; ++v) {
    for (int b = 0; b < p; ++b) {
      auto& points = frontier[v][b];
      for (int a = 0; a < p; ++a) {
        const double step = terms.trans(v, a, b) + terms.self(v, b);
        const auto& prev = frontier[v - 1][a];
        for (int pi = 0; pi < static_cast<int>(prev.size()); ++pi) {
          points.push_back(
              {prev[pi].mem + terms.mem(v, b), prev[pi].obj + step, a, pi});
        }
      }
      prune(&points);
      coarsen(&points, options.mem_granularity, options.frontier_cap);
    }
  }

  // Collect finishing points within rounding distance of the DP optimum and
  // re-score their strategies with the exact objective.
  double dp_best = std::numeric_limits<double>::infinity();
  std::vector<double> runtime_max(p, 0.0);
  for (int j = 0; j < p; ++j) {
    for (int v = 0; v < n; ++v) {
      runtime_max[j] = std::max(runtime_max[j], costs.blocks[v].m_runtime[j]);
    }
  }
  auto final_mem = [&](const DpPoint& pt, int j) { return pt.mem + runtime_max[j]; };
  auto final_obj = [&](const DpPoint& pt, int j) { return pt.obj + terms.last(j); };
  bool any_feasible = false;
  for (int j = 0; j < p; ++j) {
    for (const DpPoint& pt : frontier[n - 1][j]) {
      if (final_mem(pt, j) >= budget_bytes) continue;
      any_feasible = true;
      dp_best = std::min(dp_best, final_obj(pt, j));
    }
  }
  if (!any_feasible) {
    throw InfeasibleError("no strategy fits the memory budget of " +
                          std::to_string(budget_bytes) + " bytes");
  }

  Strategy best_strategy;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_mem = 0.0;
  const double eps_sel = 1e-9 * (1.0 + std::abs(dp_best));
  for (int j = 0; j < p; ++j) {
    for (const DpPoint& pt : frontier[n - 1][j]) {
      if (final_mem(pt, j) >= budget_bytes) continue;
      if (final_obj(pt, j) > dp_best + eps_sel) continue;
      // Reconstruct and re-score exactly.
      Strategy s;
      s.degrees.assign(static_cast<std::size_t>(n), 0);
      int slot = j;
      const DpPoint* cur = &pt;
      for (int v = n - 1; v >= 0; --v) {
        s.degrees[static_cast<std::size_t>(v)] = costs.degrees[static_cast<std::size_t>(slot)];
        if (v > 0) {
          const int prev_slot = cur->prev_slot;
          cur = &frontier[v - 1][prev_slot][static_cast<std::size_t>(cur->prev_point)];
          slot = prev_slot;
        }
      }
      const double mem = memory_usage(costs, s);
      if (mem >= budget_bytes) continue;
      const double obj = objective(costs, edges, s);
      if (obj < best_obj || (obj == best_obj && s.degrees < best_strategy.degrees)) {
        best_obj = obj;
        best_mem = mem;
        best_strategy = std::move(s);
      }
    }
  }
  if (!std::isfinite(best_obj)) {
    throw InfeasibleError("no strategy fits the memory budget of " +
                          std::to_string(budget_bytes) + " bytes");
  }
  result.strategy = std::move(best_strategy);
  result.predicted_time = best_obj;
  result.predicted_memory = best_mem;
  result.solve_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

PlanResult brute_force(const ModelGraph& graph, const CostVectors& costs,
                       const std::vector<EdgeCostMatrix>& edges,
                       const HardwareProfile& profile, double budget_bytes,
                       SolveOptions options) {
  const auto t0 = std::chrono::steady_clock::now();
  profile.validate();
  const int n = costs.block_count();
  if (graph.block_count() != n) {
    throw ConfigError("brute_force: graph and cost table disagree on block count");
  }
  PlanResult result;
  if (n == 0) return result;
  const int p = static_cast<int>(costs.degrees.size());
  double combos = 1.0;
  for (int v = 0; v < n; ++v) {
    combos *= p;
    if (combos > static_cast<double>(options.brute_force_cap)) {
      throw ConfigError("brute_force: strategy space exceeds cap of " +
                        std::to_string(options.brute_force_cap));
    }
  }

  std::vector<int> slots(static_cast<std::size_t>(n), 0);
  Strategy best;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_mem = 0.0;
  Strategy s;
  s.degrees.assign(static_cast<std::size_t>(n), 0);
  bool done = false;
  while (!done) {
    for (int v = 0; v < n; ++v) {
      s.degrees[static_cast<std::size_t>(v)] =
          costs.degrees[static_cast<std::size_t>(slots[static_cast<std::size_t>(v)])];
    }
    ++result.evaluated;
    const double mem = memory_usage(costs, s);
    if (mem < budget_bytes) {
      const double obj = objective(costs, edges, s);
      if (obj < best_obj) {  // first hit wins ties: enumeration is lexicographic
        best_obj = obj;
        best_mem = mem;
        best = s;
      }
    }
    // Odometer, last block fastest, so vectors come out in ascending
    // lexicographic order.
    done = true;
    for (int v = n - 1; v >= 0; --v) {
      if (++slots[static_cast<std::size_t>(v)] < p) {
        done = false;
        break;
      }
      slots[static_cast<std::size_t>(v)] = 0;
    }
  }
  if (!std::isfinite(best_obj)) {
    throw InfeasibleError("no strategy fits the memory budget of " +
                          std::to_string(budget_bytes) + " bytes");
  }
  result.strategy = std::move(best);
  result.predicted_time = best_obj;
  result.predicted_memory = best_mem;
  result.solve_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ConfigError("spearman: inputs must be nonempty and the same length");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) {
    throw ConfigError("spearman: degenerate ranking (all values equal)");
  }
  return cov / std::sqrt(va * vb);
}

double rank_correlation(const CostVectors& costs, const std::vector<EdgeCostMatrix>& edges,
                        const std::vector<Strategy>& strategies,
                        const std::vector<double>& measured_times) {
  if (strategies.size() < 3) {
    throw ConfigError("rank_correlation: need at least 3 strategies");
  }
  if (strategies.size() != measured_times.size()) {
    throw ConfigError("rank_correlation: strategy and measurement counts differ");
  }
  std::vector<double> predicted;
  predicted.reserve(strategies.size());
  for (const Strategy& s : strategies) predicted.push_back(objective(costs, edges, s));
  return spearman(predicted, measured_times);
}

std::string run_length_notation(const std::vector<int>& degrees) {
  if (degrees.empty()) return "[]";
  std::string out = "[";
  std::size_t i = 0;
  bool first = true;
  while (i < degrees.size()) {
    std::size_t j = i;
    while (j + 1 < degrees.size() && degrees[j + 1] == degrees[i]) ++j;
    if (!first) out += " + ";
    out += "[" + std::to_string(degrees[i]) + "] * " + std::to_string(j - i + 1);
    first = false;
    i = j + 1;
  }
  out += "]";
  return out;
}

}  // namespace tmpsim
