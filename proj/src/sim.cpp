// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "tmpsim/errors.hpp"

namespace tmpsim {
namespace {

struct SimOp {
  int trace_id = 0;
  Stream stream = Stream::Compute;
  bool blocking = false;
  double duration = 0.0;
  std::vector<int> deps;  // indices into the merged op array
  // Bookkeeping for memory accounting.
  OpKind kind = OpKind::ForwardCompute;
  Pass pass = Pass::Forward;
  int block = -1;
  int sub_batch = 0;
};

struct MergedPlan {
  std::vector<SimOp> ops;
  std::vector<int> plan_to_merged;  // plan id -> merged index
};

int count_block_compute_ops(const SchedulePlan& plan, int block) {
  int count = 0;
  for (const ScheduledOp& op : plan.forward_ops) {
    if (op.block == block && op.kind == OpKind::ForwardCompute && op.sub_batch == 0) ++count;
  }
  return count > 0 ? count : 1;
}

MergedPlan merge_with_resharding(const SchedulePlan& plan, const CostVectors& costs,
                                 const Strategy& strategy) {
  const int n = plan.total_ops();
  const double scale = plan.split_batch ? 1.0 : 2.0;

  std::vector<int> compute_ops_per_block(costs.block_count(), 1);
  for (int b = 0; b < costs.block_count(); ++b) {
    compute_ops_per_block[b] = count_block_compute_ops(plan, b);
  }

  auto duration_of = [&](const ScheduledOp& op) -> double {
    const int slot = costs.degree_index(strategy.degrees[op.block]);
    const BlockCosts& bc = costs.blocks[op.block];
    switch (op.kind) {
      case OpKind::ForwardCompute:
      case OpKind::RecomputeCompute:
        return scale * bc.d_fwd[slot] / compute_ops_per_block[op.block];
      case OpKind::BackwardCompute: {
        double d = bc.d_bwd[slot];
        if (plan.has_recompute && costs.backward_includes_recompute) {
          d = std::max(0.0, d - bc.d_fwd[slot]);
        }
        return scale * d / compute_ops_per_block[op.block];
      }
      case OpKind::AllReduce:
        return scale * (op.pass == Pass::Backward ? bc.c_bwd[slot] : bc.c_fwd[slot]);
      case OpKind::AllGather:
        return scale * bc.c_fwd[slot];
    }
    return 0.0;
  };

  // Anchor ids for resharding insertion.
  const int blocks = costs.block_count();
  std::vector<int> last_fwd_comm(blocks, -1);
  std::vector<int> last_bwd_comm(blocks, -1);
  std::vector<int> last_bwd_compute(blocks, -1);
  std::vector<std::array<int, 2>> first_fwd_compute(blocks, {-1, -1});
  std::vector<std::array<int, 2>> first_bwd_compute(blocks, {-1, -1});
  for (int id = 0; id < n; ++id) {
    const ScheduledOp& op = plan.op(id);
    if (op.pass == Pass::Forward) {
      if (is_comm(op.kind)) last_fwd_comm[op.block] = id;
      if (op.kind == OpKind::ForwardCompute && first_fwd_compute[op.block][op.sub_batch] < 0) {
        first_fwd_compute[op.block][op.sub_batch] = id;
      }
    } else if (op.pass == Pass::Backward) {
      if (is_comm(op.kind)) last_bwd_comm[op.block] = id;
      if (op.kind == OpKind::BackwardCompute) {
        last_bwd_compute[op.block] = id;
        if (first_bwd_compute[op.block][op.sub_batch] < 0) {
          first_bwd_compute[op.block][op.sub_batch] = id;
        }
      }
    }
  }

  // Resharding between adjacent blocks with different degrees: an exclusive
  // AllGather after the upstream block's forward tail when the degree grows,
  // and after the downstream block's backward tail when it shrinks. It gates
  // both sub-batches of the consuming side.
  struct Reshard {
    int after_plan_id;           // inserted right after this plan op
    std::array<int, 2> gates;    // these plan ops depend on the AllGather
    double duration;
  };
  std::vector<Reshard> reshards;
  for (int v = 0; v + 1 < blocks; ++v) {
    const int u = v + 1;
    const int dv = strategy.degrees[v];
    const int du = strategy.degrees[u];
    if (dv == du) continue;
    const int group = std::max(dv, du);
    const double ag = costs.blocks[v].allgather_time[costs.degree_index(group)];
    if (dv < du) {
      if (last_fwd_comm[v] >= 0) {
        reshards.push_back({last_fwd_comm[v], first_fwd_compute[u], ag});
      }
    } else {
      const int anchor = last_bwd_comm[u] >= 0 ? last_bwd_comm[u] : last_bwd_compute[u];
      if (anchor >= 0) {
        reshards.push_back({anchor, first_bwd_compute[v], ag});
      }
    }
  }
  std::map<int, std::vector<int>> reshard_after;  // plan id -> reshard indices
  std::map<int, std::vector<int>> extra_deps;     // plan id -> reshard indices gating it
  for (int r = 0; r < static_cast<int>(reshards.size()); ++r) {
    reshard_after[reshards[r].after_plan_id].push_back(r);
    for (int gate : reshards[r].gates) {
      if (gate >= 0) extra_deps[gate].push_back(r);
    }
  }

  MergedPlan merged;
  merged.plan_to_merged.assign(n, -1);
  std::vector<int> reshard_merged_idx(reshards.size(), -1);
  for (int id = 0; id < n; ++id) {
    const ScheduledOp& op = plan.op(id);
    SimOp sop;
    sop.trace_id = id;
    sop.stream = op.stream;
    sop.blocking = op.blocking;
    sop.duration = duration_of(op);
    sop.kind = op.kind;
    sop.pass = op.pass;
    sop.block = op.block;
    sop.sub_batch = op.sub_batch;
    for (int dep : op.deps) sop.deps.push_back(merged.plan_to_merged[dep]);
    if (auto it = extra_deps.find(id); it != extra_deps.end()) {
      for (int r : it->second) sop.deps.push_back(reshard_merged_idx[r]);
    }
    merged.plan_to_merged[id] = static_cast<int>(merged.ops.size());
    merged.ops.push_back(std::move(sop));
    if (auto it = reshard_after.find(id); it != reshard_after.end()) {
      for (int r : it->second) {
        SimOp ag;
        ag.trace_id = n + r;
        ag.stream = Stream::Comm;
        ag.blocking = true;
        ag.duration = reshards[r].duration;
        ag.kind = OpKind::AllGather;
        ag.pass = plan.op(id).pass;
        ag.block = -1;
        ag.deps.push_back(merged.plan_to_merged[id]);
        reshard_merged_idx[r] = static_cast<int>(merged.ops.size());
        merged.ops.push_back(std::move(ag));
      }
    }
  }
  return merged;
}

// Measures the part of the comm intervals not covered by compute intervals.
double exposed_comm_time(std::vector<std::pair<double, double>> compute,
                         std::vector<std::pair<double, double>> comm) {
  std::sort(compute.begin(), compute.end());
  std::sort(comm.begin(), comm.end());
  double exposed = 0.0;
  std::size_t ci = 0;
  for (const auto& [start, end] : comm) {
    double t = start;
    while (t < end) {
      while (ci < compute.size() && compute[ci].second <= t) ++ci;
      if (ci == compute.size() || compute[ci].first >= end) {
        exposed += end - t;
        break;
      }
      if (compute[ci].first > t) {
        exposed += std::min(end, compute[ci].first) - t;
      }
      t = std::max(t, compute[ci].second);
    }
  }
  return exposed;
}

}  // namespace

SimResult simulate(const SchedulePlan& plan, const CostVectors& costs,
                   const Strategy& strategy, SimOptions options) {
  const auto violations = validate_plan(plan);
  if (!violations.empty()) {
    throw ConfigError("simulate: invalid plan: " + violations.front().code + ": " +
                      violations.front().detail);
  }
  validate_strategy(strategy, costs);
  for (int id = 0; id < plan.total_ops(); ++id) {
    if (plan.op(id).block >= costs.block_count()) {
      throw ConfigError("simulate: plan references block " +
                        std::to_string(plan.op(id).block) + " with no cost entry");
    }
  }

  SimResult result;
  if (plan.total_ops() == 0) return result;

  MergedPlan merged = merge_with_resharding(plan, costs, strategy);
  const int n = static_cast<int>(merged.ops.size());

  std::vector<double> start(n, -1.0), finish(n, -1.0);
  std::vector<char> started(n, 0);
  std::array<double, 2> stream_busy_until = {0.0, 0.0};
  std::array<std::vector<int>, 2> queue;  // merged indices per stream, plan order
  for (int i = 0; i < n; ++i) {
    queue[merged.ops[i].stream == Stream::Comm ? 1 : 0].push_back(i);
  }
  std::array<std::size_t, 2> cursor = {0, 0};  // ops before cursor all started

  int remaining = n;
  double now = 0.0;
  auto deps_done = [&](int i, double t) {
    for (int dep : merged.ops[i].deps) {
      if (finish[dep] < 0.0 || finish[dep] > t) return false;
    }
    return true;
  };

  while (remaining > 0) {
    bool dispatched = true;
    while (dispatched) {
      dispatched = false;
      for (int s = 0; s < 2; ++s) {
        if (stream_busy_until[s] > now) continue;
        auto& q = queue[s];
        while (cursor[s] < q.size() && started[q[cursor[s]]]) ++cursor[s];
        for (std::size_t pos = cursor[s]; pos < q.size(); ++pos) {
          const int i = q[pos];
          if (started[i]) continue;
          if (!deps_done(i, now)) continue;
          const SimOp& op = merged.ops[i];
          if (op.blocking && stream_busy_until[1 - s] > now) {
            // An exclusive op is next in line; the stream stalls for it.
            break;
          }
          double duration = op.duration;
          if (op.stream == Stream::Comm && !op.blocking &&
              options.overlap_slowdown != 1.0 && stream_busy_until[0] > now) {
            duration *= options.overlap_slowdown;
          }
          started[i] = 1;
          start[i] = now;
          finish[i] = now + duration;
          stream_busy_until[s] = finish[i];
          if (op.blocking) stream_busy_until[1 - s] = finish[i];
          --remaining;
          dispatched = true;
          break;
        }
      }
    }
    if (remaining == 0) break;
    // Advance to the next completion that can unblock something.
    double next = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 2; ++s) {
      if (stream_busy_until[s] > now) next = std::min(next, stream_busy_until[s]);
    }
    for (int i = 0; i < n; ++i) {
      if (started[i] && finish[i] > now) next = std::min(next, finish[i]);
    }
    if (!std::isfinite(next)) {
      throw ConfigError("simulate: schedule deadlocked; plan dependencies are unsatisfiable");
    }
    now = next;
  }

  double makespan = 0.0;
  double compute_busy = 0.0;
  std::vector<std::pair<double, double>> compute_iv, comm_iv;
  result.trace.reserve(n);
  for (int i = 0; i < n; ++i) {
    const SimOp& op = merged.ops[i];
    result.trace.push_back({op.trace_id, op.stream, start[i], finish[i]});
    makespan = std::max(makespan, finish[i]);
    if (op.stream == Stream::Compute) {
      compute_busy += finish[i] - start[i];
      compute_iv.emplace_back(start[i], finish[i]);
    } else {
      comm_iv.emplace_back(start[i], finish[i]);
    }
  }
  result.makespan = makespan;
  result.compute_busy_fraction = makespan > 0.0 ? compute_busy / makespan : 0.0;
  result.comm_exposed = exposed_comm_time(compute_iv, comm_iv);

  // Memory: optimizer-held parameter state is resident throughout; saved
  // tensors live from the start of their forward unit to the end of the
  // matching backward; backward working sets are transient.
  double static_mem = 0.0;
  for (int b = 0; b < costs.block_count(); ++b) {
    static_mem += costs.blocks[b].m_param[costs.degree_index(strategy.degrees[b])];
  }
  const double share = plan.split_batch ? 0.5 : 1.0;
  std::vector<std::pair<double, double>> deltas;  // (time, +-bytes)
  std::map<std::pair<int, int>, double> last_bwd_finish;  // (block, sb)
  for (int id = 0; id < plan.total_ops(); ++id) {
    const ScheduledOp& op = plan.op(id);
    const int m = merged.plan_to_merged[id];
    const int slot = costs.degree_index(strategy.degrees[op.block]);
    if (op.kind == OpKind::BackwardCompute) {
      auto key = std::make_pair(op.block, op.sub_batch);
      last_bwd_finish[key] = std::max(last_bwd_finish[key], finish[m]);
    }
    if (op.kind == OpKind::BackwardCompute || op.kind == OpKind::RecomputeCompute) {
      const double r = share * costs.blocks[op.block].m_runtime[slot];
      deltas.emplace_back(start[m], r);
      deltas.emplace_back(finish[m], -r);
    }
  }
  auto add_saved = [&](int block, int sb, double alloc_at, const std::vector<int>& blocks) {
    const int slot = costs.degree_index(strategy.degrees[block]);
    const double bytes = share * costs.blocks[block].m_saved[slot];
    double free_at = makespan;
    double latest = -1.0;
    for (int blk : blocks) {
      auto it = last_bwd_finish.find({blk, sb});
      if (it != last_bwd_finish.end()) latest = std::max(latest, it->second);
    }
    if (latest >= 0.0) free_at = latest;
    deltas.emplace_back(alloc_at, bytes);
    deltas.emplace_back(free_at, -bytes);
  };
  if (!plan.saved_sequences.empty()) {
    for (const auto& seq : plan.saved_sequences) {
      if (seq.empty()) continue;
      const ScheduledOp& first = plan.op(seq.front());
      std::vector<int> blocks;
      for (int id : seq) blocks.push_back(plan.op(id).block);
      add_saved(first.block, first.sub_batch, start[merged.plan_to_merged[seq.front()]], blocks);
    }
  } else {
    // No recomputation: every block keeps its activations until backward.
    std::map<std::pair<int, int>, double> first_fwd_start;
    for (int id = 0; id < plan.total_ops(); ++id) {
      const ScheduledOp& op = plan.op(id);
      if (op.kind != OpKind::ForwardCompute) continue;
      auto key = std::make_pair(op.block, op.sub_batch);
      double t = start[merged.plan_to_merged[id]];
      auto [it, inserted] = first_fwd_start.emplace(key, t);
      if (!inserted) it->second = std::min(it->second, t);
    }
    for (const auto& [key, t] : first_fwd_start) {
      add_saved(key.first, key.second, t, {key.first});
    }
  }
  std::sort(deltas.begin(), deltas.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first < b.first : a.second < b.second;
            });
  double mem = static_mem, peak = static_mem;
  for (const auto& [t, delta] : deltas) {
    mem += delta;
    peak = std::max(peak, mem);
  }
  result.peak_memory = peak;
  return result;
}

Breakdown breakdown(const SimResult& result) {
  if (result.makespan <= 0.0) {
    throw ConfigError("breakdown: zero makespan");
  }
  Breakdown b;
  b.comm_fraction = result.comm_exposed / result.makespan;
  b.compute_fraction = result.compute_busy_fraction;
  b.idle_fraction = std::max(0.0, 1.0 - b.comm_fraction - b.compute_fraction);
  return b;
}

}  // namespace tmpsim
