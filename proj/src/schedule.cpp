// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/schedule.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <set>
#include <utility>

#include "tmpsim/errors.hpp"

namespace tmpsim {

const char* to_string(ScheduleVariant v) {
  switch (v) {
    case ScheduleVariant::Default: return "Default";
    case ScheduleVariant::IntraPass: return "IntraPass";
    case ScheduleVariant::CrossPass: return "CrossPass";
    case ScheduleVariant::Oases: return "Oases";
  }
  return "?";
}

const char* to_string(Stream s) { return s == Stream::Compute ? "Compute" : "Comm"; }

const char* to_string(Pass p) {
  switch (p) {
    case Pass::Forward: return "Forward";
    case Pass::Recompute: return "Recompute";
    case Pass::Backward: return "Backward";
  }
  return "?";
}

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::ForwardCompute: return "ForwardCompute";
    case OpKind::RecomputeCompute: return "RecomputeCompute";
    case OpKind::BackwardCompute: return "BackwardCompute";
    case OpKind::AllReduce: return "AllReduce";
    case OpKind::AllGather: return "AllGather";
  }
  return "?";
}

ScheduleVariant variant_from_string(const std::string& name) {
  if (name == "Default") return ScheduleVariant::Default;
  if (name == "IntraPass") return ScheduleVariant::IntraPass;
  if (name == "CrossPass") return ScheduleVariant::CrossPass;
  if (name == "Oases") return ScheduleVariant::Oases;
  throw ConfigError("unknown schedule variant '" + name + "'");
}

const ScheduledOp& SchedulePlan::op(int id) const {
  const int f = static_cast<int>(forward_ops.size());
  if (id < 0 || id >= total_ops()) throw ConfigError("plan op id out of range");
  return id < f ? forward_ops[id] : backward_ops[id - f];
}

namespace {

// Inclusive [first, last] block ranges that get replayed as one unit. Blocks
// of the same model layer form a unit, which for the transformer builder is
// the attention/FFN pair.
std::vector<std::pair<int, int>> recompute_units(const ModelGraph& graph) {
  std::vector<std::pair<int, int>> units;
  for (int b = 0; b < graph.block_count(); ++b) {
    const int layer = graph.blocks[b].compute_ops.front().layer;
    if (!units.empty() &&
        graph.blocks[units.back().second].compute_ops.front().layer == layer) {
      units.back().second = b;
    } else {
      units.emplace_back(b, b);
    }
  }
  return units;
}

struct WeaveItem {
  bool comm = false;
  OpKind kind = OpKind::ForwardCompute;
  Pass pass = Pass::Forward;
  int block = 0;
  int base_id = 0;
};

class PlanBuilder {
 public:
  PlanBuilder(const ModelGraph& graph, ScheduleVariant variant, bool split)
      : graph_(graph) {
    plan.variant = variant;
    plan.split_batch = split;
    plan.has_recompute = graph.recompute_enabled;
    const int n = graph.block_count();
    fwd_comm_.assign(n, {-1, -1});
    fwd_last_compute_.assign(n, {-1, -1});
    fwd_compute_ids_.assign(n, {});
    rec_comm_.assign(n, {-1, -1});
    last_rec_.assign(n, {-1, -1});
    bwd_comm_.assign(n, {-1, -1});
    last_bwd_.assign(n, {-1, -1});
  }

  SchedulePlan plan;

  int emit(const WeaveItem& item, int sb, std::vector<int> deps) {
    ScheduledOp op;
    op.id = next_id_++;
    op.base_id = item.base_id;
    op.kind = item.kind;
    op.pass = item.pass;
    op.stream = item.comm ? Stream::Comm : Stream::Compute;
    op.blocking = item.kind == OpKind::AllGather;
    op.block = item.block;
    op.sub_batch = sb;
    if (in_backward_) {
      // The loss reduces over the whole batch: nothing in backward starts
      // before the forward phase has fully drained.
      deps.push_back(join_dep_);
      deps.push_back(join_dep2_);
    }
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    deps.erase(std::remove(deps.begin(), deps.end(), -1), deps.end());
    op.deps = std::move(deps);
    auto& dest = in_backward_ ? plan.backward_ops : plan.forward_ops;
    dest.push_back(op);
    const int id = op.id;
    if (item.comm) {
      comm_started_.push_back(id);
      switch (item.pass) {
        case Pass::Forward: fwd_comm_[item.block][sb] = id; break;
        case Pass::Recompute: rec_comm_[item.block][sb] = id; break;
        case Pass::Backward: bwd_comm_[item.block][sb] = id; break;
      }
    } else {
      switch (item.pass) {
        case Pass::Forward:
          fwd_last_compute_[item.block][sb] = id;
          fwd_compute_ids_[item.block][sb].push_back(id);
          break;
        case Pass::Recompute: last_rec_[item.block][sb] = id; break;
        case Pass::Backward: last_bwd_[item.block][sb] = id; break;
      }
    }
    return id;
  }

  // Two-sub-batch pipeline: run one sub-batch's computes until its next
  // communication, start that communication and switch to the other
  // sub-batch. Compute items are additionally gated on the completion of the
  // second-most-recent communication, which is the point the host synced
  // before issuing them.
  void weave(const std::vector<WeaveItem>& program, int start_sb,
             const std::function<void(const WeaveItem&, int, std::vector<int>&)>& data_deps) {
    std::array<std::size_t, 2> ptr = {0, 0};
    int x = start_sb;
    while (ptr[0] < program.size() || ptr[1] < program.size()) {
      if (ptr[static_cast<std::size_t>(x)] >= program.size()) {
        x ^= 1;
        continue;
      }
      const WeaveItem& item = program[ptr[static_cast<std::size_t>(x)]++];
      std::vector<int> deps;
      data_deps(item, x, deps);
      if (item.comm) {
        emit(item, x, std::move(deps));
        x ^= 1;
      } else {
        if (comm_started_.size() >= 2) {
          deps.push_back(comm_started_[comm_started_.size() - 2]);
        }
        emit(item, x, std::move(deps));
      }
    }
  }

  void serial(const std::vector<WeaveItem>& program,
              const std::function<void(const WeaveItem&, int, std::vector<int>&)>& data_deps) {
    for (const WeaveItem& item : program) {
      std::vector<int> deps;
      data_deps(item, 0, deps);
      if (next_id_ > 0) deps.push_back(next_id_ - 1);
      emit(item, 0, std::move(deps));
    }
  }

  void begin_backward() {
    in_backward_ = true;
    comm_started_.clear();
    // Backward starts after the forward phase fully drains, including the
    // trailing communication.
    int last_comm = -1, last_compute = -1;
    for (const ScheduledOp& op : plan.forward_ops) {
      (op.stream == Stream::Comm ? last_comm : last_compute) = op.id;
    }
    join_dep_ = last_compute;
    join_dep2_ = last_comm;
  }

  void reset_gate() { comm_started_.clear(); }

  int first_unemitted_id() const { return next_id_; }

  int fwd_comm(int block, int sb) const { return fwd_comm_[block][sb]; }
  int fwd_last_compute(int block, int sb) const { return fwd_last_compute_[block][sb]; }
  const std::vector<int>& fwd_computes(int block, int sb) const {
    return fwd_compute_ids_[block][sb];
  }
  int rec_comm(int block, int sb) const { return rec_comm_[block][sb]; }
  int last_rec(int block, int sb) const { return last_rec_[block][sb]; }
  int bwd_comm(int block, int sb) const { return bwd_comm_[block][sb]; }
  int last_bwd(int block, int sb) const { return last_bwd_[block][sb]; }

 private:
  const ModelGraph& graph_;
  int next_id_ = 0;
  bool in_backward_ = false;
  int join_dep_ = -1;
  int join_dep2_ = -1;
  std::vector<int> comm_started_;
  std::vector<std::array<int, 2>> fwd_comm_;
  std::vector<std::array<int, 2>> fwd_last_compute_;
  std::vector<std::array<std::vector<int>, 2>> fwd_compute_ids_;
  std::vector<std::array<int, 2>> rec_comm_;
  std::vector<std::array<int, 2>> last_rec_;
  std::vector<std::array<int, 2>> bwd_comm_;
  std::vector<std::array<int, 2>> last_bwd_;
};

std::vector<WeaveItem> forward_program(const ModelGraph& graph) {
  std::vector<WeaveItem> program;
  for (const Block& block : graph.blocks) {
    for (const Operator& c : block.compute_ops) {
      program.push_back({false, OpKind::ForwardCompute, Pass::Forward, block.index, c.id});
    }
    if (block.comm_op) {
      program.push_back({true, block.comm_op->kind, Pass::Forward, block.index,
                         block.comm_op->id});
    }
  }
  return program;
}

void append_recompute_items(const ModelGraph& graph, int block, bool with_comm,
                            std::vector<WeaveItem>* program) {
  const Block& b = graph.blocks[block];
  for (const Operator& c : b.compute_ops) {
    program->push_back({false, OpKind::RecomputeCompute, Pass::Recompute, block, c.id});
  }
  if (with_comm && b.comm_op) {
    program->push_back({true, b.comm_op->kind, Pass::Recompute, block, b.comm_op->id});
  }
}

void append_backward_items(const ModelGraph& graph, int block, std::vector<WeaveItem>* program) {
  const Block& b = graph.blocks[block];
  for (auto it = b.compute_ops.rbegin(); it != b.compute_ops.rend(); ++it) {
    program->push_back({false, OpKind::BackwardCompute, Pass::Backward, block, it->id});
  }
  if (b.comm_op) {
    program->push_back({true, b.comm_op->kind, Pass::Backward, block, b.comm_op->id});
  }
}

// Data dependencies shared by all pipelined variants.
struct DepRules {
  const ModelGraph* graph;
  PlanBuilder* builder;
  // For recompute items: id of the stored-input producer, or -1.
  std::function<int(int block, int sb)> recompute_input;

  void operator()(const WeaveItem& item, int sb, std::vector<int>& deps) const {
    PlanBuilder& b = *builder;
    const int last_block = graph->block_count() - 1;
    switch (item.pass) {
      case Pass::Forward:
        if (item.comm) {
          deps.push_back(b.fwd_last_compute(item.block, sb));
        } else if (item.block > 0) {
          deps.push_back(b.fwd_comm(item.block - 1, sb));
        }
        break;
      case Pass::Recompute:
        if (item.comm) {
          deps.push_back(b.last_rec(item.block, sb));
        } else {
          deps.push_back(recompute_input(item.block, sb));
        }
        break;
      case Pass::Backward:
        if (item.comm) {
          deps.push_back(b.last_bwd(item.block, sb));
        } else {
          // Incoming gradient: the downstream block's backward communication,
          // or the sub-batch's own forward tail for the last block.
          if (item.block < last_block) {
            deps.push_back(b.bwd_comm(item.block + 1, sb));
          } else {
            const int tail = b.fwd_comm(item.block, sb);
            deps.push_back(tail >= 0 ? tail : b.fwd_last_compute(item.block, sb));
          }
          // Activations from the replay (or from forward when not replaying).
          const int rec = b.last_rec(item.block, sb);
          deps.push_back(rec >= 0 ? rec : b.fwd_last_compute(item.block, sb));
        }
        break;
    }
  }
};

void record_saved_sequences_per_unit(PlanBuilder& b,
                                     const std::vector<std::pair<int, int>>& units,
                                     int sub_batches) {
  for (const auto& [first, last] : units) {
    for (int sb = 0; sb < sub_batches; ++sb) {
      std::vector<int> seq;
      for (int block = first; block <= last; ++block) {
        const auto& ids = b.fwd_computes(block, sb);
        seq.insert(seq.end(), ids.begin(), ids.end());
      }
      b.plan.saved_sequences.push_back(std::move(seq));
    }
  }
}

}  // namespace

SchedulePlan schedule_default(const ModelGraph& graph) {
  PlanBuilder b(graph, ScheduleVariant::Default, /*split=*/false);
  if (graph.block_count() == 0) return b.plan;

  DepRules rules{&graph, &b,
                 [&](int block, int) { return block > 0 ? b.fwd_comm(block - 1, 0) : -1; }};
  b.serial(forward_program(graph), std::ref(rules));

  const auto units = recompute_units(graph);
  if (graph.recompute_enabled) record_saved_sequences_per_unit(b, units, 1);

  b.begin_backward();
  std::vector<WeaveItem> bwd;
  for (auto it = units.rbegin(); it != units.rend(); ++it) {
    if (graph.recompute_enabled) {
      for (int block = it->first; block <= it->second; ++block) {
        append_recompute_items(graph, block, /*with_comm=*/true, &bwd);
      }
    }
    for (int block = it->second; block >= it->first; --block) {
      append_backward_items(graph, block, &bwd);
    }
  }
  b.serial(bwd, std::ref(rules));
  return b.plan;
}

namespace {

SchedulePlan pipelined_schedule(const ModelGraph& graph, ScheduleVariant variant) {
  PlanBuilder b(graph, variant, /*split=*/true);
  if (graph.block_count() == 0) return b.plan;

  const bool oases = variant == ScheduleVariant::Oases;
  const bool recompute = graph.recompute_enabled;
  const auto units = recompute_units(graph);

  DepRules rules{&graph, &b, [&](int block, int sb) {
                   if (oases) {
                     // Replay starts from the stored post-communication tensor.
                     return block > 0 ? b.fwd_comm(block - 1, sb) : -1;
                   }
                   // Replay of a unit starts from the unit input; inside a
                   // unit it consumes the replayed communication.
                   for (const auto& [first, last] : units) {
                     if (block == first) return first > 0 ? b.fwd_comm(first - 1, sb) : -1;
                   }
                   return b.rec_comm(block - 1, sb);
                 }};

  b.weave(forward_program(graph), /*start_sb=*/0, std::ref(rules));
  if (recompute) {
    if (oases) {
      // Algorithm order: a unit is saved per block each time its trailing
      // communication starts, alternating sub-batches.
      for (int block = 0; block < graph.block_count(); ++block) {
        for (int sb = 0; sb < 2; ++sb) {
          b.plan.saved_sequences.push_back(b.fwd_computes(block, sb));
        }
      }
    } else {
      record_saved_sequences_per_unit(b, units, 2);
    }
  }

  b.begin_backward();
  if (oases || variant == ScheduleVariant::CrossPass || !recompute) {
    std::vector<WeaveItem> bwd;
    if (oases || !recompute) {
      for (int block = graph.block_count() - 1; block >= 0; --block) {
        if (recompute) append_recompute_items(graph, block, /*with_comm=*/false, &bwd);
        append_backward_items(graph, block, &bwd);
      }
    } else {
      for (auto it = units.rbegin(); it != units.rend(); ++it) {
        for (int block = it->first; block <= it->second; ++block) {
          append_recompute_items(graph, block, /*with_comm=*/true, &bwd);
        }
        for (int block = it->second; block >= it->first; --block) {
          append_backward_items(graph, block, &bwd);
        }
      }
    }
    b.weave(bwd, /*start_sb=*/1, std::ref(rules));
  } else {
    // Intra-pass: pipeline each recomputation and backward pass on its own;
    // a barrier joins consecutive passes.
    std::vector<int> prev_pass;
    auto run_pass = [&](const std::vector<WeaveItem>& program) {
      const int begin = b.first_unemitted_id();
      b.reset_gate();
      auto gated = [&](const WeaveItem& item, int sb, std::vector<int>& deps) {
        rules(item, sb, deps);
        deps.insert(deps.end(), prev_pass.begin(), prev_pass.end());
      };
      b.weave(program, /*start_sb=*/1, gated);
      prev_pass.clear();
      for (int id = begin; id < b.first_unemitted_id(); ++id) prev_pass.push_back(id);
    };
    for (auto it = units.rbegin(); it != units.rend(); ++it) {
      std::vector<WeaveItem> rec_pass;
      for (int block = it->first; block <= it->second; ++block) {
        append_recompute_items(graph, block, /*with_comm=*/true, &rec_pass);
      }
      run_pass(rec_pass);
      std::vector<WeaveItem> bwd_pass;
      for (int block = it->second; block >= it->first; --block) {
        append_backward_items(graph, block, &bwd_pass);
      }
      run_pass(bwd_pass);
    }
  }
  return b.plan;
}

}  // namespace

SchedulePlan schedule_intra_pass(const ModelGraph& graph) {
  return pipelined_schedule(graph, ScheduleVariant::IntraPass);
}

SchedulePlan schedule_cross_pass(const ModelGraph& graph) {
  return pipelined_schedule(graph, ScheduleVariant::CrossPass);
}

SchedulePlan schedule_oases(const ModelGraph& graph) {
  return pipelined_schedule(graph, ScheduleVariant::Oases);
}

SchedulePlan make_schedule(const ModelGraph& graph, ScheduleVariant variant) {
  switch (variant) {
    case ScheduleVariant::Default: return schedule_default(graph);
    case ScheduleVariant::IntraPass: return schedule_intra_pass(graph);
    case ScheduleVariant::CrossPass: return schedule_cross_pass(graph);
    case ScheduleVariant::Oases: return schedule_oases(graph);
  }
  throw ConfigError("unknown schedule variant");
}

std::vector<Violation> validate_plan(const SchedulePlan& plan) {
  std::vector<Violation> violations;
  const int n = plan.total_ops();
  std::set<std::pair<int, int>> rec_seen;   // (block, sub_batch)
  std::set<std::pair<int, int>> fwd_seen;

  for (int id = 0; id < n; ++id) {
    const ScheduledOp& op = plan.op(id);
    if (op.id != id) {
      violations.push_back({"id-order", "op at position " + std::to_string(id) +
                                            " has id " + std::to_string(op.id)});
    }
    for (int dep : op.deps) {
      if (dep < 0 || dep >= n) {
        violations.push_back({"dangling-dep", "op " + std::to_string(id) +
                                                  " depends on unknown id " +
                                                  std::to_string(dep)});
      } else if (dep >= id) {
        violations.push_back({"cycle", "op " + std::to_string(id) +
                                           " depends on op " + std::to_string(dep) +
                                           " that is not before it"});
      }
    }
    const bool comm = is_comm(op.kind);
    if (comm != (op.stream == Stream::Comm)) {
      violations.push_back({"stream", "op " + std::to_string(id) +
                                          " kind/stream mismatch"});
    }
    if (op.kind == OpKind::AllGather && !op.blocking) {
      violations.push_back({"non-blocking-gather",
                            "op " + std::to_string(id) + " must stall both streams"});
    }
    if (plan.variant == ScheduleVariant::Oases && comm && op.pass == Pass::Recompute) {
      violations.push_back({"recompute-comm", "op " + std::to_string(id) +
                                                  " replays a communication"});
    }
    if (op.kind == OpKind::ForwardCompute) fwd_seen.insert({op.block, op.sub_batch});
    if (op.kind == OpKind::RecomputeCompute) rec_seen.insert({op.block, op.sub_batch});
    if (op.kind == OpKind::BackwardCompute) {
      const auto key = std::make_pair(op.block, op.sub_batch);
      const bool ok = plan.has_recompute ? rec_seen.count(key) > 0 : fwd_seen.count(key) > 0;
      if (!ok) {
        violations.push_back({"missing-producer",
                              "backward op " + std::to_string(id) + " on block " +
                                  std::to_string(op.block) + " has no " +
                                  (plan.has_recompute ? "recompute" : "forward") +
                                  " producer"});
      }
    }
  }
  return violations;
}

int comm_op_count(const SchedulePlan& plan) {
  std::set<std::pair<int, int>> logical;
  for (int id = 0; id < plan.total_ops(); ++id) {
    const ScheduledOp& op = plan.op(id);
    if (is_comm(op.kind)) logical.insert({op.base_id, static_cast<int>(op.pass)});
  }
  return static_cast<int>(logical.size());
}

nlohmann::json plan_to_json(const SchedulePlan& plan) {
  auto ops_to_json = [](const std::vector<ScheduledOp>& ops) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ScheduledOp& op : ops) {
      arr.push_back({{"id", op.id},
                     {"base_id", op.base_id},
                     {"kind", to_string(op.kind)},
                     {"pass", to_string(op.pass)},
                     {"stream", to_string(op.stream)},
                     {"block", op.block},
                     {"sub_batch", op.sub_batch},
                     {"deps", op.deps}});
    }
    return arr;
  };
  return {{"variant", to_string(plan.variant)},
          {"split_batch", plan.split_batch},
          {"has_recompute", plan.has_recompute},
          {"forward_ops", ops_to_json(plan.forward_ops)},
          {"backward_ops", ops_to_json(plan.backward_ops)},
          {"saved_sequences", plan.saved_sequences}};
}

}  // namespace tmpsim
