// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "tmpsim/model.hpp"

namespace tmpsim {

enum class ScheduleVariant { Default, IntraPass, CrossPass, Oases };
enum class Stream { Compute, Comm };
enum class Pass { Forward, Recompute, Backward };

const char* to_string(ScheduleVariant v);
const char* to_string(Stream s);
const char* to_string(Pass p);
const char* to_string(OpKind k);
ScheduleVariant variant_from_string(const std::string& name);

/// One operator instance in a plan. Ids are positions: forward_ops first,
/// then backward_ops. deps always reference earlier ids, so plan order is a
/// topological order of the dependency graph.
struct ScheduledOp {
  int id = 0;
  int base_id = 0;  // model operator this instance derives from
  OpKind kind = OpKind::ForwardCompute;
  Pass pass = Pass::Forward;
  Stream stream = Stream::Compute;
  int block = 0;
  int sub_batch = 0;
  bool blocking = false;
  std::vector<int> deps;
};

struct SchedulePlan {
  ScheduleVariant variant = ScheduleVariant::Default;
  bool split_batch = false;    // false: operators carry the full batch
  bool has_recompute = true;
  std::vector<ScheduledOp> forward_ops;
  std::vector<ScheduledOp> backward_ops;
  // Replay units saved during forward, in save order (the forward-plan ids
  // of the compute operators each unit reruns).
  std::vector<std::vector<int>> saved_sequences;

  int total_ops() const {
    return static_cast<int>(forward_ops.size() + backward_ops.size());
  }
  const ScheduledOp& op(int id) const;
};

// The pipelined variants split the batch in two and alternate sub-batches at
// every communication operator: while one sub-batch communicates the other
// computes. The default variant runs the full batch fully serialized.
SchedulePlan schedule_default(const ModelGraph& graph);
SchedulePlan schedule_intra_pass(const ModelGraph& graph);
SchedulePlan schedule_cross_pass(const ModelGraph& graph);
SchedulePlan schedule_oases(const ModelGraph& graph);
SchedulePlan make_schedule(const ModelGraph& graph, ScheduleVariant variant);

struct Violation {
  std::string code;
  std::string detail;
};

/// Empty iff the dependency graph is acyclic, every backward compute has its
/// producer, streams match operator kinds, and the Oases variant carries no
/// recompute-pass communication.
std::vector<Violation> validate_plan(const SchedulePlan& plan);

/// Number of distinct (operator, pass) communication instances; sub-batch
/// replicas of the same operator count once.
int comm_op_count(const SchedulePlan& plan);

nlohmann::json plan_to_json(const SchedulePlan& plan);

}  // namespace tmpsim
