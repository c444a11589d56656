// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "tmpsim/schedule.hpp"

using namespace tmpsim;
using test::small_graph;

namespace {

std::vector<const ScheduledOp*> all_ops(const SchedulePlan& plan) {
  std::vector<const ScheduledOp*> ops;
  for (const auto& op : plan.forward_ops) ops.push_back(&op);
  for (const auto& op : plan.backward_ops) ops.push_back(&op);
  return ops;
}

// Compute work ignoring sub-batch splitting: which (operator, pass kind)
// instances exist at all.
std::set<std::pair<int, OpKind>> compute_multiset(const SchedulePlan& plan) {
  std::set<std::pair<int, OpKind>> ms;
  for (const auto* op : all_ops(plan)) {
    if (is_compute(op->kind)) ms.insert({op->base_id, op->kind});
  }
  return ms;
}

}  // namespace

TEST_CASE("three communications per block in the default schedule, two with elision") {
  for (int layers = 1; layers <= 8; ++layers) {
    const auto graph = small_graph(layers);
    CHECK(comm_op_count(schedule_default(graph)) == 6 * layers);
    CHECK(comm_op_count(schedule_intra_pass(graph)) == 6 * layers);
    CHECK(comm_op_count(schedule_cross_pass(graph)) == 6 * layers);
    CHECK(comm_op_count(schedule_oases(graph)) == 4 * layers);
  }
}

TEST_CASE("forward communication is never elided") {
  const auto graph = small_graph(3);
  auto fwd_comms = [](const SchedulePlan& plan) {
    std::set<int> base;
    for (const auto& op : plan.forward_ops) {
      if (is_comm(op.kind)) base.insert(op.base_id);
    }
    return base;
  };
  CHECK(fwd_comms(schedule_oases(graph)) == fwd_comms(schedule_default(graph)));
}

TEST_CASE("empty graphs produce empty plans") {
  const auto graph = small_graph(0);
  for (auto variant : {ScheduleVariant::Default, ScheduleVariant::IntraPass,
                       ScheduleVariant::CrossPass, ScheduleVariant::Oases}) {
    const auto plan = make_schedule(graph, variant);
    CHECK(plan.total_ops() == 0);
    CHECK(validate_plan(plan).empty());
  }
}

TEST_CASE("generated plans pass validation") {
  for (int layers : {1, 2, 5}) {
    for (bool recompute : {true, false}) {
      const auto graph = small_graph(layers, recompute);
      for (auto variant : {ScheduleVariant::Default, ScheduleVariant::IntraPass,
                           ScheduleVariant::CrossPass, ScheduleVariant::Oases}) {
        const auto plan = make_schedule(graph, variant);
        INFO(to_string(variant), " layers=", layers, " recompute=", recompute);
        CHECK(validate_plan(plan).empty());
      }
    }
  }
}

TEST_CASE("intra-pass keeps the pass barrier, cross-pass removes it") {
  const auto graph = small_graph(2);
  const auto intra = schedule_intra_pass(graph);
  const auto cross = schedule_cross_pass(graph);

  // Group backward ops per layer-unit and pass.
  auto layer_of_block = [](int block) { return block / 2; };
  auto barrier_held = [&](const SchedulePlan& plan) {
    for (const auto& bwd : plan.backward_ops) {
      if (bwd.pass != Pass::Backward) continue;
      for (const auto& rec : plan.backward_ops) {
        if (rec.pass != Pass::Recompute) continue;
        if (layer_of_block(rec.block) != layer_of_block(bwd.block)) continue;
        if (std::find(bwd.deps.begin(), bwd.deps.end(), rec.id) == bwd.deps.end()) {
          return false;  // some recompute op of the layer is not a dependency
        }
      }
    }
    return true;
  };
  CHECK(barrier_held(intra));
  CHECK_FALSE(barrier_held(cross));
}

TEST_CASE("no cross-sub-batch dependency between a block's compute and comm") {
  const auto plan = schedule_intra_pass(small_graph(2));
  for (const auto& op : plan.forward_ops) {
    if (op.kind != OpKind::ForwardCompute || op.sub_batch != 1) continue;
    for (int dep : op.deps) {
      const auto& d = plan.op(dep);
      CHECK_FALSE((d.block == op.block && is_comm(d.kind) && d.sub_batch == 0));
    }
  }
}

TEST_CASE("oases plans replay no communication") {
  const auto plan = schedule_oases(small_graph(4));
  for (const auto* op : all_ops(plan)) {
    if (is_comm(op->kind)) CHECK(op->pass != Pass::Recompute);
  }
  // Cross-pass does replay communication.
  const auto cross = schedule_cross_pass(small_graph(4));
  bool found = false;
  for (const auto& op : cross.backward_ops) {
    found = found || (is_comm(op.kind) && op.pass == Pass::Recompute);
  }
  CHECK(found);
}

TEST_CASE("every forward compute replica sits in exactly one saved sequence") {
  for (auto variant : {ScheduleVariant::Default, ScheduleVariant::IntraPass,
                       ScheduleVariant::CrossPass, ScheduleVariant::Oases}) {
    const auto plan = make_schedule(small_graph(3), variant);
    std::map<int, int> covered;
    for (const auto& seq : plan.saved_sequences) {
      for (int id : seq) covered[id]++;
    }
    for (const auto& op : plan.forward_ops) {
      if (op.kind != OpKind::ForwardCompute) continue;
      INFO(to_string(variant), " op ", op.id);
      CHECK(covered[op.id] == 1);
    }
  }
  CHECK(make_schedule(small_graph(3, /*recompute=*/false), ScheduleVariant::Oases)
            .saved_sequences.empty());
}

TEST_CASE("compute multiset is identical across the four variants") {
  const auto graph = small_graph(3);
  const auto reference = compute_multiset(schedule_default(graph));
  CHECK(reference == compute_multiset(schedule_intra_pass(graph)));
  CHECK(reference == compute_multiset(schedule_cross_pass(graph)));
  CHECK(reference == compute_multiset(schedule_oases(graph)));
}

TEST_CASE("single block without recompute: one forward and one backward comm") {
  const auto graph = small_graph(/*layers=*/1, /*recompute=*/false);
  // Take only the first block to get a single-block chain.
  ModelGraph one;
  one.blocks = {graph.blocks[0]};
  one.recompute_enabled = false;
  const auto plan = schedule_default(one);
  int fwd = 0, bwd = 0;
  for (const auto* op : all_ops(plan)) {
    if (!is_comm(op->kind)) continue;
    (op->pass == Pass::Forward ? fwd : bwd)++;
  }
  CHECK(fwd == 1);
  CHECK(bwd == 1);
}

TEST_CASE("mutated plans are caught by the validator") {
  auto plan = schedule_oases(small_graph(1));

  SUBCASE("deleting a recompute op leaves backward without a producer") {
    auto& ops = plan.backward_ops;
    ops.erase(std::remove_if(ops.begin(), ops.end(),
                             [](const ScheduledOp& op) {
                               return op.kind == OpKind::RecomputeCompute && op.block == 1 &&
                                      op.sub_batch == 0;
                             }),
              ops.end());
    // Re-number so ids stay positional.
    const int base = static_cast<int>(plan.forward_ops.size());
    std::map<int, int> remap;
    for (int i = 0; i < base; ++i) remap[i] = i;
    for (std::size_t i = 0; i < ops.size(); ++i) remap[ops[i].id] = base + static_cast<int>(i);
    for (std::size_t i = 0; i < ops.size(); ++i) {
      ops[i].id = base + static_cast<int>(i);
      std::vector<int> deps;
      for (int dep : ops[i].deps) {
        if (remap.count(dep)) deps.push_back(remap[dep]);
      }
      ops[i].deps = deps;
    }
    const auto violations = validate_plan(plan);
    REQUIRE_FALSE(violations.empty());
    bool missing = false;
    for (const auto& v : violations) missing = missing || v.code == "missing-producer";
    CHECK(missing);
  }

  SUBCASE("a forward dependency on a later op is a cycle") {
    plan.forward_ops[0].deps.push_back(plan.forward_ops.back().id);
    bool cycle = false;
    for (const auto& v : validate_plan(plan)) cycle = cycle || v.code == "cycle";
    CHECK(cycle);
  }

  SUBCASE("stream mismatch is flagged") {
    plan.forward_ops[0].stream = Stream::Comm;
    bool stream = false;
    for (const auto& v : validate_plan(plan)) stream = stream || v.code == "stream";
    CHECK(stream);
  }
}

TEST_CASE("plans serialize to json") {
  const auto plan = schedule_oases(small_graph(1));
  const auto j = plan_to_json(plan);
  CHECK(j.at("variant") == "Oases");
  CHECK(j.at("forward_ops").size() == plan.forward_ops.size());
  CHECK(j.at("saved_sequences").size() == plan.saved_sequences.size());
}

TEST_CASE("the one-layer pipelined plan matches its golden file") {
  std::ifstream in(std::string(TMPSIM_TEST_DATA_DIR) + "/golden/oases_l1_plan.json");
  REQUIRE(in.good());
  nlohmann::json golden;
  in >> golden;
  CHECK(plan_to_json(schedule_oases(small_graph(1))) == golden);
}
