// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/model.hpp"

#include <string>

#include "tmpsim/errors.hpp"

namespace tmpsim {

bool is_compute(OpKind k) {
  return k == OpKind::ForwardCompute || k == OpKind::RecomputeCompute ||
         k == OpKind::BackwardCompute;
}

bool is_comm(OpKind k) { return k == OpKind::AllReduce || k == OpKind::AllGather; }

void ModelSpec::validate() const {
  auto positive = [](std::int64_t v, const char* field) {
    if (v <= 0) {
      throw ConfigError(std::string("model spec: field '") + field + "' must be positive");
    }
  };
  positive(hidden_size, "hidden_size");
  if (num_layers < 0) {
    throw ConfigError("model spec: field 'num_layers' must be nonnegative");
  }
  positive(seq_len, "seq_len");
  positive(attention_heads, "attention_heads");
  positive(global_batch, "global_batch");
  positive(bytes_per_element, "bytes_per_element");
  if (hidden_size % attention_heads != 0) {
    throw ConfigError("model spec: 'hidden_size' must be divisible by 'attention_heads'");
  }
  if (global_batch % 2 != 0) {
    throw ConfigError(
        "model spec: 'global_batch' must be even (the schedule splits it into two sub-batches)");
  }
}

std::vector<Operator> build_operator_sequence(const ModelSpec& spec) {
  spec.validate();
  std::vector<Operator> ops;
  ops.reserve(static_cast<std::size_t>(spec.num_layers) * 4);
  const std::int64_t h = spec.hidden_size;
  const std::int64_t boundary = static_cast<std::int64_t>(spec.seq_len) * h;
  int next_id = 0;
  for (int layer = 0; layer < spec.num_layers; ++layer) {
    for (Sublayer sub : {Sublayer::Attention, Sublayer::Ffn}) {
      Operator compute;
      compute.id = next_id++;
      compute.kind = OpKind::ForwardCompute;
      compute.layer = layer;
      compute.sublayer = sub;
      compute.param_count = (sub == Sublayer::Attention ? 4 : 8) * h * h;
      compute.tensor_elements = boundary;
      ops.push_back(compute);

      Operator reduce;
      reduce.id = next_id++;
      reduce.kind = OpKind::AllReduce;
      reduce.layer = layer;
      reduce.sublayer = sub;
      reduce.tensor_elements = boundary;
      ops.push_back(reduce);
    }
  }
  return ops;
}

ModelGraph build_block_graph(const std::vector<Operator>& ops) {
  ModelGraph graph;
  Block current;
  bool prev_was_comm = true;  // leading comm is as illegal as an adjacent pair
  for (const Operator& op : ops) {
    if (is_comm(op.kind)) {
      if (prev_was_comm) {
        throw ConfigError("block graph: adjacent communication operators at op id " +
                          std::to_string(op.id));
      }
      current.comm_op = op;
      current.comm_op->blocking = op.kind == OpKind::AllGather;  // resharding is exclusive
      current.index = graph.block_count();
      for (const Operator& c : current.compute_ops) current.param_count += c.param_count;
      current.activation_elements = op.tensor_elements;
      graph.blocks.push_back(std::move(current));
      current = Block{};
      prev_was_comm = true;
    } else {
      current.compute_ops.push_back(op);
      prev_was_comm = false;
    }
  }
  if (!current.compute_ops.empty()) {
    current.index = graph.block_count();
    for (const Operator& c : current.compute_ops) current.param_count += c.param_count;
    current.activation_elements = current.compute_ops.back().tensor_elements;
    graph.blocks.push_back(std::move(current));
  }
  for (int i = 0; i + 1 < graph.block_count(); ++i) graph.edges.emplace_back(i, i + 1);
  return graph;
}

ModelGraph build_block_graph(const std::vector<Operator>& ops, const ModelSpec& spec) {
  ModelGraph graph = build_block_graph(ops);
  graph.recompute_enabled = spec.recompute_enabled;
  return graph;
}

std::vector<Operator> flatten(const ModelGraph& graph) {
  std::vector<Operator> ops;
  for (const Block& block : graph.blocks) {
    ops.insert(ops.end(), block.compute_ops.begin(), block.compute_ops.end());
    if (block.comm_op) ops.push_back(*block.comm_op);
  }
  return ops;
}

}  // namespace tmpsim
