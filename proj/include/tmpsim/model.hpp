// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace tmpsim {

enum class OpKind {
  ForwardCompute,
  RecomputeCompute,
  BackwardCompute,
  AllReduce,
  AllGather,
};

enum class Sublayer { Attention, Ffn };

bool is_compute(OpKind k);
bool is_comm(OpKind k);

/// Transformer training job description. Batch is split into exactly two
/// sub-batches by the pipelined schedules, hence global_batch must be even.
struct ModelSpec {
  int hidden_size = 0;
  int num_layers = 0;  // zero is allowed and yields an empty model
  int seq_len = 0;
  int attention_heads = 0;
  int global_batch = 0;
  int bytes_per_element = 2;
  bool recompute_enabled = true;

  void validate() const;  // throws ConfigError naming the offending field
};

/// One unit of work. Compute operators carry the parameter count of the
/// fused sublayer they stand for; every operator records the element count
/// of its output tensor per sample (the block-boundary activation).
struct Operator {
  int id = 0;
  OpKind kind = OpKind::ForwardCompute;
  int layer = 0;
  Sublayer sublayer = Sublayer::Attention;
  int sub_batch = 0;
  bool blocking = false;  // AllGather resharding is exclusive
  std::int64_t param_count = 0;        // elements, compute ops only
  std::int64_t tensor_elements = 0;    // output elements per sample
};

/// Maximal run of compute operators plus the trailing communication
/// operator. comm_op is absent only for a terminal block.
struct Block {
  int index = 0;
  std::vector<Operator> compute_ops;
  std::optional<Operator> comm_op;
  std::int64_t param_count = 0;          // elements
  std::int64_t activation_elements = 0;  // per sample, boundary tensor
};

/// Chain of blocks; edges are always ((0,1),(1,2),...).
struct ModelGraph {
  std::vector<Block> blocks;
  std::vector<std::pair<int, int>> edges;
  bool recompute_enabled = true;

  int block_count() const { return static_cast<int>(blocks.size()); }
};

/// Per layer: attention compute, AllReduce, FFN compute, AllReduce.
/// Attention and FFN are fused single operators with 4H^2 and 8H^2
/// parameter elements.
std::vector<Operator> build_operator_sequence(const ModelSpec& spec);

/// Merges compute operators between adjacent communication operators.
/// Rejects sequences with two adjacent communication operators.
ModelGraph build_block_graph(const std::vector<Operator>& ops);
ModelGraph build_block_graph(const std::vector<Operator>& ops, const ModelSpec& spec);

/// Concatenates blocks back into the flat operator sequence.
std::vector<Operator> flatten(const ModelGraph& graph);

}  // namespace tmpsim
