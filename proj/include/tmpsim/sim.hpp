// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "tmpsim/costs.hpp"
#include "tmpsim/schedule.hpp"

namespace tmpsim {

struct TraceEvent {
  int op_id = 0;  // plan id; injected resharding ops get ids past the plan
  Stream stream = Stream::Compute;
  double start = 0.0;
  double end = 0.0;
};

struct SimResult {
  double makespan = 0.0;
  double compute_busy_fraction = 0.0;
  double comm_exposed = 0.0;  // communication time not hidden under compute
  double peak_memory = 0.0;   // bytes
  std::vector<TraceEvent> trace;
};

struct SimOptions {
  // Applied to communication started while compute is running; 1.0 means
  // overlap is free.
  double overlap_slowdown = 1.0;
};

/// Deterministic two-stream execution of a plan on one representative
/// device. Streams dispatch ready operators in plan order; blocking
/// operators (resharding AllGathers, injected wherever adjacent blocks use
/// different degrees) stall both streams.
SimResult simulate(const SchedulePlan& plan, const CostVectors& costs,
                   const Strategy& strategy, SimOptions options = {});

struct Breakdown {
  double comm_fraction = 0.0;  // exposed communication only
  double compute_fraction = 0.0;
  double idle_fraction = 0.0;
};

Breakdown breakdown(const SimResult& result);  // throws on zero makespan

}  // namespace tmpsim
