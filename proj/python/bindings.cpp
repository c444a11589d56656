// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tmpsim/costs.hpp"
#include "tmpsim/errors.hpp"
#include "tmpsim/json_io.hpp"
#include "tmpsim/model.hpp"
#include "tmpsim/numerics.hpp"
#include "tmpsim/planner.hpp"
#include "tmpsim/schedule.hpp"
#include "tmpsim/sim.hpp"
#include "tmpsim/trace_export.hpp"

namespace py = pybind11;
using namespace tmpsim;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tensor-model-parallel schedule simulator and planner";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<InfeasibleError>(m, "InfeasibleError");
  py::register_exception<IoError>(m, "IoError");

  py::enum_<OpKind>(m, "OpKind")
      .value("ForwardCompute", OpKind::ForwardCompute)
      .value("RecomputeCompute", OpKind::RecomputeCompute)
      .value("BackwardCompute", OpKind::BackwardCompute)
      .value("AllReduce", OpKind::AllReduce)
      .value("AllGather", OpKind::AllGather);
  py::enum_<Sublayer>(m, "Sublayer")
      .value("Attention", Sublayer::Attention)
      .value("Ffn", Sublayer::Ffn);
  py::enum_<ScheduleVariant>(m, "ScheduleVariant")
      .value("Default", ScheduleVariant::Default)
      .value("IntraPass", ScheduleVariant::IntraPass)
      .value("CrossPass", ScheduleVariant::CrossPass)
      .value("Oases", ScheduleVariant::Oases);
  py::enum_<Stream>(m, "Stream")
      .value("Compute", Stream::Compute)
      .value("Comm", Stream::Comm);
  py::enum_<Pass>(m, "Pass")
      .value("Forward", Pass::Forward)
      .value("Recompute", Pass::Recompute)
      .value("Backward", Pass::Backward);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_readwrite("hidden_size", &ModelSpec::hidden_size)
      .def_readwrite("num_layers", &ModelSpec::num_layers)
      .def_readwrite("seq_len", &ModelSpec::seq_len)
      .def_readwrite("attention_heads", &ModelSpec::attention_heads)
      .def_readwrite("global_batch", &ModelSpec::global_batch)
      .def_readwrite("bytes_per_element", &ModelSpec::bytes_per_element)
      .def_readwrite("recompute_enabled", &ModelSpec::recompute_enabled)
      .def("validate", &ModelSpec::validate);

  py::class_<Operator>(m, "Operator")
      .def_readonly("id", &Operator::id)
      .def_readonly("kind", &Operator::kind)
      .def_readonly("layer", &Operator::layer)
      .def_readonly("sublayer", &Operator::sublayer)
      .def_readonly("sub_batch", &Operator::sub_batch)
      .def_readonly("blocking", &Operator::blocking)
      .def_readonly("param_count", &Operator::param_count)
      .def_readonly("tensor_elements", &Operator::tensor_elements);

  py::class_<Block>(m, "Block")
      .def_readonly("index", &Block::index)
      .def_readonly("compute_ops", &Block::compute_ops)
      .def_readonly("comm_op", &Block::comm_op)
      .def_readonly("param_count", &Block::param_count)
      .def_readonly("activation_elements", &Block::activation_elements);

  py::class_<ModelGraph>(m, "ModelGraph")
      .def_readonly("blocks", &ModelGraph::blocks)
      .def_readonly("edges", &ModelGraph::edges)
      .def_readonly("recompute_enabled", &ModelGraph::recompute_enabled)
      .def("block_count", &ModelGraph::block_count);

  py::class_<HardwareProfile>(m, "HardwareProfile")
      .def(py::init<>())
      .def_readwrite("num_devices", &HardwareProfile::num_devices)
      .def_readwrite("memory_capacity", &HardwareProfile::memory_capacity)
      .def_readwrite("compute_throughput", &HardwareProfile::compute_throughput)
      .def_readwrite("bandwidth_by_group", &HardwareProfile::bandwidth_by_group)
      .def_readwrite("latency_by_group", &HardwareProfile::latency_by_group)
      .def_readwrite("candidate_degrees", &HardwareProfile::candidate_degrees)
      .def_readwrite("optimizer_bytes_per_element",
                     &HardwareProfile::optimizer_bytes_per_element)
      .def("validate", &HardwareProfile::validate);

  py::class_<Strategy>(m, "Strategy")
      .def(py::init<>())
      .def(py::init([](std::vector<int> degrees) {
             Strategy s;
             s.degrees = std::move(degrees);
             return s;
           }),
           py::arg("degrees"))
      .def_readwrite("degrees", &Strategy::degrees);

  py::class_<CostVectors>(m, "CostVectors")
      .def_readonly("degrees", &CostVectors::degrees)
      .def("block_count", &CostVectors::block_count)
      .def("degree_index", &CostVectors::degree_index);

  py::class_<ScheduledOp>(m, "ScheduledOp")
      .def_readonly("id", &ScheduledOp::id)
      .def_readonly("base_id", &ScheduledOp::base_id)
      .def_readonly("kind", &ScheduledOp::kind)
      .def_readonly("pass_", &ScheduledOp::pass)
      .def_readonly("stream", &ScheduledOp::stream)
      .def_readonly("block", &ScheduledOp::block)
      .def_readonly("sub_batch", &ScheduledOp::sub_batch)
      .def_readonly("deps", &ScheduledOp::deps);

  py::class_<SchedulePlan>(m, "SchedulePlan")
      .def_readonly("variant", &SchedulePlan::variant)
      .def_readonly("split_batch", &SchedulePlan::split_batch)
      .def_readonly("has_recompute", &SchedulePlan::has_recompute)
      .def_readonly("forward_ops", &SchedulePlan::forward_ops)
      .def_readonly("backward_ops", &SchedulePlan::backward_ops)
      .def_readonly("saved_sequences", &SchedulePlan::saved_sequences)
      .def("total_ops", &SchedulePlan::total_ops)
      .def("to_json", [](const SchedulePlan& plan) { return plan_to_json(plan).dump(); });

  py::class_<Violation>(m, "Violation")
      .def_readonly("code", &Violation::code)
      .def_readonly("detail", &Violation::detail)
      .def("__repr__", [](const Violation& v) { return v.code + ": " + v.detail; });

  py::class_<TraceEvent>(m, "TraceEvent")
      .def_readonly("op_id", &TraceEvent::op_id)
      .def_readonly("stream", &TraceEvent::stream)
      .def_readonly("start", &TraceEvent::start)
      .def_readonly("end", &TraceEvent::end);

  py::class_<SimResult>(m, "SimResult")
      .def_readonly("makespan", &SimResult::makespan)
      .def_readonly("compute_busy_fraction", &SimResult::compute_busy_fraction)
      .def_readonly("comm_exposed", &SimResult::comm_exposed)
      .def_readonly("peak_memory", &SimResult::peak_memory)
      .def_readonly("trace", &SimResult::trace);

  py::class_<Breakdown>(m, "Breakdown")
      .def_readonly("comm_fraction", &Breakdown::comm_fraction)
      .def_readonly("compute_fraction", &Breakdown::compute_fraction)
      .def_readonly("idle_fraction", &Breakdown::idle_fraction);

  py::class_<EdgeCostMatrix>(m, "EdgeCostMatrix")
      .def_readonly("p", &EdgeCostMatrix::p)
      .def("at", [](const EdgeCostMatrix& m_, int i, int j) { return m_.at(i, j); });

  py::class_<PlanResult>(m, "PlanResult")
      .def_readonly("strategy", &PlanResult::strategy)
      .def_readonly("predicted_time", &PlanResult::predicted_time)
      .def_readonly("predicted_memory", &PlanResult::predicted_memory)
      .def_readonly("solve_time_ms", &PlanResult::solve_time_ms)
      .def_readonly("evaluated", &PlanResult::evaluated);

  py::class_<SolveOptions>(m, "SolveOptions")
      .def(py::init<>())
      .def_readwrite("mem_granularity", &SolveOptions::mem_granularity)
      .def_readwrite("frontier_cap", &SolveOptions::frontier_cap)
      .def_readwrite("brute_force_cap", &SolveOptions::brute_force_cap);

  py::class_<GradIdentityCheck>(m, "GradIdentityCheck")
      .def_readonly("autodiff_deviation", &GradIdentityCheck::autodiff_deviation)
      .def_readonly("finite_difference_deviation",
                    &GradIdentityCheck::finite_difference_deviation);

  py::class_<ToyShardedModel>(m, "ToyShardedModel")
      .def_readonly("workers", &ToyShardedModel::workers);

  py::class_<ElisionCheck>(m, "ElisionCheck")
      .def_readonly("grad_deviation", &ElisionCheck::grad_deviation)
      .def_readonly("loss_bit_identical", &ElisionCheck::loss_bit_identical);

  m.def("build_operator_sequence", &build_operator_sequence, py::arg("spec"));
  m.def("build_block_graph",
        py::overload_cast<const std::vector<Operator>&, const ModelSpec&>(&build_block_graph),
        py::arg("ops"), py::arg("spec"));
  m.def("flatten", &flatten, py::arg("graph"));
  m.def("allreduce_volume", &allreduce_volume, py::arg("message_bytes"), py::arg("degree"));
  m.def("allgather_volume", &allgather_volume, py::arg("message_bytes"), py::arg("degree"));
  m.def("comm_time", &comm_time, py::arg("volume_bytes"), py::arg("degree"), py::arg("profile"));
  m.def("build_cost_vectors", &build_cost_vectors, py::arg("graph"), py::arg("spec"),
        py::arg("profile"));
  m.def("load_measured_costs", &load_measured_costs, py::arg("path"), py::arg("base"));
  m.def("schedule_default", &schedule_default, py::arg("graph"));
  m.def("schedule_intra_pass", &schedule_intra_pass, py::arg("graph"));
  m.def("schedule_cross_pass", &schedule_cross_pass, py::arg("graph"));
  m.def("schedule_oases", &schedule_oases, py::arg("graph"));
  m.def("make_schedule", &make_schedule, py::arg("graph"), py::arg("variant"));
  m.def("validate_plan", &validate_plan, py::arg("plan"));
  m.def("comm_op_count", &comm_op_count, py::arg("plan"));
  m.def(
      "simulate",
      [](const SchedulePlan& plan, const CostVectors& costs, const Strategy& strategy,
         double overlap_slowdown) {
        SimOptions opt;
        opt.overlap_slowdown = overlap_slowdown;
        return simulate(plan, costs, strategy, opt);
      },
      py::arg("plan"), py::arg("costs"), py::arg("strategy"), py::arg("overlap_slowdown") = 1.0);
  m.def("breakdown", &breakdown, py::arg("result"));
  m.def("write_chrome_trace", &write_chrome_trace, py::arg("result"), py::arg("plan"),
        py::arg("path"));
  m.def("write_svg_timeline", &write_svg_timeline, py::arg("result"), py::arg("plan"),
        py::arg("path"));
  m.def("node_cost", &node_cost, py::arg("costs"), py::arg("strategy"), py::arg("pass_"));
  m.def("edge_cost_matrix", &edge_cost_matrix, py::arg("costs"), py::arg("v"), py::arg("u"),
        py::arg("profile"));
  m.def("build_edge_costs", &build_edge_costs, py::arg("costs"), py::arg("profile"));
  m.def("objective", &objective, py::arg("costs"), py::arg("edges"), py::arg("strategy"));
  m.def("memory_usage", &memory_usage, py::arg("costs"), py::arg("strategy"));
  m.def("solve", &solve, py::arg("graph"), py::arg("costs"), py::arg("edges"),
        py::arg("profile"), py::arg("budget_bytes"), py::arg("options") = SolveOptions{});
  m.def("brute_force", &brute_force, py::arg("graph"), py::arg("costs"), py::arg("edges"),
        py::arg("profile"), py::arg("budget_bytes"), py::arg("options") = SolveOptions{});
  m.def("rank_correlation", &rank_correlation, py::arg("costs"), py::arg("edges"),
        py::arg("strategies"), py::arg("measured_times"));
  m.def("spearman", &spearman, py::arg("a"), py::arg("b"));
  m.def("run_length_notation", &run_length_notation, py::arg("degrees"));
  m.def("allreduce_grad_identity", &allreduce_grad_identity, py::arg("workers"), py::arg("rows"),
        py::arg("cols"), py::arg("seed"));
  m.def("make_toy_sharded_model", &make_toy_sharded_model, py::arg("workers"), py::arg("batch"),
        py::arg("model_dim"), py::arg("hidden_dim"), py::arg("seed"));
  m.def("sharded_output_deviation", &sharded_output_deviation, py::arg("model"));
  m.def("recompute_elision_equivalence", &recompute_elision_equivalence, py::arg("model"));
  m.def("preset_profile", &preset_profile, py::arg("name"));
  m.def("preset_profile_names", &preset_profile_names);
}
