// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: build the block graph, generate schedules, simulate
// them, plan per-block TMP degrees, and export traces and reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tmpsim/costs.hpp"
#include "tmpsim/errors.hpp"
#include "tmpsim/json_io.hpp"
#include "tmpsim/model.hpp"
#include "tmpsim/numerics.hpp"
#include "tmpsim/planner.hpp"
#include "tmpsim/schedule.hpp"
#include "tmpsim/sim.hpp"
#include "tmpsim/trace_export.hpp"

namespace fs = std::filesystem;
using namespace tmpsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

struct CliOverrides {
  std::string config_path;
  std::string out_dir;
  long seed = -1;
  std::string variants;
  double mem_granularity = -1.0;
};

struct Pipeline {
  RunConfig config;
  ModelGraph graph;
  CostVectors costs;
  std::vector<EdgeCostMatrix> edges;
};

RunConfig apply_overrides(RunConfig config, const CliOverrides& cli) {
  if (!cli.out_dir.empty()) config.output_dir = cli.out_dir;
  if (cli.seed >= 0) config.seed = cli.seed;
  if (cli.mem_granularity > 0.0) config.mem_granularity = cli.mem_granularity;
  if (!cli.variants.empty()) {
    config.variants.clear();
    std::string token;
    for (char c : cli.variants + ",") {
      if (c == ',') {
        if (!token.empty()) config.variants.push_back(variant_from_string(token));
        token.clear();
      } else {
        token += c;
      }
    }
    if (config.variants.empty()) throw ConfigError("--variants: empty list");
  }
  return config;
}

Pipeline build_pipeline(const CliOverrides& cli) {
  Pipeline p;
  p.config = apply_overrides(load_run_config(cli.config_path), cli);
  const auto ops = build_operator_sequence(p.config.model);
  p.graph = build_block_graph(ops, p.config.model);
  p.costs = build_cost_vectors(p.graph, p.config.model, p.config.hardware);
  if (p.config.measured_costs_path) {
    p.costs = load_measured_costs(*p.config.measured_costs_path, std::move(p.costs));
  }
  p.edges = build_edge_costs(p.costs, p.config.hardware);
  return p;
}

double budget_of(const Pipeline& p) {
  return p.config.budget_bytes ? *p.config.budget_bytes
                               : static_cast<double>(p.config.hardware.memory_capacity);
}

SolveOptions solve_options_of(const Pipeline& p) {
  SolveOptions opt;
  opt.mem_granularity = p.config.mem_granularity;
  return opt;
}

Strategy resolve_strategy(const Pipeline& p, PlanResult* plan_out = nullptr) {
  if (p.config.strategy) {
    Strategy s = *p.config.strategy;
    validate_strategy(s, p.costs);
    return s;
  }
  PlanResult plan =
      solve(p.graph, p.costs, p.edges, p.config.hardware, budget_of(p), solve_options_of(p));
  if (plan_out) *plan_out = plan;
  return plan.strategy;
}

std::string fmt_seconds(double s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", s);
  return buf;
}

std::string fmt_ratio(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2fx", r);
  return buf;
}

void ensure_out_dir(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + config.output_dir);
}

int cmd_simulate(const CliOverrides& cli) {
  Pipeline p = build_pipeline(cli);
  ensure_out_dir(p.config);
  const Strategy strategy = resolve_strategy(p);

  struct Row {
    ScheduleVariant variant;
    SimResult sim;
    Breakdown split;
  };
  std::vector<Row> rows;
  for (ScheduleVariant variant : p.config.variants) {
    const SchedulePlan plan = make_schedule(p.graph, variant);
    SimResult sim = simulate(plan, p.costs, strategy);
    const Breakdown split = breakdown(sim);
    const std::string tag = to_string(variant);
    const fs::path out(p.config.output_dir);
    nlohmann::json report = sim_result_to_json(sim);
    report["variant"] = tag;
    report["strategy"] = strategy.degrees;
    report["breakdown"] = {{"comm_fraction", split.comm_fraction},
                           {"compute_fraction", split.compute_fraction},
                           {"idle_fraction", split.idle_fraction}};
    report["seed"] = p.config.seed;
    write_text_file(out / ("sim_" + tag + ".json"), report.dump(2) + "\n");
    write_chrome_trace(sim, plan, out / ("trace_" + tag + ".json"));
    write_svg_timeline(sim, plan, out / ("trace_" + tag + ".svg"));
    rows.push_back({variant, std::move(sim), split});
  }

  std::printf("%-10s %14s %9s %9s %9s %9s %10s\n", "variant", "makespan(s)", "comm%",
              "compute%", "idle%", "speedup", "peakmem(GB)");
  const double base = rows.front().sim.makespan;
  for (const Row& row : rows) {
    std::printf("%-10s %14s %8.1f%% %8.1f%% %8.1f%% %9s %11.2f\n", to_string(row.variant),
                fmt_seconds(row.sim.makespan).c_str(), 100.0 * row.split.comm_fraction,
                100.0 * row.split.compute_fraction, 100.0 * row.split.idle_fraction,
                fmt_ratio(row.sim.makespan > 0.0 ? base / row.sim.makespan : 1.0).c_str(),
                row.sim.peak_memory / 1e9);
  }
  return 0;
}

int cmd_plan(const CliOverrides& cli) {
  Pipeline p = build_pipeline(cli);
  ensure_out_dir(p.config);
  const PlanResult plan =
      solve(p.graph, p.costs, p.edges, p.config.hardware, budget_of(p), solve_options_of(p));
  nlohmann::json report = plan_result_to_json(plan);
  report["seed"] = p.config.seed;
  write_text_file(fs::path(p.config.output_dir) / "plan.json", report.dump(2) + "\n");
  std::printf("strategy        %s\n", run_length_notation(plan.strategy.degrees).c_str());
  std::printf("predicted time  %s s\n", fmt_seconds(plan.predicted_time).c_str());
  std::printf("predicted mem   %.2f GB\n", plan.predicted_memory / 1e9);
  std::printf("solve time      %.1f ms\n", plan.solve_time_ms);
  return 0;
}

int cmd_ablate(const CliOverrides& cli) {
  Pipeline p = build_pipeline(cli);
  ensure_out_dir(p.config);
  const Strategy strategy = resolve_strategy(p);

  // Canonical column order, restricted to the requested variants, then the
  // planner on top of the most overlapped schedule.
  std::vector<ScheduleVariant> order;
  for (ScheduleVariant v : {ScheduleVariant::Default, ScheduleVariant::IntraPass,
                            ScheduleVariant::CrossPass, ScheduleVariant::Oases}) {
    for (ScheduleVariant requested : p.config.variants) {
      if (requested == v) order.push_back(v);
    }
  }

  nlohmann::json table = nlohmann::json::array();
  std::printf("%-12s %14s %9s\n", "schedule", "makespan(s)", "speedup");
  double base = -1.0;
  for (ScheduleVariant variant : order) {
    const SimResult sim = simulate(make_schedule(p.graph, variant), p.costs, strategy);
    if (base < 0.0) base = sim.makespan;
    const double speedup = sim.makespan > 0.0 ? base / sim.makespan : 1.0;
    std::printf("%-12s %14s %9s\n", to_string(variant), fmt_seconds(sim.makespan).c_str(),
                fmt_ratio(speedup).c_str());
    table.push_back({{"schedule", to_string(variant)},
                     {"makespan", sim.makespan},
                     {"speedup", speedup},
                     {"strategy", strategy.degrees}});
  }
  PlanResult plan =
      solve(p.graph, p.costs, p.edges, p.config.hardware, budget_of(p), solve_options_of(p));
  const SimResult planned_sim =
      simulate(make_schedule(p.graph, ScheduleVariant::Oases), p.costs, plan.strategy);
  if (base < 0.0) base = planned_sim.makespan;
  const double speedup = planned_sim.makespan > 0.0 ? base / planned_sim.makespan : 1.0;
  std::printf("%-12s %14s %9s   %s\n", "+Planner", fmt_seconds(planned_sim.makespan).c_str(),
              fmt_ratio(speedup).c_str(), run_length_notation(plan.strategy.degrees).c_str());
  table.push_back({{"schedule", "+Planner"},
                   {"makespan", planned_sim.makespan},
                   {"speedup", speedup},
                   {"strategy", plan.strategy.degrees}});
  write_text_file(fs::path(p.config.output_dir) / "ablate.json", table.dump(2) + "\n");
  return 0;
}

int cmd_verify_numerics() {
  bool ok = true;
  std::printf("%-34s %12s %12s\n", "check", "deviation", "bound");
  for (int workers : {1, 2, 4, 8}) {
    const auto check = allreduce_grad_identity(workers, 8, 8, 1234u + workers);
    const bool pass = check.finite_difference_deviation < 1e-8;
    ok = ok && pass && check.autodiff_deviation == 0.0;
    std::printf("grad identity w=%-2d (vs fin.diff.)  %12.3e %12s %s\n", workers,
                check.finite_difference_deviation, "1e-8", pass ? "ok" : "FAIL");
  }
  for (int workers : {1, 2, 4}) {
    const auto model = make_toy_sharded_model(workers, 4, 6, 8 * workers, 77u + workers);
    const double consistency = sharded_output_deviation(model);
    const auto check = recompute_elision_equivalence(model);
    const bool pass = check.grad_deviation < 1e-10 && consistency < 1e-10 &&
                      check.loss_bit_identical;
    ok = ok && pass;
    std::printf("elision equivalence w=%-2d           %12.3e %12s %s\n", workers,
                check.grad_deviation, "1e-10", pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and planner for tensor-model-parallel transformer schedules"};
  app.require_subcommand(1);

  CliOverrides cli;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", cli.config_path, "run configuration JSON");
    if (needs_config) opt->required();
    sub->add_option("--out", cli.out_dir, "output directory (overrides config)");
    sub->add_option("--seed", cli.seed, "seed recorded in reports (overrides config)");
    sub->add_option("--variants", cli.variants, "comma-separated schedule variants");
    sub->add_option("--mem-granularity", cli.mem_granularity,
                    "planner memory granularity in bytes");
  };

  auto* sim_cmd = app.add_subcommand("simulate", "simulate the requested schedule variants");
  add_common(sim_cmd, true);
  auto* plan_cmd = app.add_subcommand("plan", "search for the best per-block TMP degrees");
  add_common(plan_cmd, true);
  auto* ablate_cmd = app.add_subcommand("ablate", "schedule-by-schedule comparison table");
  add_common(ablate_cmd, true);
  app.add_subcommand("verify-numerics", "check the gradient identities at toy scale");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return cmd_simulate(cli);
    if (plan_cmd->parsed()) return cmd_plan(cli);
    if (ablate_cmd->parsed()) return cmd_ablate(cli);
    return cmd_verify_numerics();
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
