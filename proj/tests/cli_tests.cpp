// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: exit codes, output files,
// and reproducibility of the written reports.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = TMPSIM_CLI_PATH;

struct RunResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "tmpsim_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd =
      std::string(kCli) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  result.out = slurp(out);
  result.err = slurp(err);
  return result;
}

fs::path write_config(const std::string& name, int global_batch = 4, int layers = 2,
                      const std::string& extra = "") {
  nlohmann::json j = {
      {"model",
       {{"hidden_size", 256},
        {"num_layers", layers},
        {"seq_len", 64},
        {"attention_heads", 4},
        {"global_batch", global_batch},
        {"bytes_per_element", 2},
        {"recompute_enabled", true}}},
      {"hardware", "3090"},
      {"variants", {"Default", "Oases"}},
      {"strategy", 4},
      {"seed", 1}};
  if (!extra.empty()) {
    const nlohmann::json patch = nlohmann::json::parse(extra);
    j.update(patch);
  }
  const fs::path path = work_dir() / name;
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

std::string slurp_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("simulate writes reports, traces, and a comparison table") {
  const auto config = write_config("sim_config.json");
  const fs::path out = work_dir() / "sim_out";
  const auto r = run_cli("simulate --config " + config.string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("speedup") != std::string::npos);
  for (const char* tag : {"Default", "Oases"}) {
    CHECK(fs::exists(out / (std::string("sim_") + tag + ".json")));
    CHECK(fs::exists(out / (std::string("trace_") + tag + ".json")));
    CHECK(fs::exists(out / (std::string("trace_") + tag + ".svg")));
  }
  const auto report = nlohmann::json::parse(slurp_file(out / "sim_Oases.json"));
  CHECK(report.at("makespan").get<double>() > 0.0);
  CHECK(report.at("breakdown").contains("comm_fraction"));
}

TEST_CASE("an odd global batch fails with a diagnostic naming the field") {
  const auto config = write_config("bad_config.json", /*global_batch=*/5);
  const auto r = run_cli("simulate --config " + config.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("global_batch") != std::string::npos);
}

TEST_CASE("a missing config file is an io error") {
  const auto r = run_cli("simulate --config /nonexistent/nope.json");
  CHECK(r.exit_code == 4);
}

TEST_CASE("an impossible memory budget reports infeasibility") {
  const auto config = write_config("infeasible.json", 4, 2, R"({"budget": 1, "strategy": "plan"})");
  const auto r = run_cli("plan --config " + config.string() + " --out " +
                         (work_dir() / "plan_infeasible").string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("infeasible") != std::string::npos);
}

TEST_CASE("plan writes the strategy in run-length form") {
  const auto config = write_config("plan_config.json", 4, 2, R"({"strategy": "plan"})");
  const fs::path out = work_dir() / "plan_out";
  const auto r = run_cli("plan --config " + config.string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  const auto report = nlohmann::json::parse(slurp_file(out / "plan.json"));
  CHECK(report.at("degrees").size() == 4);
  CHECK(report.at("run_length").get<std::string>().front() == '[');
  CHECK(report.contains("solve_time_ms"));
}

TEST_CASE("ablate emits one row per requested variant plus the planner row") {
  const auto config =
      write_config("ablate_config.json", 4, 2,
                   R"({"variants": ["Default", "IntraPass", "CrossPass", "Oases"]})");
  const fs::path out = work_dir() / "ablate_out";
  const auto r = run_cli("ablate --config " + config.string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  const auto table = nlohmann::json::parse(slurp_file(out / "ablate.json"));
  REQUIRE(table.size() == 5);
  CHECK(table.back().at("schedule") == "+Planner");
  // Speedups never decrease along the column order.
  double prev = 0.0;
  for (const auto& row : table) {
    CHECK(row.at("speedup").get<double>() >= prev - 1e-9);
    prev = row.at("speedup").get<double>();
  }
}

TEST_CASE("with free communication every schedule speeds up by exactly 1.00x") {
  // Zero out the measured communication costs; nothing is left to hide, and
  // the planner has no reason to deviate from the configured max degree.
  nlohmann::json rows = nlohmann::json::array();
  for (int block = 0; block < 2; ++block) {
    for (int degree : {2, 4, 8}) {
      for (const char* field : {"c_fwd", "c_bwd"}) {
        rows.push_back({{"block_index", block},
                        {"degree", degree},
                        {"field", field},
                        {"seconds_or_bytes", 0.0}});
      }
    }
  }
  const fs::path table = work_dir() / "zero_comm.json";
  std::ofstream(table) << rows.dump();
  const auto config = write_config(
      "zero_comm_config.json", 4, 1,
      R"({"variants": ["Default", "IntraPass", "CrossPass", "Oases"], "strategy": 8,
          "measured_costs": ")" +
          table.string() + R"("})");
  const fs::path out = work_dir() / "zero_comm_out";
  REQUIRE(run_cli("ablate --config " + config.string() + " --out " + out.string()).exit_code ==
          0);
  const auto result = nlohmann::json::parse(slurp_file(out / "ablate.json"));
  REQUIRE(result.size() == 5);
  for (const auto& row : result) {
    CHECK(row.at("speedup").get<double>() == doctest::Approx(1.0));
  }
}

TEST_CASE("repeated runs with a fixed seed are byte-identical") {
  const auto config = write_config("det_config.json");
  const fs::path out_a = work_dir() / "det_a";
  const fs::path out_b = work_dir() / "det_b";
  REQUIRE(run_cli("simulate --config " + config.string() + " --out " + out_a.string())
              .exit_code == 0);
  REQUIRE(run_cli("simulate --config " + config.string() + " --out " + out_b.string())
              .exit_code == 0);
  for (const char* name : {"sim_Default.json", "sim_Oases.json", "trace_Default.json",
                           "trace_Oases.json", "trace_Oases.svg"}) {
    CHECK(slurp_file(out_a / name) == slurp_file(out_b / name));
  }
}

TEST_CASE("verify-numerics succeeds") {
  const auto r = run_cli("verify-numerics");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("ok") != std::string::npos);
}

TEST_CASE("unknown variants are rejected via the flag") {
  const auto config = write_config("variant_config.json");
  const auto r = run_cli("simulate --config " + config.string() + " --variants Bogus");
  CHECK(r.exit_code == 2);
}
