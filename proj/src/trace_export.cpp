// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "tmpsim/trace_export.hpp"

#include <fstream>
#include <string>

#include "tmpsim/errors.hpp"

namespace tmpsim {
namespace {

std::string event_name(const SimResult&, const SchedulePlan& plan, const TraceEvent& ev) {
  if (ev.op_id >= plan.total_ops()) return "Reshard";
  const ScheduledOp& op = plan.op(ev.op_id);
  std::string name = to_string(op.kind);
  name += " b" + std::to_string(op.block);
  if (plan.split_batch) name += " s" + std::to_string(op.sub_batch);
  return name;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_chrome_trace(const SimResult& result, const SchedulePlan& plan,
                        const std::filesystem::path& path) {
  nlohmann::json events = nlohmann::json::array();
  for (const TraceEvent& ev : result.trace) {
    events.push_back({{"name", event_name(result, plan, ev)},
                      {"cat", ev.stream == Stream::Compute ? "compute" : "comm"},
                      {"ph", "X"},
                      {"ts", ev.start * 1e6},
                      {"dur", (ev.end - ev.start) * 1e6},
                      {"pid", 0},
                      {"tid", ev.stream == Stream::Compute ? 0 : 1},
                      {"args", {{"op_id", ev.op_id}}}});
  }
  auto out = open_out(path);
  out << events.dump(1) << "\n";
}

void write_svg_timeline(const SimResult& result, const SchedulePlan& plan,
                        const std::filesystem::path& path) {
  const double width = 1200.0, row_h = 48.0, pad = 40.0;
  const double span = result.makespan > 0.0 ? result.makespan : 1.0;
  const double sx = (width - 2 * pad) / span;
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << (2 * row_h + 3 * pad) << "\">\n";
  out << "<text x=\"" << pad << "\" y=\"" << pad - 18 << "\" font-size=\"13\">"
      << to_string(plan.variant) << " makespan " << result.makespan << " s</text>\n";
  const char* row_label[2] = {"compute", "comm"};
  for (int row = 0; row < 2; ++row) {
    out << "<text x=\"2\" y=\"" << (pad + row * (row_h + pad) + row_h / 2)
        << "\" font-size=\"11\">" << row_label[row] << "</text>\n";
  }
  for (const TraceEvent& ev : result.trace) {
    const int row = ev.stream == Stream::Compute ? 0 : 1;
    const char* fill = "#4878cf";
    if (ev.stream == Stream::Comm) fill = "#d65f5f";
    if (ev.op_id >= plan.total_ops()) {
      fill = "#b47cc7";  // resharding
    } else if (plan.op(ev.op_id).pass == Pass::Recompute) {
      fill = "#6acc65";
    } else if (plan.op(ev.op_id).pass == Pass::Backward &&
               ev.stream == Stream::Compute) {
      fill = "#356ba5";
    }
    out << "<rect x=\"" << (pad + ev.start * sx) << "\" y=\""
        << (pad + row * (row_h + pad)) << "\" width=\""
        << std::max(0.5, (ev.end - ev.start) * sx) << "\" height=\"" << row_h
        << "\" fill=\"" << fill << "\" stroke=\"white\" stroke-width=\"0.4\">"
        << "<title>" << event_name(result, plan, ev) << " [" << ev.start << ", "
        << ev.end << "]</title></rect>\n";
  }
  out << "</svg>\n";
}

nlohmann::json sim_result_to_json(const SimResult& result) {
  nlohmann::json trace = nlohmann::json::array();
  for (const TraceEvent& ev : result.trace) {
    trace.push_back({{"op_id", ev.op_id},
                     {"stream", to_string(ev.stream)},
                     {"start", ev.start},
                     {"end", ev.end}});
  }
  return {{"makespan", result.makespan},
          {"compute_busy_fraction", result.compute_busy_fraction},
          {"comm_exposed", result.comm_exposed},
          {"peak_memory", result.peak_memory},
          {"trace", trace}};
}

}  // namespace tmpsim
