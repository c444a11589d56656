// Copyright 2026 The tmpsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "tmpsim/schedule.hpp"
#include "tmpsim/sim.hpp"

namespace tmpsim {

/// Chrome trace event format: a JSON array of complete ("ph":"X") events
/// with microsecond timestamps, one tid per stream.
void write_chrome_trace(const SimResult& result, const SchedulePlan& plan,
                        const std::filesystem::path& path);

/// Two-row rectangle timeline.
void write_svg_timeline(const SimResult& result, const SchedulePlan& plan,
                        const std::filesystem::path& path);

nlohmann::json sim_result_to_json(const SimResult& result);

}  // namespace tmpsim
