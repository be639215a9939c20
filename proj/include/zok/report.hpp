// Copyright 2026 The zok Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "zok/metrics.hpp"

namespace zok::cli {

enum class ReportFormat { kJson, kText };

ReportFormat parse_report_format(const std::string& text);

// Stage name and wall-clock seconds, in execution order.
using Timings = std::vector<std::pair<std::string, double>>;

// Rounds to 4 decimals; NaN and undefined values become null.
nlohmann::json report_number(double v);

nlohmann::json seg_report_json(const metrics::SegScores& scores, const Timings& timings = {});
nlohmann::json depth_report_json(const metrics::DepthScores& scores);

// Aligned two-column table of a flat report; arrays expand to one row per
// entry.
std::string render_text(const nlohmann::json& report);
std::string render(const nlohmann::json& report, ReportFormat format);

// Writes to `path`, or returns the rendered text when `path` is empty.
std::string report_emit(const nlohmann::json& report, const std::filesystem::path& path,
                        ReportFormat format);

}  // namespace zok::cli
