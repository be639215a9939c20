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

#include "zok/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "zok/error.hpp"

namespace zok::cli {

namespace {

std::string cell(const nlohmann::json& v) {
  if (v.is_null()) return "-";
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void collect_rows(const std::string& prefix, const nlohmann::json& v,
                  std::vector<std::pair<std::string, std::string>>& rows) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      collect_rows(prefix.empty() ? it.key() : prefix + "." + it.key(), it.value(), rows);
    }
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      collect_rows(prefix + "[" + std::to_string(i) + "]", v[i], rows);
    }
  } else {
    rows.emplace_back(prefix, cell(v));
  }
}

}  // namespace

ReportFormat parse_report_format(const std::string& text) {
  if (text == "json") return ReportFormat::kJson;
  if (text == "text") return ReportFormat::kText;
  fail("unknown report format '" + text + "' (expected json or text)");
}

nlohmann::json report_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::round(v * 1e4) / 1e4;
}

nlohmann::json seg_report_json(const metrics::SegScores& scores, const Timings& timings) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& v : scores.per_class_iou) {
    per_class.push_back(v ? report_number(*v) : nlohmann::json(nullptr));
  }
  nlohmann::json out = nlohmann::json::object();
  out["mIoU"] = report_number(scores.mean_iou);
  out["per_class_iou"] = per_class;
  out["pixel_acc"] = report_number(scores.pixel_accuracy);
  out["class_acc"] = report_number(scores.class_accuracy);
  if (!timings.empty()) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [stage, seconds] : timings) t[stage] = report_number(seconds);
    out["timings"] = t;
  }
  return out;
}

nlohmann::json depth_report_json(const metrics::DepthScores& s) {
  return {{"rmse_lin", report_number(s.rmse_lin)}, {"rmse_log", report_number(s.rmse_log)},
          {"abs_rel", report_number(s.abs_rel)},   {"sqr_rel", report_number(s.sqr_rel)},
          {"delta1", report_number(s.delta1)},     {"delta2", report_number(s.delta2)},
          {"delta3", report_number(s.delta3)},     {"valid_pixels", s.valid_pixels}};
}

std::string render_text(const nlohmann::json& report) {
  std::vector<std::pair<std::string, std::string>> rows;
  collect_rows("", report, rows);
  std::size_t width = 6;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::ostringstream os;
  os << "metric" << std::string(width - 6 + 2, ' ') << "value\n";
  for (const auto& [k, v] : rows) os << k << std::string(width - k.size() + 2, ' ') << v << "\n";
  return os.str();
}

std::string render(const nlohmann::json& report, ReportFormat format) {
  return format == ReportFormat::kJson ? report.dump(2) + "\n" : render_text(report);
}

std::string report_emit(const nlohmann::json& report, const std::filesystem::path& path,
                        ReportFormat format) {
  const std::string text = render(report, format);
  if (!path.empty()) {
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }
  return text;
}

}  // namespace zok::cli
