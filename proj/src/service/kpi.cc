/*
 * Copyright 2026 The Prismlike Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */


#include "prismlike/service/kpi.h"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "prismlike/core/strings.h"

namespace prismlike {

namespace {

absl::StatusOr<double> ParseDouble(std::string_view text) {
  const std::string s(Trim(text));
  if (s.empty()) return absl::InvalidArgumentError("empty number");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) {
    return absl::InvalidArgumentError(fmt::format("bad number '{}'", s));
  }
  return v;
}

TimestampNs SecondsToNs(double s) { return std::llround(s * static_cast<double>(kNanosPerSecond)); }

absl::Status CheckAscending(const KpiSeries& kpi) {
  for (size_t i = 1; i < kpi.points.size(); ++i) {
    if (kpi.points[i].first <= kpi.points[i - 1].first) {
      return absl::InvalidArgumentError(fmt::format("kpi point {} is not after its predecessor", i));
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<KpiSeries> ParseKpiCsv(std::string_view text) {
  KpiSeries kpi;
  bool header = false;
  int line_no = 0;
  for (std::string_view line : Split(text, '\n')) {
    ++line_no;
    line = Trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != "ts,value") {
        return absl::InvalidArgumentError("kpi csv must start with the header ts,value");
      }
      header = true;
      continue;
    }
    const std::vector<std::string_view> cells = Split(line, ',');
    if (cells.size() != 2) {
      return absl::InvalidArgumentError(fmt::format("kpi line {}: expected 2 fields", line_no));
    }
    auto ts = ParseDouble(cells[0]);
    auto value = ParseDouble(cells[1]);
    if (!ts.ok() || !value.ok()) {
      return absl::InvalidArgumentError(
          fmt::format("kpi line {}: {}", line_no, StatusMessage(ts.ok() ? value.status()
                                                                        : ts.status())));
    }
    kpi.points.emplace_back(SecondsToNs(*ts), *value);
  }
  if (!header) return absl::InvalidArgumentError("kpi csv is empty");
  if (absl::Status st = CheckAscending(kpi); !st.ok()) return st;
  return kpi;
}

absl::StatusOr<KpiSeries> ParseKpiJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("points") || !j["points"].is_array()) {
    return absl::InvalidArgumentError("kpi json needs a points array");
  }
  KpiSeries kpi;
  if (j.contains("name") && j["name"].is_string()) kpi.name = j["name"];
  if (j.contains("unit") && j["unit"].is_string()) kpi.unit = j["unit"];
  if (j.contains("offset_ns")) {
    if (!j["offset_ns"].is_number_integer()) {
      return absl::InvalidArgumentError("offset_ns must be an integer");
    }
    kpi.offset_ns = j["offset_ns"];
  }
  for (const auto& p : j["points"]) {
    nlohmann::json ts, value;
    if (p.is_array() && p.size() == 2) {
      ts = p[0];
      value = p[1];
    } else if (p.is_object() && p.contains("ts") && p.contains("value")) {
      ts = p["ts"];
      value = p["value"];
    }
    if (!ts.is_number_integer() || !value.is_number()) {
      return absl::InvalidArgumentError("kpi points are [ts_ns, value] pairs");
    }
    kpi.points.emplace_back(ts.get<int64_t>() + kpi.offset_ns, value.get<double>());
  }
  if (absl::Status st = CheckAscending(kpi); !st.ok()) return st;
  return kpi;
}

nlohmann::ordered_json ToJson(const KpiSeries& kpi) {
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& [ts, v] : kpi.points) points.push_back({{"ts", ts}, {"value", v}});
  nlohmann::ordered_json out = {{"name", kpi.name},
                                {"unit", kpi.unit},
                                {"offset_ns", kpi.offset_ns},
                                {"points", std::move(points)}};
  if (auto split = SuggestSplit(kpi)) {
    out["suggestion"] = {
        {"baseline", {{"start", split->baseline.start_ns}, {"end", split->baseline.end_ns}}},
        {"compare", {{"start", split->compare.start_ns}, {"end", split->compare.end_ns}}},
        {"t_statistic", split->change.t_statistic}};
  }
  return out;
}

std::optional<KpiSplit> SuggestSplit(const KpiSeries& kpi) {
  std::vector<double> values;
  for (const auto& [ts, v] : kpi.points) values.push_back(v);
  auto cp = FindChangePoint(values);
  if (!cp) return std::nullopt;
  const TimestampNs step =
      kpi.points.size() > 1 ? kpi.points[1].first - kpi.points[0].first : kNanosPerSecond;
  KpiSplit split;
  split.change = *cp;
  split.baseline = {kpi.points.front().first, kpi.points[cp->index].first};
  split.compare = {kpi.points[cp->index].first, kpi.points.back().first + step};
  return split;
}

absl::StatusOr<TimeRange> ParseSecondsRange(std::string_view text) {
  const size_t sep = text.find("..");
  if (sep == std::string_view::npos) {
    return absl::InvalidArgumentError(fmt::format("range '{}' is not of the form a..b", text));
  }
  auto a = ParseDouble(text.substr(0, sep));
  auto b = ParseDouble(text.substr(sep + 2));
  if (!a.ok() || !b.ok()) {
    return absl::InvalidArgumentError(fmt::format("range '{}' has a bad bound", text));
  }
  TimeRange r{SecondsToNs(*a), SecondsToNs(*b)};
  if (r.empty()) return absl::InvalidArgumentError(fmt::format("range '{}' is empty or inverted", text));
  return r;
}

}  // namespace prismlike
