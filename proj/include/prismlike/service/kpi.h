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


#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <absl/status/statusor.h>

#include "json.hpp"
#include "prismlike/analyzer/stats.h"
#include "prismlike/core/records.h"

namespace prismlike {

// A target metric series uploaded by the analyst, e.g. p95 latency per second.
struct KpiSeries {
  std::string name = "kpi";
  std::string unit;
  // Added to every point to align with the store clock.
  int64_t offset_ns = 0;
  // Ascending timestamps in ns on the store clock, offset applied.
  std::vector<std::pair<TimestampNs, double>> points;
};

inline constexpr size_t kMaxKpiBytes = 4 << 20;

// CSV with a "ts,value" header; ts is seconds (fractions allowed).
absl::StatusOr<KpiSeries> ParseKpiCsv(std::string_view text);

// {"name", "unit", "offset_ns", "points": [[ts_ns, value], ...] or
// [{"ts": ns, "value": v}, ...]}.
absl::StatusOr<KpiSeries> ParseKpiJson(const nlohmann::json& j);

nlohmann::ordered_json ToJson(const KpiSeries& kpi);

struct KpiSplit {
  TimeRange baseline;
  TimeRange compare;
  ChangePoint change;
};

// Suggests baseline/compare ranges around the strongest mean shift. Only a
// suggestion: flags are never derived from it.
std::optional<KpiSplit> SuggestSplit(const KpiSeries& kpi);

// "a..b" in seconds, fractions allowed, into a half-open ns range.
absl::StatusOr<TimeRange> ParseSecondsRange(std::string_view text);

}  // namespace prismlike
