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


#include <fstream>

#include <fmt/format.h>

#include "json.hpp"
#include "prismlike/collector/trace_codec.h"
#include "prismlike/core/status_macros.h"
#include "prismlike/sim/scenario.h"

namespace prismlike::sim {

namespace {

absl::Status WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(fmt::format("cannot write {}", path));
  out << text;
  out.close();
  if (!out) return absl::DataLossError(fmt::format("short write to {}", path));
  return absl::OkStatus();
}

nlohmann::ordered_json RangeJson(const TimeRange& r) {
  return {{"start", r.start_ns}, {"end", r.end_ns}};
}

}  // namespace

std::string KpiCsv(const Scenario& scenario) {
  std::string out = "ts,value\n";
  for (const auto& [ts, value] : scenario.kpi) {
    out += fmt::format("{:.3f},{:.3f}\n", static_cast<double>(ts) / kNanosPerSecond, value);
  }
  return out;
}

absl::Status WriteScenarioFixture(const Scenario& scenario, const std::string& dir) {
  const std::string base = fmt::format("{}/{}", dir, scenario.name);
  PL_RETURN_IF_ERROR(WriteTraceFile(base + ".trace.ndjson", scenario.events));
  PL_RETURN_IF_ERROR(WriteText(base + ".kpi.csv", KpiCsv(scenario)));
  nlohmann::ordered_json meta = {
      {"name", scenario.name},
      {"description", scenario.description},
      {"bootstrap_pids", scenario.bootstrap_pids},
      {"baseline", RangeJson(scenario.baseline)},
      {"compare", RangeJson(scenario.compare)},
      {"events", scenario.events.size()},
  };
  return WriteText(base + ".json", meta.dump(2) + "\n");
}

}  // namespace prismlike::sim
