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


// Regenerates the scenario fixtures under tests/fixtures: one trace, KPI
// series and descriptor per scenario, the lock golden export and a manifest
// of per-table row counts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "prismlike/collector/session.h"
#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"
#include "prismlike/sim/scenario.h"

namespace fs = std::filesystem;

namespace prismlike {
namespace {

absl::StatusOr<nlohmann::ordered_json> RowCounts(const MetricStore& store) {
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const std::string& table : MetricStore::TableNames()) {
    PL_ASSIGN_OR_RETURN(Table t, store.Select(fmt::format("SELECT COUNT(*) FROM {}", table)));
    counts[table] = std::get<int64_t>(t.rows.at(0).at(0));
  }
  return counts;
}

absl::Status Generate(const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path scratch = fs::temp_directory_path() / fmt::format("gen_scenarios.{}", getpid());
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
  for (const sim::Scenario& s : sim::AllScenarios()) {
    PL_RETURN_IF_ERROR(sim::WriteScenarioFixture(s, out_dir));
    SessionConfig config;
    config.source = SourceKind::kReplay;
    config.trace_path = fmt::format("{}/{}.trace.ndjson", out_dir, s.name);
    config.bootstrap_pids = s.bootstrap_pids;
    config.output_db_path = (scratch / (s.name + ".db3")).string();
    PL_ASSIGN_OR_RETURN(SessionSummary summary, RunReplaySession(config));
    PL_ASSIGN_OR_RETURN(auto store, MetricStore::OpenReadOnly(config.output_db_path));
    PL_ASSIGN_OR_RETURN(manifest[s.name], RowCounts(*store));
    if (s.name == "lock") {
      const std::string golden = out_dir + "/golden/lock";
      fs::create_directories(golden);
      PL_RETURN_IF_ERROR(store->ExportNdjson(golden));
    }
    fmt::print("{}: {} events, {} windows, {} threads\n", s.name, s.events.size(),
               summary.windows, summary.threads);
  }
  std::ofstream(out_dir + "/manifest.json", std::ios::trunc) << manifest.dump(2) << "\n";
  fs::remove_all(scratch);
  return absl::OkStatus();
}

}  // namespace
}  // namespace prismlike

int main(int argc, char** argv) {
  CLI::App app{"Regenerate scenario fixtures"};
  std::string out_dir = "tests/fixtures";
  app.add_option("out_dir", out_dir, "Fixture directory");
  CLI11_PARSE(app, argc, argv);
  if (absl::Status st = prismlike::Generate(out_dir); !st.ok()) {
    fmt::print(stderr, "gen_scenarios: {}\n", prismlike::StatusMessage(st));
    return 2;
  }
  return 0;
}
