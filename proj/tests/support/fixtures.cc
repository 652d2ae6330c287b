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


#include "tests/support/fixtures.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "prismlike/core/status_macros.h"

namespace prismlike::testing {

std::string FixtureDir() { return PRISMLIKE_FIXTURE_DIR; }

std::string FixturePath(const std::string& file) { return FixtureDir() + "/" + file; }

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::map<std::string, std::string> ReadDirBytes(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[entry.path().filename().string()] = ReadFileBytes(entry.path().string());
    }
  }
  return files;
}

absl::StatusOr<FixtureInfo> LoadFixtureInfo(const std::string& name) {
  std::ifstream in(FixturePath(name + ".json"));
  if (!in) return absl::NotFoundError("no fixture " + name);
  const nlohmann::json j = nlohmann::json::parse(in);
  FixtureInfo info;
  info.bootstrap_pids = j.at("bootstrap_pids").get<std::vector<int32_t>>();
  info.baseline = {j["baseline"]["start"].get<int64_t>(), j["baseline"]["end"].get<int64_t>()};
  info.compare = {j["compare"]["start"].get<int64_t>(), j["compare"]["end"].get<int64_t>()};
  return info;
}

absl::StatusOr<SessionSummary> ReplayFixture(const std::string& name, const std::string& db_path) {
  PL_ASSIGN_OR_RETURN(FixtureInfo info, LoadFixtureInfo(name));
  SessionConfig config;
  config.source = SourceKind::kReplay;
  config.trace_path = FixturePath(name + ".trace.ndjson");
  config.bootstrap_pids = info.bootstrap_pids;
  config.output_db_path = db_path;
  return RunReplaySession(config);
}

}  // namespace prismlike::testing
