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

#include <map>
#include <string>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/collector/session.h"

namespace prismlike::testing {

// Directory holding the committed scenario fixtures.
std::string FixtureDir();
std::string FixturePath(const std::string& file);

// Whole-file read; empty string on failure.
std::string ReadFileBytes(const std::string& path);

// Every regular file in `dir` keyed by file name.
std::map<std::string, std::string> ReadDirBytes(const std::string& dir);

// Replays the named fixture (e.g. "lock") into `db_path` with the fixture's
// bootstrap pids.
absl::StatusOr<SessionSummary> ReplayFixture(const std::string& name, const std::string& db_path);

// Fixture descriptor fields.
struct FixtureInfo {
  std::vector<int32_t> bootstrap_pids;
  TimeRange baseline;
  TimeRange compare;
};
absl::StatusOr<FixtureInfo> LoadFixtureInfo(const std::string& name);

}  // namespace prismlike::testing
