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

#include "prismlike/core/model.h"

namespace prismlike {

// A process-level dependency found through a shared IPC resource. Peers
// outside the host have no tgid; they carry an "ip:port" endpoint instead.
struct DiscoveryEdge {
  int32_t from_tgid = 0;
  std::optional<int32_t> to_tgid;
  std::string to_external;
  Bri via;
  TimestampNs first_seen = 0;

  bool is_external() const { return !to_tgid.has_value(); }
  friend bool operator==(const DiscoveryEdge&, const DiscoveryEdge&) = default;
};

struct ProcessInfo {
  int32_t tgid = 0;
  std::string comm;
  TimestampNs first_seen = 0;
  std::optional<int32_t> parent_tgid;
  friend bool operator==(const ProcessInfo&, const ProcessInfo&) = default;
};

struct ThreadInfo {
  ThreadRef thread;
  TimestampNs first_seen = 0;
  friend bool operator==(const ThreadInfo&, const ThreadInfo&) = default;
};

// Half-open analysis range over window start timestamps.
struct TimeRange {
  TimestampNs start_ns = 0;
  TimestampNs end_ns = 0;

  bool empty() const { return end_ns <= start_ns; }
  bool Contains(TimestampNs ts) const { return ts >= start_ns && ts < end_ns; }
  friend auto operator<=>(const TimeRange&, const TimeRange&) = default;
};

}  // namespace prismlike
