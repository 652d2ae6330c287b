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
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <absl/status/statusor.h>

#include "json.hpp"
#include "prismlike/core/records.h"
#include "prismlike/store/metric_store.h"

namespace prismlike {

enum class DynNodeKind : uint8_t { kThread, kFutex, kPipe, kSocket, kEpoll, kDevice, kExternal };
enum class DynEdgeKind : uint8_t {
  kWaitsOn,
  kWakes,
  kWrites,
  kReads,
  kSchedules,
  kRegisteredIn,
  kIoTo,
};

std::string_view DynNodeKindName(DynNodeKind kind);
std::string_view DynEdgeKindName(DynEdgeKind kind);

struct DynNode {
  // "tid:<n>" for threads, the bri_key for resources, "external:<endpoint>".
  std::string id;
  DynNodeKind kind = DynNodeKind::kThread;
  // t1, f1, p1, s1, e1, d1, x1: per-kind counters in order of first appearance.
  std::string alias;
  std::optional<ThreadRef> thread;
};

struct DynEdge {
  std::string from;
  std::string to;
  DynEdgeKind kind = DynEdgeKind::kWaitsOn;
  // Nanoseconds, counts or sectors depending on `unit`.
  int64_t weight = 0;
  std::string_view unit;
};

struct ThreadDynamicsGraph {
  TimeRange range;
  std::vector<DynNode> nodes;
  std::vector<DynEdge> edges;

  const DynNode* FindNode(std::string_view id) const;
  const DynNode* FindByAlias(std::string_view alias) const;
  bool HasEdge(std::string_view from, std::string_view to, DynEdgeKind kind) const;
};

struct GraphOptions {
  // Edges below both thresholds for their unit are dropped, and resource
  // nodes left without edges with them.
  DurationNs min_time_ns = 1'000'000;
  int64_t min_count = 1;
};

// Threads with samples in `range` (restricted to `tgids` unless empty), the
// resources they touched and the interaction edges between them. Edge
// direction: waits_on and wakes point thread -> resource, writes thread ->
// resource, reads resource -> thread, schedules waker -> waiter,
// registered_in file -> epoll, io_to thread -> device and socket -> external.
absl::StatusOr<ThreadDynamicsGraph> BuildThreadGraph(const MetricStore& store,
                                                     const TimeRange& range,
                                                     const std::set<int32_t>& tgids = {},
                                                     const GraphOptions& options = {});

struct ProcessNode {
  // "pid:<tgid>" or "external:<endpoint>".
  std::string id;
  bool external = false;
  int32_t tgid = 0;
  std::string comm;
  std::optional<int32_t> parent_tgid;
  TimestampNs first_seen = 0;
};

struct ProcessEdge {
  std::string from;
  std::string to;
  std::string via;
  TimestampNs first_seen = 0;
};

struct ProcessGraph {
  std::vector<ProcessNode> nodes;
  std::vector<ProcessEdge> edges;
};

// Processes and discovery edges known by the end of `range`; all of them
// when `range` is unset.
absl::StatusOr<ProcessGraph> BuildProcessGraph(const MetricStore& store,
                                               const std::optional<TimeRange>& range = {});

nlohmann::ordered_json ToJson(const ThreadDynamicsGraph& graph);
nlohmann::ordered_json ToJson(const ProcessGraph& graph);

}  // namespace prismlike
