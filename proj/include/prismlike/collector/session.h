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

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/collector/discovery.h"
#include "prismlike/core/model.h"
#include "prismlike/engine/metric_engine.h"
#include "prismlike/store/metric_store.h"

namespace prismlike {

enum class SourceKind { kLive, kReplay };

struct SessionConfig {
  SourceKind source = SourceKind::kReplay;
  // Live: processes to start from. Replay: optional; empty monitors every
  // process in the trace.
  std::vector<int32_t> bootstrap_pids;
  std::string trace_path;
  DurationNs window_ns = kDefaultWindowNs;
  std::string output_db_path;
  size_t max_bris_per_thread = kDefaultMaxBrisPerThread;
  // Live only. Unset runs until the stop flag is raised; zero stops at once.
  std::optional<DurationNs> duration;
  // Live only. Also write every event to this trace file.
  std::string tee_trace_path;
};

absl::Status ValidateSessionConfig(const SessionConfig& config);

struct SessionSummary {
  int64_t windows = 0;
  int64_t threads = 0;
  int64_t events = 0;
  int64_t processes = 0;
  int64_t edges = 0;
  // Events rejected for arriving out of order (live sources only).
  int64_t out_of_order = 0;
  EngineDiagnostics engine;
};

// The single ingestion sequence: discovery, then the metric engine, then the
// store, one closed window per append.
class Session {
 public:
  static absl::StatusOr<std::unique_ptr<Session>> Create(const SessionConfig& config);

  // Replay sources fail on out-of-order events; live ones drop and count.
  absl::Status Ingest(const KernelEvent& event);
  // Closes and stores windows ending at or before `ts`.
  absl::Status AdvanceTo(TimestampNs ts);
  // Flushes everything. `end_ts` defaults to the last event's timestamp.
  absl::StatusOr<SessionSummary> Finish(std::optional<TimestampNs> end_ts = std::nullopt);

  const ProcessDiscovery& discovery() const { return discovery_; }
  const MetricStore& store() const { return *store_; }

 private:
  explicit Session(const SessionConfig& config);
  absl::Status Flush();
  void NoteProcess(const KernelEvent& event);

  SessionConfig config_;
  std::unique_ptr<MetricStore> store_;
  ProcessDiscovery discovery_;
  MetricEngine engine_;
  SessionSummary summary_;
  std::optional<TimestampNs> last_ts_;

  struct Seen {
    std::string comm;
    TimestampNs first_seen = 0;
    bool main_thread = false;
  };
  std::map<int32_t, Seen> seen_;
  std::map<int32_t, int32_t> parent_of_;
  std::set<int32_t> recorded_;
  std::set<int32_t> threads_;
  std::vector<DiscoveryEdge> pending_edges_;
};

// Runs a replay session to completion. Live sessions go through RunLiveSession.
absl::StatusOr<SessionSummary> RunReplaySession(const SessionConfig& config);

// Runs a live session until the duration elapses or `stop` becomes true.
absl::StatusOr<SessionSummary> RunLiveSession(const SessionConfig& config,
                                              const std::atomic<bool>& stop);

absl::StatusOr<SessionSummary> RunSession(const SessionConfig& config,
                                          const std::atomic<bool>& stop);

}  // namespace prismlike
