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


#include "prismlike/collector/session.h"

#include <algorithm>

#include "prismlike/collector/trace_codec.h"
#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"

namespace prismlike {

absl::Status ValidateSessionConfig(const SessionConfig& config) {
  if (config.window_ns <= 0) return absl::InvalidArgumentError("window_ns must be positive");
  if (config.output_db_path.empty()) return absl::InvalidArgumentError("no output store path");
  if (config.max_bris_per_thread == 0) {
    return absl::InvalidArgumentError("max_bris_per_thread must be positive");
  }
  if (config.source == SourceKind::kLive && config.bootstrap_pids.empty()) {
    return absl::InvalidArgumentError("live sessions need at least one bootstrap pid");
  }
  if (config.source == SourceKind::kReplay && config.trace_path.empty()) {
    return absl::InvalidArgumentError("replay sessions need a trace path");
  }
  for (int32_t pid : config.bootstrap_pids) {
    if (pid <= 0) return absl::InvalidArgumentError(StrCat("bad pid ", pid));
  }
  if (config.duration && *config.duration < 0) {
    return absl::InvalidArgumentError("duration must not be negative");
  }
  return absl::OkStatus();
}

Session::Session(const SessionConfig& config)
    : config_(config), discovery_(config.bootstrap_pids), engine_(config.window_ns) {
  engine_.SetMaxBrisPerThread(config.max_bris_per_thread);
  engine_.SetMonitorFilter([this](int32_t tgid) { return discovery_.IsMonitored(tgid); });
}

absl::StatusOr<std::unique_ptr<Session>> Session::Create(const SessionConfig& config) {
  PL_RETURN_IF_ERROR(ValidateSessionConfig(config));
  auto session = std::unique_ptr<Session>(new Session(config));
  StoreMeta meta{config.window_ns, config.source == SourceKind::kLive ? "live" : "replay"};
  PL_ASSIGN_OR_RETURN(session->store_, MetricStore::Create(config.output_db_path, meta));
  return session;
}

void Session::NoteProcess(const KernelEvent& event) {
  const ThreadRef& t = event.thread;
  auto [it, inserted] = seen_.try_emplace(t.tgid, Seen{t.comm, event.ts, t.tid == t.tgid});
  if (!inserted && !it->second.main_thread && t.tid == t.tgid) {
    it->second.comm = t.comm;
    it->second.main_thread = true;
  }
}

absl::Status Session::Ingest(const KernelEvent& event) {
  if (last_ts_ && event.ts < *last_ts_) {
    if (config_.source == SourceKind::kLive) {
      ++summary_.out_of_order;
      return absl::OkStatus();
    }
    return absl::FailedPreconditionError(
        StrCat("OrderViolation: event at ", event.ts, " after ", *last_ts_));
  }
  last_ts_ = event.ts;
  ++summary_.events;
  NoteProcess(event);
  for (DiscoveryEdge& e : discovery_.Observe(event)) {
    if (e.to_tgid && !parent_of_.contains(*e.to_tgid) &&
        std::find(config_.bootstrap_pids.begin(), config_.bootstrap_pids.end(), *e.to_tgid) ==
            config_.bootstrap_pids.end()) {
      parent_of_[*e.to_tgid] = e.from_tgid;
    }
    pending_edges_.push_back(std::move(e));
  }
  PL_RETURN_IF_ERROR(engine_.Observe(event));
  return Flush();
}

absl::Status Session::AdvanceTo(TimestampNs ts) {
  if (last_ts_ && ts < *last_ts_) return absl::OkStatus();
  PL_RETURN_IF_ERROR(engine_.AdvanceTo(ts));
  return Flush();
}

absl::Status Session::Flush() {
  std::vector<WindowSamples> closed = engine_.TakeClosedWindows();
  if (closed.empty()) return absl::OkStatus();
  for (size_t i = 0; i < closed.size(); ++i) {
    AppendBatch batch;
    batch.windows = {closed[i].window};
    batch.samples = std::move(closed[i].samples);
    for (const MetricSample& s : batch.samples) {
      if (s.thread) threads_.insert(s.thread->tid);
    }
    if (i + 1 == closed.size()) {
      for (int32_t tgid : discovery_.monitored()) {
        if (recorded_.contains(tgid)) continue;
        auto seen = seen_.find(tgid);
        if (seen == seen_.end()) continue;
        std::optional<int32_t> parent;
        if (auto p = parent_of_.find(tgid); p != parent_of_.end()) parent = p->second;
        batch.processes.push_back(
            ProcessInfo{tgid, seen->second.comm, seen->second.first_seen, parent});
        recorded_.insert(tgid);
      }
      batch.edges = std::move(pending_edges_);
      pending_edges_.clear();
    }
    summary_.processes += static_cast<int64_t>(batch.processes.size());
    summary_.edges += static_cast<int64_t>(batch.edges.size());
    ++summary_.windows;
    PL_RETURN_IF_ERROR(store_->Append(batch));
  }
  return absl::OkStatus();
}

absl::StatusOr<SessionSummary> Session::Finish(std::optional<TimestampNs> end_ts) {
  if (end_ts || last_ts_) engine_.Finish(end_ts.value_or(*last_ts_));
  PL_RETURN_IF_ERROR(Flush());
  AppendBatch tail;
  for (DiscoveryEdge& e : discovery_.Finish()) pending_edges_.push_back(std::move(e));
  tail.edges = std::move(pending_edges_);
  pending_edges_.clear();
  std::set<int32_t> remaining(config_.bootstrap_pids.begin(), config_.bootstrap_pids.end());
  remaining.insert(discovery_.monitored().begin(), discovery_.monitored().end());
  for (int32_t tgid : remaining) {
    if (recorded_.contains(tgid)) continue;
    auto seen = seen_.find(tgid);
    ProcessInfo info{tgid, "", 0, std::nullopt};
    if (seen != seen_.end()) {
      info.comm = seen->second.comm;
      info.first_seen = seen->second.first_seen;
    }
    if (auto p = parent_of_.find(tgid); p != parent_of_.end()) info.parent_tgid = p->second;
    tail.processes.push_back(std::move(info));
    recorded_.insert(tgid);
  }
  summary_.processes += static_cast<int64_t>(tail.processes.size());
  summary_.edges += static_cast<int64_t>(tail.edges.size());
  PL_RETURN_IF_ERROR(store_->Append(tail));
  summary_.threads = static_cast<int64_t>(threads_.size());
  summary_.engine = engine_.diagnostics();
  return summary_;
}

absl::StatusOr<SessionSummary> RunReplaySession(const SessionConfig& config) {
  PL_RETURN_IF_ERROR(ValidateSessionConfig(config));
  PL_ASSIGN_OR_RETURN(std::vector<KernelEvent> events, ReadTraceFile(config.trace_path));
  PL_ASSIGN_OR_RETURN(auto session, Session::Create(config));
  for (const KernelEvent& e : events) PL_RETURN_IF_ERROR(session->Ingest(e));
  return session->Finish();
}

}  // namespace prismlike
