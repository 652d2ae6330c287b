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


#include "prismlike/collector/live_source.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include <glog/logging.h>

#include "prismlike/collector/probe_records.h"
#include "prismlike/collector/trace_codec.h"
#include "prismlike/collector/tracefs.h"
#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"

namespace prismlike {

ProbeRecordSource::ProbeRecordSource(std::vector<uint8_t> ring, size_t batch)
    : ring_(std::move(ring)), batch_(batch == 0 ? 1 : batch) {}

absl::StatusOr<bool> ProbeRecordSource::Poll(std::vector<KernelEvent>& out,
                                             std::chrono::milliseconds) {
  if (stopped_) return false;
  std::span<const uint8_t> bytes(ring_);
  for (size_t i = 0; i < batch_ && offset_ < ring_.size(); ++i) {
    size_t used = 0;
    auto e = DecodeProbeRecord(bytes.subspan(offset_), &used);
    if (!e.ok()) {
      return absl::DataLossError(StrCat("ring offset ", offset_, ": ", StatusMessage(e.status())));
    }
    out.push_back(*std::move(e));
    offset_ += used;
  }
  return offset_ < ring_.size();
}

absl::StatusOr<SessionSummary> RunLiveSessionWith(const SessionConfig& config,
                                                  EventSource& source,
                                                  const std::atomic<bool>& stop) {
  PL_ASSIGN_OR_RETURN(auto session, Session::Create(config));
  std::ofstream tee_file;
  std::optional<TraceWriter> tee;
  if (!config.tee_trace_path.empty()) {
    tee_file.open(config.tee_trace_path, std::ios::binary | std::ios::trunc);
    if (!tee_file) {
      return absl::InternalError(StrCat("cannot write ", config.tee_trace_path));
    }
    tee.emplace(tee_file);
  }

  using Clock = std::chrono::steady_clock;
  std::optional<Clock::time_point> deadline;
  if (config.duration) deadline = Clock::now() + std::chrono::nanoseconds(*config.duration);
  bool stopped = config.duration && *config.duration == 0;

  PL_RETURN_IF_ERROR(source.Start());
  if (stopped) source.Stop();

  std::vector<KernelEvent> batch;
  std::optional<TimestampNs> newest;
  int64_t dropped = 0;
  while (true) {
    if (!stopped && (stop.load() || (deadline && Clock::now() >= *deadline))) {
      source.Stop();
      stopped = true;
    }
    batch.clear();
    PL_ASSIGN_OR_RETURN(bool more, source.Poll(batch, std::chrono::milliseconds(50)));
    for (const KernelEvent& e : batch) {
      if (newest && e.ts < *newest) {
        ++dropped;
        continue;
      }
      newest = e.ts;
      if (tee) tee->Write(e);
      PL_RETURN_IF_ERROR(session->Ingest(e));
    }
    if (!more) break;
  }
  if (tee) {
    tee_file.flush();
    if (!tee_file) return absl::InternalError(StrCat("short write to ", config.tee_trace_path));
  }
  PL_ASSIGN_OR_RETURN(SessionSummary summary, session->Finish());
  summary.out_of_order += dropped;
  return summary;
}

absl::StatusOr<SessionSummary> RunLiveSession(const SessionConfig& config,
                                              const std::atomic<bool>& stop) {
  PL_RETURN_IF_ERROR(ValidateSessionConfig(config));
  if (config.source != SourceKind::kLive) {
    return absl::InvalidArgumentError("RunLiveSession needs a live config");
  }
  for (int32_t pid : config.bootstrap_pids) {
    if (!std::filesystem::exists(StrCat("/proc/", pid))) {
      return absl::NotFoundError(StrCat("no such process: ", pid));
    }
  }
  if (config.duration && *config.duration == 0) {
    PL_ASSIGN_OR_RETURN(auto session, Session::Create(config));
    if (!config.tee_trace_path.empty()) std::ofstream(config.tee_trace_path, std::ios::trunc);
    return session->Finish();
  }
  ProcFdResolver resolver;
  TracefsOptions options;
  options.instance = StrCat("prismlike-", getpid());
  PL_ASSIGN_OR_RETURN(auto source, TracefsSource::Create(options, resolver));
  auto summary = RunLiveSessionWith(config, *source, stop);
  const TracefsStats& stats = source->stats();
  LOG(INFO) << "tracefs: " << stats.lines << " lines, " << stats.unparsed << " unparsed, "
            << stats.unresolved_fds << " unresolved fds";
  return summary;
}

absl::StatusOr<SessionSummary> RunSession(const SessionConfig& config,
                                          const std::atomic<bool>& stop) {
  if (config.source == SourceKind::kLive) return RunLiveSession(config, stop);
  return RunReplaySession(config);
}

}  // namespace prismlike
