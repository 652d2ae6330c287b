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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/core/model.h"
#include "prismlike/core/records.h"
#include "prismlike/store/table.h"

namespace prismlike {

inline constexpr int kStoreSchemaVersion = 1;

struct StoreMeta {
  DurationNs window_ns = kDefaultWindowNs;
  // "live" or "replay".
  std::string source = "replay";
};

struct AppendBatch {
  // Closed windows, including ones without samples.
  std::vector<TimeWindow> windows;
  std::vector<MetricSample> samples;
  std::vector<ProcessInfo> processes;
  std::vector<DiscoveryEdge> edges;

  bool empty() const {
    return windows.empty() && samples.empty() && processes.empty() && edges.empty();
  }
};

// Single-file SQLite metric store. One writer or many readers per file; each
// instance owns one connection and is not itself thread-safe.
class MetricStore {
 public:
  // Creates a new store; fails if `path` exists.
  static absl::StatusOr<std::unique_ptr<MetricStore>> Create(const std::string& path,
                                                             const StoreMeta& meta);
  static absl::StatusOr<std::unique_ptr<MetricStore>> OpenReadOnly(const std::string& path);

  ~MetricStore();
  MetricStore(const MetricStore&) = delete;
  MetricStore& operator=(const MetricStore&) = delete;

  // One transaction. Rows whose key already exists are a conflict
  // (AlreadyExists) and roll the whole batch back. A window's samples must
  // arrive in a single batch: blkio_share is derived at append time.
  absl::Status Append(const AppendBatch& batch);

  const StoreMeta& meta() const { return meta_; }
  const std::string& path() const { return path_; }
  bool read_only() const { return read_only_; }

  // Window starts present in the store, ascending.
  absl::StatusOr<std::vector<TimestampNs>> Windows() const;
  // [first window start, last window end), or nullopt for an empty store.
  absl::StatusOr<std::optional<TimeRange>> Extent() const;

  // Samples whose window start lies in `range`, in canonical order.
  absl::StatusOr<std::vector<MetricSample>> LoadSamples(const TimeRange& range) const;
  absl::StatusOr<std::vector<ProcessInfo>> LoadProcesses() const;
  absl::StatusOr<std::vector<ThreadInfo>> LoadThreads() const;
  absl::StatusOr<std::vector<DiscoveryEdge>> LoadEdges() const;

  // sectors(t) / total sectors on the devices t used, per thread, for the
  // window starting at `window_start`. Threads without IO are absent.
  absl::StatusOr<std::map<int32_t, double>> DeriveBlkioShare(TimestampNs window_start) const;

  // Runs one read-only statement with positional parameters.
  absl::StatusOr<Table> Select(const std::string& sql, const std::vector<Value>& params = {}) const;

  // Writes <dir>/<table>.ndjson for every table, rows in key order.
  absl::Status ExportNdjson(const std::string& dir) const;

  static const std::vector<std::string>& TableNames();

 private:
  struct Impl;
  MetricStore(std::string path, bool read_only, std::unique_ptr<Impl> impl);
  absl::Status LoadMeta();

  std::string path_;
  bool read_only_;
  StoreMeta meta_;
  std::unique_ptr<Impl> impl_;
};

// Sort order used by LoadSamples and the engine-to-store round trip.
bool CanonicalSampleLess(const MetricSample& a, const MetricSample& b);

// res_kind column value for a wait metric: pipe, socket, futex or epoll.
std::string_view ResKindOf(MetricKind metric);

}  // namespace prismlike
