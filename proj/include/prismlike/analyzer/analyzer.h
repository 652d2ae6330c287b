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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <absl/status/statusor.h>

#include "json.hpp"
#include "prismlike/analyzer/stats.h"
#include "prismlike/core/model.h"
#include "prismlike/core/records.h"
#include "prismlike/store/metric_store.h"

namespace prismlike {

// One testable series: a thread-scoped metric, or a metric on one resource.
// epoll_file_wait series carry the file as resource and the epoll object as
// subject.
struct MetricKey {
  int32_t tid = 0;
  MetricKind metric = MetricKind::kRuntime;
  std::optional<Bri> resource;
  std::optional<Bri> subject;
  friend auto operator<=>(const MetricKey&, const MetricKey&) = default;
};

// 0 epoll, 1 ipc, 2 device, 3 scheduler: position along a propagation chain.
int StageRank(MetricKind metric);

// Per-window series for the baseline and compare ranges, built once from the
// store. Thread-scoped metrics are zero-filled over every stored window in
// the range; resource-scoped series only have windows with activity.
class SampleIndex {
 public:
  static absl::StatusOr<SampleIndex> Load(const MetricStore& store, const TimeRange& baseline,
                                          const TimeRange& compare);

  // Threads with any sample in either range, by tid.
  const std::map<int32_t, ThreadRef>& threads() const { return threads_; }
  // Every series key for a thread, in key order.
  std::vector<MetricKey> KeysFor(int32_t tid) const;
  std::vector<double> Series(const MetricKey& key, bool compare) const;

  // Threads with nonzero inet socket waits in either range.
  std::set<int32_t> EntryThreads(const std::set<int32_t>& tgids) const;
  // Threads with any sample on `bri` in either range.
  std::set<int32_t> ThreadsTouching(const Bri& bri) const;

 private:
  struct Ranged {
    std::map<TimestampNs, double> baseline, compare;
  };
  std::vector<TimestampNs> baseline_windows_, compare_windows_;
  std::map<int32_t, ThreadRef> threads_;
  std::map<MetricKey, Ranged> series_;
  // epoll object -> series keyed with tid 0.
  std::map<Bri, std::vector<MetricKey>> epoll_files_;
  std::map<int32_t, std::set<Bri>> epolls_of_;
  std::map<Bri, std::set<int32_t>> touching_;
};

// Threads with nonzero socket_wait_time or socket_wait_count on inet4/inet6
// tuples in `range`, restricted to `tgids` unless empty.
absl::StatusOr<std::set<ThreadRef>> DetectEntryThreads(const MetricStore& store,
                                                       const TimeRange& range,
                                                       const std::set<int32_t>& tgids = {});

// Threads with any wait/wake/read/write sample on an IPC resource in
// `range`, minus `excluding`. Non-IPC resources are an InvalidArgument error
// whose message starts with "NotAnIpcResource".
absl::StatusOr<std::set<ThreadRef>> Counterparts(const MetricStore& store, const TimeRange& range,
                                                 const Bri& resource,
                                                 const std::set<int32_t>& excluding = {});

struct FlaggedMetric {
  int iteration = 0;
  ThreadRef thread;
  MetricKey key;
  ShiftReport shift;
  // Threads reached through this metric's resource (IPC flags only).
  std::vector<int32_t> counterparts;
};

struct TrackingState {
  std::vector<ThreadRef> entry;
  std::vector<ThreadRef> tracked;
  std::vector<ThreadRef> seen;
  int iterations = 0;
  // Instrumentation: distribution tests run, and scans per thread.
  int64_t metric_tests = 0;
  std::map<int32_t, int> scans;
};

struct DiagnosisRequest {
  TimeRange baseline;
  TimeRange compare;
  // Empty means every process in the store.
  std::set<int32_t> tgids;
  double alpha = kDefaultAlpha;
};

absl::Status ValidateDiagnosisRequest(const DiagnosisRequest& request);

struct DiagnosisReport {
  DiagnosisRequest request;
  TrackingState tracked;
  std::vector<FlaggedMetric> flagged_chain;
  bool exhausted = false;
  std::string hint;
};

// Selective Thread Tracking: seed with the entry threads, scan each tracked
// thread's metrics once, follow flagged IPC metrics to their counterpart
// threads, and stop when an iteration adds no thread.
absl::StatusOr<DiagnosisReport> SelectiveThreadTracking(const MetricStore& store,
                                                        const DiagnosisRequest& request);

// Tests every series of every thread in the tgids; flags sorted by |d|
// descending.
absl::StatusOr<std::vector<FlaggedMetric>> FullSearch(const MetricStore& store,
                                                      const DiagnosisRequest& request);

nlohmann::ordered_json ToJson(const ShiftReport& shift);
nlohmann::ordered_json ToJson(const FlaggedMetric& flag);
nlohmann::ordered_json ToJson(const DiagnosisReport& report);

}  // namespace prismlike
