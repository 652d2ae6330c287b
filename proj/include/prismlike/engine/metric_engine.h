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

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <absl/status/status.h>

#include "prismlike/core/model.h"

namespace prismlike {

struct EngineDiagnostics {
  int64_t events = 0;
  // Exits and switch-ins without a matching enter / switch-out.
  int64_t orphans = 0;
  // Enters superseded by a second enter of the same kind before an exit.
  int64_t replaced_enters = 0;
  // Events from threads outside the monitored set.
  int64_t filtered = 0;
  // Per-window thread/BRI counters dropped by the per-thread BRI bound.
  int64_t evicted_bris = 0;
};

inline constexpr size_t kDefaultMaxBrisPerThread = 128;

struct WindowSamples {
  TimeWindow window;
  std::vector<MetricSample> samples;
};

// Turns an ordered KernelEvent stream into per-window MetricSamples.
//
// Wait metrics are attributed to the window in which the wait completes.
// Scheduler-state time is continuous and is split at window boundaries.
class MetricEngine {
 public:
  explicit MetricEngine(DurationNs window_ns = kDefaultWindowNs);

  // Restricts attribution to threads whose tgid passes the filter. Device
  // sectors from filtered threads are still counted, without a thread, so
  // device shares keep the whole device as denominator.
  void SetMonitorFilter(std::function<bool(int32_t tgid)> filter) {
    monitor_filter_ = std::move(filter);
  }

  // Caps the distinct BRIs tracked per thread per window. When exceeded, the
  // least recently updated BRIs are dropped at window close.
  void SetMaxBrisPerThread(size_t max_bris) { max_bris_ = max_bris; }

  // Rejects timestamps older than the previous event with an order violation.
  absl::Status Observe(const KernelEvent& event);

  // Closes every window that ends at or before `ts`.
  absl::Status AdvanceTo(TimestampNs ts);

  // Closes the current window, accruing scheduler state up to `end_ts`
  // (clamped to the window). Use at stream end.
  void Finish(TimestampNs end_ts);

  // Closed windows not yet collected, in window order. Windows without any
  // nonzero counter are reported with an empty sample list.
  std::vector<WindowSamples> TakeClosedWindows();

  std::optional<TimeWindow> current_window() const { return current_; }
  const EngineDiagnostics& diagnostics() const { return diag_; }
  DurationNs window_ns() const { return window_ns_; }

 private:
  struct OpenWait {
    TimestampNs started = 0;
    std::optional<Bri> resource;
    uint8_t access = kAccessNone;
    FutexOp futex_op = FutexOp::kWait;
    std::vector<Bri> poll_set;
    // epoll_file_wait already accrued for BRIs removed during this wait.
    std::map<Bri, DurationNs> epoll_partial;
  };

  struct ThreadState {
    ThreadRef ref;
    std::optional<SchedState> sched;
    bool iowait = false;
    bool dead = false;
    TimestampNs since = 0;
    // runtime, rq_time, block_time, iowait_time, sleep_time for the current window.
    std::array<DurationNs, 5> sched_acc{};
    std::optional<OpenWait> futex, vfs, sock, poll, epoll;
  };

  enum class WaitClass : uint8_t { kPipe, kSocket, kFutex, kEpoll };
  struct WaitAcc {
    DurationNs time = 0;
    int64_t count = 0;
    uint8_t access = kAccessNone;
    TimestampNs last = 0;
  };
  struct CountAcc {
    int64_t value = 0;
    TimestampNs last = 0;
  };

  ThreadState& ThreadFor(const ThreadRef& ref);
  void AccrueSched(ThreadState& t, TimestampNs until);
  void CloseWindow(TimestampNs accrue_until);
  void CompleteWait(ThreadState& t, WaitClass cls, const Bri& bri, DurationNs d, uint8_t access);
  void OnSchedSwitchOut(ThreadState& t, TimestampNs ts, const SchedSwitchOut& e);
  void OnSchedSwitchIn(ThreadState& t, TimestampNs ts);
  void OnSchedWakeup(ThreadState& t, TimestampNs ts);
  void OnEpollCtl(TimestampNs ts, const EpollCtl& e);
  void OnEpollWaitExit(ThreadState& t, TimestampNs ts);
  void Open(std::optional<OpenWait>& slot, OpenWait wait);
  void EnforceBriBound();

  DurationNs window_ns_;
  size_t max_bris_ = kDefaultMaxBrisPerThread;
  std::function<bool(int32_t)> monitor_filter_;
  std::optional<TimeWindow> current_;
  std::optional<TimestampNs> last_ts_;
  EngineDiagnostics diag_;

  std::unordered_map<int32_t, ThreadState> threads_;
  // Interest lists persist across windows: epoll -> (bri -> inserted at).
  std::map<EpollObj, std::map<Bri, TimestampNs>> interest_;
  // Threads currently blocked in epoll_wait on each epoll object.
  std::map<EpollObj, std::vector<int32_t>> epoll_waiters_;

  // Current-window accumulators.
  std::map<std::tuple<int32_t, WaitClass, Bri>, WaitAcc> waits_;
  std::map<std::pair<int32_t, Bri>, CountAcc> futex_wakes_;
  std::map<std::pair<int32_t, Bri>, CountAcc> sectors_;
  std::map<Bri, int64_t> unattributed_sectors_;
  std::map<std::pair<Bri, Bri>, DurationNs> epoll_file_;

  std::vector<WindowSamples> closed_;
};

}  // namespace prismlike
