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
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <absl/status/status.h>

#include "prismlike/core/model.h"
#include "prismlike/core/records.h"

namespace prismlike::sim {

// Deterministic jitter. Only raw engine output is used, so values are the
// same on every platform.
class Jitter {
 public:
  explicit Jitter(uint64_t seed) : rng_(seed) {}
  double Uniform();
  // Normal(mean, sd) rounded to ns and clamped to at least `floor`.
  DurationNs Normal(double mean_ns, double sd_ns, DurationNs floor = 1000);
  int64_t Int(int64_t lo, int64_t hi);

 private:
  std::mt19937_64 rng_;
};

// Builds a trace from per-thread timelines. Each thread has a cursor; ops
// append the events a kernel would report and advance it. A thread is
// running between ops.
class TraceBuilder {
 public:
  ThreadRef Thread(int32_t tid, int32_t tgid, const std::string& comm);

  // Wakes the thread at `ts` and puts it on a CPU.
  void Start(const ThreadRef& t, TimestampNs ts);
  void Run(const ThreadRef& t, DurationNs d);
  void Preempt(const ThreadRef& t, DurationNs rq);
  // Off CPU for `d`, then `rq` runnable before running again.
  void Sleep(const ThreadRef& t, DurationNs d, SchedState state = SchedState::kSleep,
             bool iowait = false, DurationNs rq = 0);
  // Sleeps until `ts` if the cursor is earlier.
  void IdleUntil(const ThreadRef& t, TimestampNs ts);
  void Exit(const ThreadRef& t);

  void FutexWait(const ThreadRef& t, uint64_t uaddr, DurationNs d);
  void FutexWake(const ThreadRef& t, uint64_t uaddr, int64_t woken);
  void PipeRead(const ThreadRef& t, const VfsInode& pipe, DurationNs d);
  void PipeWrite(const ThreadRef& t, const VfsInode& pipe, DurationNs d);
  void SockRecv(const ThreadRef& t, SocketFamily family, const std::string& local,
                const std::string& remote, DurationNs d);
  void SockSend(const ThreadRef& t, SocketFamily family, const std::string& local,
                const std::string& remote, DurationNs d);
  void EpollCtl(const ThreadRef& t, uint64_t kaddr, const Bri& target, EpollAction action);
  void EpollWait(const ThreadRef& t, uint64_t kaddr, DurationNs d);
  void Poll(const ThreadRef& t, const std::vector<Bri>& bris, DurationNs d);
  void BlockIo(const ThreadRef& t, const BlockDev& dev, int64_t sectors, DurationNs d);

  TimestampNs Cursor(const ThreadRef& t) const { return cursor_.at(t.tid); }

  // All events, sorted by ts; ties keep insertion order.
  std::vector<KernelEvent> Build() const;

 private:
  void Emit(const ThreadRef& t, TimestampNs ts, EventKind kind);
  void Sock(const ThreadRef& t, SocketFamily family, const std::string& local,
            const std::string& remote, SockDir dir, DurationNs d);

  std::map<int32_t, TimestampNs> cursor_;
  std::vector<KernelEvent> events_;
};

struct Scenario {
  std::string name;
  std::string description;
  std::vector<KernelEvent> events;
  std::vector<int32_t> bootstrap_pids;
  TimeRange baseline;
  TimeRange compare;
  // KPI series (ts ns, value) matching the degradation, if any.
  std::vector<std::pair<TimestampNs, double>> kpi;
};

// Lock contention: an entry thread and a purge thread share one mutex. The
// purge thread's critical section grows in the compare half. Thread aliases
// come out as t3 (contender) and t4 (entry).
namespace lock {
inline constexpr int32_t kPid = 3000;
inline constexpr int32_t kEntryTid = 3004;
inline constexpr int32_t kContenderTid = 3003;
inline constexpr int32_t kLogTid = 3005;
inline constexpr int32_t kTimerTid = 3006;
inline constexpr uint64_t kLockAddr = 0x7f3a2c001000;
Bri LockFutex();
Scenario Build();
}  // namespace lock

// Kafka-like: a network thread epoll-waits on a pipe fed by eight workers
// whose disk IO slows down.
namespace kafka {
inline constexpr int32_t kPid = 4000;
inline constexpr int32_t kNetworkTid = 4009;
inline constexpr int32_t kFirstWorkerTid = 4001;
inline constexpr int32_t kWorkers = 8;
inline constexpr int32_t kCompactorPid = 4100;
inline constexpr uint64_t kEpollAddr = 0xffff8881a0c4e000;
VfsInode Pipe();
BlockDev Disk();
Scenario Build();
}  // namespace kafka

// Teastore-like: webui threads wait longer on an external persistence
// service.
namespace teastore {
inline constexpr int32_t kPid = 5000;
inline constexpr int32_t kFirstTid = 5001;
inline constexpr int32_t kThreads = 4;
inline constexpr std::string_view kPersistence = "10.0.5.5:8080";
Scenario Build();
}  // namespace teastore

// MySQL-like entry-point layout: t3, t4 and t6 serve inet clients, t7 only
// talks over a unix socket.
namespace mysql {
inline constexpr int32_t kPid = 6000;
inline constexpr int32_t kUnixOnlyTid = 6007;
Scenario Build();
}  // namespace mysql

// entry -> futex -> mid -> pipe -> worker, plus an unrelated shifting thread.
namespace chain {
inline constexpr int32_t kPid = 7000;
inline constexpr int32_t kEntryTid = 7001;
inline constexpr int32_t kMidTid = 7002;
inline constexpr int32_t kWorkerTid = 7003;
inline constexpr int32_t kStrayTid = 7004;
inline constexpr uint64_t kFutexAddr = 0x55d0c0de0040;
VfsInode Pipe();
Scenario Build();
}  // namespace chain

// Process discovery A -> B (unix socket) -> C (pipe), D unrelated.
namespace discovery {
inline constexpr int32_t kA = 8100;
inline constexpr int32_t kB = 8200;
inline constexpr int32_t kC = 8300;
inline constexpr int32_t kD = 8400;
Scenario Build();
}  // namespace discovery

// Random multi-threaded workload with random IPC links and random shifts in
// the compare half.
Scenario RandomScenario(uint64_t seed);

// Every committed fixture, in a fixed order.
std::vector<Scenario> AllScenarios();

// Writes <dir>/<name>.trace.ndjson, <name>.kpi.csv and <name>.json.
absl::Status WriteScenarioFixture(const Scenario& scenario, const std::string& dir);

// KPI series as "ts,value" CSV with second-resolution timestamps.
std::string KpiCsv(const Scenario& scenario);

}  // namespace prismlike::sim
