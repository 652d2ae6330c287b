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


#include "prismlike/sim/scenario.h"

#include <algorithm>
#include <cmath>

#include "prismlike/core/strings.h"

namespace prismlike::sim {

namespace {

constexpr DurationNs kMs = 1'000'000;
constexpr DurationNs kUs = 1'000;
constexpr DurationNs kSec = kNanosPerSecond;

TimeRange Seconds(int64_t from, int64_t to) { return TimeRange{from * kSec, to * kSec}; }

}  // namespace

double Jitter::Uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

DurationNs Jitter::Normal(double mean_ns, double sd_ns, DurationNs floor) {
  // Box-Muller on two open-interval uniforms.
  const double u1 = std::max(Uniform(), 1e-300);
  const double u2 = Uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return std::max<DurationNs>(floor, std::llround(mean_ns + sd_ns * z));
}

int64_t Jitter::Int(int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(rng_() % static_cast<uint64_t>(hi - lo + 1));
}

ThreadRef TraceBuilder::Thread(int32_t tid, int32_t tgid, const std::string& comm) {
  return ThreadRef{tid, tgid, comm.substr(0, kMaxCommLen - 1)};
}

void TraceBuilder::Emit(const ThreadRef& t, TimestampNs ts, EventKind kind) {
  events_.push_back(KernelEvent{ts, t, std::move(kind)});
}

void TraceBuilder::Start(const ThreadRef& t, TimestampNs ts) {
  Emit(t, ts, SchedWakeup{});
  Emit(t, ts, SchedSwitchIn{});
  cursor_[t.tid] = ts;
}

void TraceBuilder::Run(const ThreadRef& t, DurationNs d) { cursor_.at(t.tid) += d; }

void TraceBuilder::Preempt(const ThreadRef& t, DurationNs rq) {
  TimestampNs& c = cursor_.at(t.tid);
  Emit(t, c, SchedSwitchOut{SchedState::kRunnable, false, false});
  c += rq;
  Emit(t, c, SchedSwitchIn{});
}

void TraceBuilder::Sleep(const ThreadRef& t, DurationNs d, SchedState state, bool iowait,
                         DurationNs rq) {
  TimestampNs& c = cursor_.at(t.tid);
  Emit(t, c, SchedSwitchOut{state, iowait, false});
  c += d;
  Emit(t, c, SchedWakeup{});
  c += rq;
  Emit(t, c, SchedSwitchIn{});
}

void TraceBuilder::IdleUntil(const ThreadRef& t, TimestampNs ts) {
  if (cursor_.at(t.tid) < ts) Sleep(t, ts - cursor_.at(t.tid));
}

void TraceBuilder::Exit(const ThreadRef& t) {
  Emit(t, cursor_.at(t.tid), SchedSwitchOut{SchedState::kSleep, false, true});
}

void TraceBuilder::FutexWait(const ThreadRef& t, uint64_t uaddr, DurationNs d) {
  Emit(t, cursor_.at(t.tid), FutexEnter{uaddr, FutexOp::kWait, 0, false});
  if (d > 0) Sleep(t, d);
  Emit(t, cursor_.at(t.tid), FutexExit{0});
}

void TraceBuilder::FutexWake(const ThreadRef& t, uint64_t uaddr, int64_t woken) {
  Emit(t, cursor_.at(t.tid), FutexEnter{uaddr, FutexOp::kWake, 1, false});
  Emit(t, cursor_.at(t.tid), FutexExit{woken});
}

void TraceBuilder::PipeRead(const ThreadRef& t, const VfsInode& pipe, DurationNs d) {
  Emit(t, cursor_.at(t.tid), VfsAccess{pipe, VfsDir::kRead, FileKind::kFifo, true, true});
  if (d > 0) Sleep(t, d);
  Emit(t, cursor_.at(t.tid), VfsAccess{pipe, VfsDir::kRead, FileKind::kFifo, true, false});
}

void TraceBuilder::PipeWrite(const ThreadRef& t, const VfsInode& pipe, DurationNs d) {
  Emit(t, cursor_.at(t.tid), VfsAccess{pipe, VfsDir::kWrite, FileKind::kFifo, true, true});
  if (d > 0) Sleep(t, d);
  Emit(t, cursor_.at(t.tid), VfsAccess{pipe, VfsDir::kWrite, FileKind::kFifo, true, false});
}

void TraceBuilder::Sock(const ThreadRef& t, SocketFamily family, const std::string& local,
                        const std::string& remote, SockDir dir, DurationNs d) {
  SockAccess s;
  s.bri = *CanonicalizeSocket(family, local, remote)->get_if<SocketTuple>();
  s.remote = *NormalizeEndpoint(family, remote);
  s.dir = dir;
  s.enter = true;
  Emit(t, cursor_.at(t.tid), s);
  if (d > 0) Sleep(t, d);
  s.enter = false;
  Emit(t, cursor_.at(t.tid), s);
}

void TraceBuilder::SockRecv(const ThreadRef& t, SocketFamily family, const std::string& local,
                            const std::string& remote, DurationNs d) {
  Sock(t, family, local, remote, SockDir::kRecv, d);
}

void TraceBuilder::SockSend(const ThreadRef& t, SocketFamily family, const std::string& local,
                            const std::string& remote, DurationNs d) {
  Sock(t, family, local, remote, SockDir::kSend, d);
}

void TraceBuilder::EpollCtl(const ThreadRef& t, uint64_t kaddr, const Bri& target,
                            EpollAction action) {
  Emit(t, cursor_.at(t.tid), prismlike::EpollCtl{EpollObj{kaddr}, target, action});
}

void TraceBuilder::EpollWait(const ThreadRef& t, uint64_t kaddr, DurationNs d) {
  Emit(t, cursor_.at(t.tid), EpollWaitEnter{EpollObj{kaddr}});
  if (d > 0) Sleep(t, d);
  Emit(t, cursor_.at(t.tid), EpollWaitExit{EpollObj{kaddr}});
}

void TraceBuilder::Poll(const ThreadRef& t, const std::vector<Bri>& bris, DurationNs d) {
  Emit(t, cursor_.at(t.tid), PollEnter{PollApi::kPoll, bris});
  if (d > 0) Sleep(t, d);
  Emit(t, cursor_.at(t.tid), PollExit{PollApi::kPoll, {}});
}

void TraceBuilder::BlockIo(const ThreadRef& t, const BlockDev& dev, int64_t sectors,
                           DurationNs d) {
  Emit(t, cursor_.at(t.tid), BlockRq{dev, sectors});
  Sleep(t, d, SchedState::kBlock, true);
}

std::vector<KernelEvent> TraceBuilder::Build() const {
  std::vector<KernelEvent> out = events_;
  std::stable_sort(out.begin(), out.end(),
                   [](const KernelEvent& a, const KernelEvent& b) { return a.ts < b.ts; });
  return out;
}

//-----------------------------------------------------------------------------
// Fixtures
//-----------------------------------------------------------------------------

namespace lock {

Bri LockFutex() { return FutexAddr{kPid, kLockAddr, false}; }

Scenario Build() {
  constexpr int kWindows = 60;
  constexpr int kSplit = 30;
  TraceBuilder b;
  Jitter j(0x10c4);
  const BlockDev disk{8, 0};
  const ThreadRef main = b.Thread(kPid, kPid, "mysqld");
  const ThreadRef io = b.Thread(kPid + 1, kPid, "io_handler");
  const ThreadRef entry = b.Thread(kEntryTid, kPid, "conn_worker");
  const ThreadRef holder = b.Thread(kContenderTid, kPid, "purge_worker");
  const ThreadRef log = b.Thread(kLogTid, kPid, "log_writer");
  const ThreadRef timer = b.Thread(kTimerTid, kPid, "srv_timer");
  for (const ThreadRef& t : {main, io, entry, holder, log, timer}) b.Start(t, 0);

  Scenario s;
  for (int w = 0; w < kWindows; ++w) {
    const bool degraded = w >= kSplit;
    const TimestampNs end = (w + 1) * kSec;
    double latency = 0;
    for (int r = 0; r < 20; ++r) {
      const DurationNs recv = j.Normal(4 * kMs, 0.8 * kMs);
      b.SockRecv(entry, SocketFamily::kInet4, "10.0.0.10:3306", "10.0.0.99:51000", recv);
      const DurationNs work = j.Normal(1.5 * kMs, 0.3 * kMs);
      b.Run(entry, work);
      const DurationNs wait =
          degraded ? j.Normal(14 * kMs, 3 * kMs) : j.Normal(0.8 * kMs, 0.2 * kMs);
      b.FutexWait(entry, kLockAddr, wait);
      b.Run(entry, kMs / 2);
      b.FutexWake(entry, kLockAddr, 1);
      b.SockSend(entry, SocketFamily::kInet4, "10.0.0.10:3306", "10.0.0.99:51000", 0);
      latency = std::max(latency, static_cast<double>(work + wait + kMs / 2) / kMs);
    }
    s.kpi.emplace_back(w * kSec, latency);
    for (int r = 0; r < 10; ++r) {
      b.FutexWait(holder, kLockAddr, j.Normal(0.3 * kMs, 0.06 * kMs));
      b.Run(holder, degraded ? j.Normal(30 * kMs, 5 * kMs) : j.Normal(3 * kMs, 0.6 * kMs));
      b.FutexWake(holder, kLockAddr, 1);
      b.BlockIo(holder, disk, 16,
                degraded ? j.Normal(12 * kMs, 2 * kMs) : j.Normal(2 * kMs, 0.4 * kMs));
    }
    for (int r = 0; r < 5; ++r) {
      b.Run(log, j.Normal(2 * kMs, 0.4 * kMs));
      b.BlockIo(log, disk, 64, j.Normal(3 * kMs, 0.6 * kMs));
    }
    b.Run(timer, j.Normal(200 * kUs, 40 * kUs));
    b.Run(io, j.Normal(100 * kUs, 20 * kUs));
    for (const ThreadRef& t : {main, io, entry, holder, log, timer}) b.IdleUntil(t, end);
  }
  s.name = "lock";
  s.description = "entry thread blocked on a lock held by a slowed purge thread";
  s.events = b.Build();
  s.bootstrap_pids = {kPid};
  s.baseline = Seconds(0, kSplit);
  s.compare = Seconds(kSplit, kWindows);
  return s;
}

}  // namespace lock

namespace kafka {

VfsInode Pipe() { return VfsInode{13, 0x4f2a1}; }
BlockDev Disk() { return BlockDev{259, 1}; }

Scenario Build() {
  constexpr int kWindows = 60;
  constexpr int kSplit = 30;
  TraceBuilder b;
  Jitter j(0x4afc);
  const ThreadRef net = b.Thread(kNetworkTid, kPid, "network-thread");
  std::vector<ThreadRef> workers;
  for (int i = 0; i < kWorkers; ++i) {
    workers.push_back(b.Thread(kFirstWorkerTid + i, kPid, StrCat("data-plane-", i)));
  }
  const ThreadRef compactor = b.Thread(kCompactorPid + 1, kCompactorPid, "compactor");
  std::vector<ThreadRef> all = {net, compactor};
  all.insert(all.end(), workers.begin(), workers.end());
  for (const ThreadRef& t : all) b.Start(t, 0);
  b.EpollCtl(net, kEpollAddr, Bri(Pipe()), EpollAction::kInsert);

  Scenario s;
  for (int w = 0; w < kWindows; ++w) {
    const bool degraded = w >= kSplit;
    const TimestampNs end = (w + 1) * kSec;
    double latency = 0;
    for (int r = 0; r < 10; ++r) {
      const DurationNs ep = degraded ? j.Normal(60 * kMs, 10 * kMs) : j.Normal(20 * kMs, 4 * kMs);
      b.EpollWait(net, kEpollAddr, ep);
      const DurationNs rd = degraded ? j.Normal(5 * kMs, 1 * kMs) : j.Normal(0.5 * kMs, 0.1 * kMs);
      b.PipeRead(net, Pipe(), rd);
      b.SockRecv(net, SocketFamily::kInet4, "10.0.0.20:9092", "10.0.0.77:40000",
                 j.Normal(1 * kMs, 0.2 * kMs));
      b.Run(net, j.Normal(2 * kMs, 0.4 * kMs));
      b.SockSend(net, SocketFamily::kInet4, "10.0.0.20:9092", "10.0.0.77:40000", 0);
      latency = std::max(latency, static_cast<double>(ep + rd) / kMs);
    }
    s.kpi.emplace_back(w * kSec, latency);
    for (const ThreadRef& t : workers) {
      for (int r = 0; r < 4; ++r) {
        b.Run(t, j.Normal(5 * kMs, 1 * kMs));
        b.BlockIo(t, Disk(), 128,
                  degraded ? j.Normal(30 * kMs, 5 * kMs) : j.Normal(2 * kMs, 0.5 * kMs));
        b.PipeWrite(t, Pipe(), 0);
      }
    }
    for (int r = 0; r < 2; ++r) {
      b.BlockIo(compactor, Disk(), degraded ? 2048 : 256, j.Normal(10 * kMs, 2 * kMs));
      b.Run(compactor, 5 * kMs);
    }
    for (const ThreadRef& t : all) b.IdleUntil(t, end);
  }
  s.name = "kafka";
  s.description = "network thread starved by workers whose disk writes slow down";
  s.events = b.Build();
  s.bootstrap_pids = {kPid};
  s.baseline = Seconds(0, kSplit);
  s.compare = Seconds(kSplit, kWindows);
  return s;
}

}  // namespace kafka

namespace teastore {

Scenario Build() {
  constexpr int kWindows = 40;
  constexpr int kSplit = 20;
  TraceBuilder b;
  Jitter j(0x7ea5);
  const ThreadRef main = b.Thread(kPid, kPid, "webui");
  std::vector<ThreadRef> threads = {main};
  for (int i = 0; i < kThreads; ++i) {
    threads.push_back(b.Thread(kFirstTid + i, kPid, StrCat("http-nio-", i + 1)));
  }
  for (const ThreadRef& t : threads) b.Start(t, 0);

  Scenario s;
  for (int w = 0; w < kWindows; ++w) {
    const bool degraded = w >= kSplit;
    const TimestampNs end = (w + 1) * kSec;
    double latency = 0;
    for (int i = 0; i < kThreads; ++i) {
      const ThreadRef& t = threads[i + 1];
      const std::string local_client = "10.0.0.30:8080";
      const std::string client = StrCat("10.0.0.88:", 43100 + i);
      const std::string local_db = StrCat("10.0.0.30:", 34000 + i);
      const std::string db(kPersistence);
      for (int r = 0; r < 8; ++r) {
        b.SockRecv(t, SocketFamily::kInet4, local_client, client, j.Normal(3 * kMs, 0.5 * kMs));
        b.Run(t, j.Normal(1 * kMs, 0.2 * kMs));
        b.SockSend(t, SocketFamily::kInet4, local_db, db, 0);
        const DurationNs wait =
            degraded ? j.Normal(80 * kMs, 10 * kMs) : j.Normal(10 * kMs, 2 * kMs);
        b.SockRecv(t, SocketFamily::kInet4, local_db, db, wait);
        b.Run(t, j.Normal(1 * kMs, 0.2 * kMs));
        b.SockSend(t, SocketFamily::kInet4, local_client, client, 0);
        latency = std::max(latency, static_cast<double>(wait) / kMs);
      }
    }
    s.kpi.emplace_back(w * kSec, latency);
    for (const ThreadRef& t : threads) b.IdleUntil(t, end);
  }
  s.name = "teastore";
  s.description = "web frontend waiting on a slower external persistence service";
  s.events = b.Build();
  s.bootstrap_pids = {kPid};
  s.baseline = Seconds(0, kSplit);
  s.compare = Seconds(kSplit, kWindows);
  return s;
}

}  // namespace teastore

namespace mysql {

Scenario Build() {
  constexpr int kWindows = 10;
  TraceBuilder b;
  Jitter j(0x3306);
  std::vector<ThreadRef> threads;
  for (int i = 1; i <= 8; ++i) {
    threads.push_back(b.Thread(kPid + i, kPid, StrCat("mysqld_t", i)));
  }
  for (const ThreadRef& t : threads) b.Start(t, 0);
  for (int w = 0; w < kWindows; ++w) {
    for (int i : {3, 4, 6}) {
      const ThreadRef& t = threads[i - 1];
      for (int r = 0; r < 5; ++r) {
        b.SockRecv(t, SocketFamily::kInet4, "10.0.0.50:3306", StrCat("10.0.0.60:", 50000 + i),
                   j.Normal(5 * kMs, 1 * kMs));
        b.Run(t, j.Normal(2 * kMs, 0.4 * kMs));
      }
    }
    const ThreadRef& unix_only = threads[kUnixOnlyTid - kPid - 1];
    for (int r = 0; r < 5; ++r) {
      b.SockRecv(unix_only, SocketFamily::kUnix, "8:7001", "8:7002", j.Normal(5 * kMs, kMs));
    }
    for (int i : {1, 2, 5, 8}) b.Run(threads[i - 1], j.Normal(10 * kMs, 2 * kMs));
    for (const ThreadRef& t : threads) b.IdleUntil(t, (w + 1) * kSec);
  }
  Scenario s;
  s.name = "mysql";
  s.description = "entry-point detection: three inet-serving threads, one unix-only thread";
  s.events = b.Build();
  s.bootstrap_pids = {kPid};
  s.baseline = Seconds(0, 5);
  s.compare = Seconds(5, kWindows);
  return s;
}

}  // namespace mysql

namespace chain {

VfsInode Pipe() { return VfsInode{13, 0x7b01}; }

Scenario Build() {
  constexpr int kWindows = 40;
  constexpr int kSplit = 20;
  TraceBuilder b;
  Jitter j(0xc4a1);
  const ThreadRef main = b.Thread(kPid, kPid, "gateway");
  const ThreadRef entry = b.Thread(kEntryTid, kPid, "front");
  const ThreadRef mid = b.Thread(kMidTid, kPid, "dispatcher");
  const ThreadRef worker = b.Thread(kWorkerTid, kPid, "backend");
  const ThreadRef stray = b.Thread(kStrayTid, kPid, "stats");
  const std::vector<ThreadRef> all = {main, entry, mid, worker, stray};
  for (const ThreadRef& t : all) b.Start(t, 0);
  Scenario s;
  for (int w = 0; w < kWindows; ++w) {
    const bool degraded = w >= kSplit;
    double latency = 0;
    for (int r = 0; r < 10; ++r) {
      b.SockRecv(entry, SocketFamily::kInet4, "10.0.0.40:80", "10.0.0.111:52000",
                 j.Normal(3 * kMs, 0.5 * kMs));
      const DurationNs wait = degraded ? j.Normal(20 * kMs, 4 * kMs) : j.Normal(1 * kMs, 0.2 * kMs);
      b.FutexWait(entry, kFutexAddr, wait);
      b.Run(entry, j.Normal(2 * kMs, 0.4 * kMs));
      b.SockSend(entry, SocketFamily::kInet4, "10.0.0.40:80", "10.0.0.111:52000", 0);
      latency = std::max(latency, static_cast<double>(wait) / kMs);

      b.PipeRead(mid, Pipe(), degraded ? j.Normal(25 * kMs, 5 * kMs) : j.Normal(1 * kMs, 0.2 * kMs));
      b.Run(mid, j.Normal(1 * kMs, 0.2 * kMs));
      b.FutexWake(mid, kFutexAddr, 1);

      b.Run(worker, degraded ? j.Normal(30 * kMs, 5 * kMs) : j.Normal(2 * kMs, 0.4 * kMs));
      b.PipeWrite(worker, Pipe(), 0);
    }
    s.kpi.emplace_back(w * kSec, latency);
    b.Run(stray, degraded ? j.Normal(200 * kMs, 20 * kMs) : j.Normal(20 * kMs, 4 * kMs));
    for (const ThreadRef& t : all) b.IdleUntil(t, (w + 1) * kSec);
  }
  s.name = "chain";
  s.description = "three-hop propagation: entry -> futex -> dispatcher -> pipe -> backend";
  s.events = b.Build();
  s.bootstrap_pids = {kPid};
  s.baseline = Seconds(0, kSplit);
  s.compare = Seconds(kSplit, kWindows);
  return s;
}

}  // namespace chain

namespace discovery {

Scenario Build() {
  constexpr int kWindows = 5;
  TraceBuilder b;
  Jitter j(0xd15c);
  const ThreadRef a = b.Thread(kA, kA, "frontend");
  const ThreadRef bb = b.Thread(kB, kB, "backend");
  const ThreadRef c = b.Thread(kC, kC, "cache");
  const ThreadRef d = b.Thread(kD, kD, "cron");
  const VfsInode queue{13, 0x9c01};
  for (const ThreadRef& t : {a, bb, c, d}) b.Start(t, 0);
  for (int w = 0; w < kWindows; ++w) {
    for (int r = 0; r < 3; ++r) {
      b.SockSend(a, SocketFamily::kUnix, "8:9001", "8:9002", 0);
      b.SockRecv(a, SocketFamily::kUnix, "8:9001", "8:9002", j.Normal(4 * kMs, kMs));
      b.SockRecv(bb, SocketFamily::kUnix, "8:9002", "8:9001", j.Normal(2 * kMs, kMs / 2));
      b.PipeWrite(bb, queue, 0);
      b.SockSend(bb, SocketFamily::kUnix, "8:9002", "8:9001", 0);
      b.PipeRead(c, queue, j.Normal(3 * kMs, kMs));
      b.Run(c, kMs);
    }
    b.Run(d, j.Normal(5 * kMs, kMs));
    for (const ThreadRef& t : {a, bb, c, d}) b.IdleUntil(t, (w + 1) * kSec);
  }
  Scenario s;
  s.name = "discovery";
  s.description = "transitive discovery: frontend -> backend over unix socket -> cache over pipe";
  s.events = b.Build();
  s.bootstrap_pids = {kA};
  s.baseline = Seconds(0, 2);
  s.compare = Seconds(2, kWindows);
  return s;
}

}  // namespace discovery

Scenario RandomScenario(uint64_t seed) {
  constexpr int kWindows = 16;
  constexpr int kSplit = 8;
  TraceBuilder b;
  Jitter j(seed * 0x9e3779b97f4a7c15ULL + 1);
  enum Op { kRun, kFutexWait, kFutexWake, kPipeRead, kPipeWrite, kSockRecv, kBlockIo, kEpoll,
            kPoll, kOpCount };
  struct Step {
    Op op;
    int resource;
    double mean_ns;
    double factor;
  };
  const int procs = static_cast<int>(j.Int(1, 3));
  const int nthreads = static_cast<int>(j.Int(2, 8));
  const int futexes = static_cast<int>(j.Int(1, 3));
  const int pipes = static_cast<int>(j.Int(1, 3));
  const int socks = static_cast<int>(j.Int(1, 2));
  std::vector<ThreadRef> threads;
  std::vector<std::vector<Step>> programs;
  for (int i = 0; i < nthreads; ++i) {
    const int32_t tgid = 9000 + 100 * static_cast<int32_t>(j.Int(0, procs - 1));
    threads.push_back(b.Thread(9001 + i + 1000 * (tgid - 9000) / 100, tgid, StrCat("rand", i)));
    std::vector<Step> prog;
    const int len = static_cast<int>(j.Int(1, 3));
    for (int k = 0; k < len; ++k) {
      Step st;
      st.op = (i == 0 && k == 0) ? kSockRecv : static_cast<Op>(j.Int(0, kOpCount - 1));
      st.resource = static_cast<int>(j.Int(0, 2));
      st.mean_ns = static_cast<double>(j.Int(1, 15)) * kMs;
      st.factor = j.Uniform() < 0.3 ? static_cast<double>(j.Int(3, 6)) : 1.0;
      prog.push_back(st);
    }
    programs.push_back(std::move(prog));
  }
  for (const ThreadRef& t : threads) b.Start(t, 0);
  b.EpollCtl(threads[0], 0xffff000000001000ULL, Bri(VfsInode{13, 1}), EpollAction::kInsert);
  for (int w = 0; w < kWindows; ++w) {
    const bool degraded = w >= kSplit;
    for (size_t i = 0; i < threads.size(); ++i) {
      const ThreadRef& t = threads[i];
      for (int rep = 0; rep < 2; ++rep) {
        for (const Step& st : programs[i]) {
          const double mean = st.mean_ns * (degraded ? st.factor : 1.0);
          const DurationNs d = j.Normal(mean, mean * 0.2);
          const int tgid_sock = st.resource % socks;
          switch (st.op) {
            case kRun:
              b.Run(t, d);
              break;
            case kFutexWait:
              b.FutexWait(t, 0x1000 + 0x40 * (st.resource % futexes), d);
              break;
            case kFutexWake:
              b.Run(t, d);
              b.FutexWake(t, 0x1000 + 0x40 * (st.resource % futexes), 1);
              break;
            case kPipeRead:
              b.PipeRead(t, VfsInode{13, 1 + static_cast<uint64_t>(st.resource % pipes)}, d);
              break;
            case kPipeWrite:
              b.PipeWrite(t, VfsInode{13, 1 + static_cast<uint64_t>(st.resource % pipes)}, d / 4);
              break;
            case kSockRecv:
              b.SockRecv(t, SocketFamily::kInet4, "10.1.0.1:80", StrCat("10.1.0.2:", 1000 + tgid_sock),
                         d);
              break;
            case kBlockIo:
              b.BlockIo(t, BlockDev{8, 0}, 8 * (1 + st.resource), d);
              break;
            case kEpoll:
              b.EpollWait(t, 0xffff000000001000ULL, d);
              break;
            case kPoll:
              b.Poll(t, {Bri(VfsInode{13, 1}), Bri(VfsInode{13, 2})}, d);
              break;
            case kOpCount:
              break;
          }
        }
      }
      b.IdleUntil(t, (w + 1) * kSec);
    }
  }
  Scenario s;
  s.name = StrCat("random-", seed);
  s.events = b.Build();
  s.baseline = Seconds(0, kSplit);
  s.compare = Seconds(kSplit, kWindows);
  return s;
}

std::vector<Scenario> AllScenarios() {
  return {lock::Build(), kafka::Build(), teastore::Build(), mysql::Build(), chain::Build(),
          discovery::Build()};
}

}  // namespace prismlike::sim
