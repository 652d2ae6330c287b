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


#include "prismlike/collector/tracefs.h"

#include <gtest/gtest.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "prismlike/collector/trace_codec.h"
#include "prismlike/store/metric_store.h"
#include "tests/support/temp_dir.h"

namespace prismlike {
namespace {

using testing::TempDir;

class FakeResolver : public FdResolver {
 public:
  std::optional<ResolvedFd> Resolve(int32_t tid, int fd) override {
    auto it = fds.find(fd);
    if (it == fds.end()) return std::nullopt;
    return it->second;
  }
  std::optional<int32_t> TgidOf(int32_t tid) override {
    auto it = tgids.find(tid);
    if (it == tgids.end()) return std::nullopt;
    return it->second;
  }
  std::map<int, ResolvedFd> fds;
  std::map<int32_t, int32_t> tgids;
};

std::vector<KernelEvent> DecodeAll(TracefsDecoder& d, const std::vector<std::string>& lines) {
  std::vector<KernelEvent> out;
  for (const std::string& l : lines) d.Decode(l, out);
  return out;
}

TEST(TracefsLineTest, ParsesHeaderWithTgidColumn) {
  auto l = ParseTracefsLine(
      "           sleep-2755    (   2755) [000] d..2.  3315.665980: sched_switch: "
      "prev_comm=sleep prev_pid=2755 prev_prio=120 prev_state=S ==> next_comm=swapper/0 "
      "next_pid=0 next_prio=120");
  ASSERT_TRUE(l.ok()) << l.status();
  EXPECT_EQ(l->comm, "sleep");
  EXPECT_EQ(l->tid, 2755);
  EXPECT_EQ(l->tgid, 2755);
  EXPECT_EQ(l->ts, 3315665980000);
  EXPECT_EQ(l->event, "sched_switch");
}

TEST(TracefsLineTest, CommMayContainSpacesAndDashes) {
  auto l = ParseTracefsLine(
      "      Bun Pool-1 -1273    (   1268) [003] .....  12.000001: sys_futex -> 0x1");
  ASSERT_TRUE(l.ok()) << l.status();
  EXPECT_EQ(l->comm, "Bun Pool-1 ");
  EXPECT_EQ(l->tid, 1273);
  EXPECT_EQ(l->tgid, 1268);
  EXPECT_EQ(l->ts, 12000001000);
  EXPECT_EQ(l->event, "sys_futex");
  EXPECT_EQ(l->body, " -> 0x1");
}

TEST(TracefsLineTest, UnknownTgidAndMissingTgidColumn) {
  auto a = ParseTracefsLine(
      "          <idle>-0       (-------) [000] dNs5.  1.5: sched_wakeup: comm=x pid=15 "
      "prio=120 target_cpu=000");
  ASSERT_TRUE(a.ok()) << a.status();
  EXPECT_FALSE(a->tgid.has_value());
  EXPECT_EQ(a->ts, 1500000000);
  auto b = ParseTracefsLine("  worker-42  [001] ....  7.123456789: block_rq_issue: 8,0 W 0 () 8 + 8 [worker]");
  ASSERT_TRUE(b.ok()) << b.status();
  EXPECT_FALSE(b->tgid.has_value());
  EXPECT_EQ(b->ts, 7123456789);
  EXPECT_FALSE(ParseTracefsLine("# tracer: nop").ok());
  EXPECT_FALSE(ParseTracefsLine("garbage-1 [x] 1.0: e").ok());
}

TEST(TracefsDecoderTest, SchedSwitchAndWakeup) {
  FakeResolver r;
  r.tgids[16] = 10;
  TracefsDecoder d(r);
  auto ev = DecodeAll(
      d, {"  a-15 (   10) [000] d..2.  1.000001: sched_switch: prev_comm=a prev_pid=15 "
          "prev_prio=120 prev_state=R+ ==> next_comm=b next_pid=16 next_prio=120",
          "  b-16 (   10) [000] d..2.  1.000002: sched_wakeup: comm=a pid=15 prio=120 "
          "target_cpu=001",
          "  b-16 (   10) [000] d..2.  1.000003: sched_switch: prev_comm=b prev_pid=16 "
          "prev_prio=120 prev_state=Z ==> next_comm=swapper/0 next_pid=0 next_prio=120"});
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_EQ(ev[0].thread, (ThreadRef{15, 10, "a"}));
  auto out = std::get<SchedSwitchOut>(ev[0].kind);
  EXPECT_EQ(out.next_state, SchedState::kRunnable);
  EXPECT_EQ(ev[1].thread, (ThreadRef{16, 10, "b"}));
  EXPECT_TRUE(std::holds_alternative<SchedSwitchIn>(ev[1].kind));
  EXPECT_EQ(ev[2].thread.tid, 15);
  EXPECT_TRUE(std::holds_alternative<SchedWakeup>(ev[2].kind));
  EXPECT_TRUE(std::get<SchedSwitchOut>(ev[3].kind).exiting);
}

TEST(TracefsDecoderTest, IgnoredProcessLeavesNoEvents) {
  FakeResolver r;
  r.tgids[16] = 20;
  TracefsDecoder d(r);
  d.IgnoreProcess(20);
  auto ev = DecodeAll(
      d, {"  a-15 (   10) [000] d..2.  1.000001: sched_switch: prev_comm=a prev_pid=15 "
          "prev_prio=120 prev_state=S ==> next_comm=rec next_pid=16 next_prio=120",
          "  rec-16 (   20) [000] d..2.  1.000002: sched_wakeup: comm=a pid=15 prio=120 "
          "target_cpu=001",
          "  rec-16 (   20) [000] d..2.  1.000003: sched_switch: prev_comm=rec prev_pid=16 "
          "prev_prio=120 prev_state=S ==> next_comm=a next_pid=15 next_prio=120"});
  ASSERT_EQ(ev.size(), 3u);
  for (const KernelEvent& e : ev) EXPECT_EQ(e.thread.tid, 15);
  EXPECT_EQ(d.stats().lines, 3);
}

TEST(TracefsDecoderTest, DiskSleepAfterBlockIssueIsIowait) {
  FakeResolver r;
  TracefsDecoder d(r);
  auto ev = DecodeAll(
      d, {"  w-20 (   20) [000] .....  2.000000: block_rq_issue: 259,1 WS 4096 () 100 + 8 "
          "none,0,0 [w]",
          "  w-20 (   20) [000] d..2.  2.000010: sched_switch: prev_comm=w prev_pid=20 "
          "prev_prio=120 prev_state=D ==> next_comm=swapper/0 next_pid=0 next_prio=120",
          "  w-20 (   20) [000] d..2.  2.000100: sched_switch: prev_comm=w prev_pid=20 "
          "prev_prio=120 prev_state=D ==> next_comm=swapper/0 next_pid=0 next_prio=120",
          "  w-20 (   20) [000] .....  2.000200: block_rq_issue: 8,0 FF 0 () 0 + 0 none,0,0 [w]"});
  ASSERT_EQ(ev.size(), 3u);
  auto rq = std::get<BlockRq>(ev[0].kind);
  EXPECT_EQ(rq.dev, (BlockDev{259, 1}));
  EXPECT_EQ(rq.sectors, 8);
  EXPECT_TRUE(std::get<SchedSwitchOut>(ev[1].kind).in_iowait);
  EXPECT_EQ(std::get<SchedSwitchOut>(ev[1].kind).next_state, SchedState::kBlock);
  EXPECT_FALSE(std::get<SchedSwitchOut>(ev[2].kind).in_iowait);
}

TEST(TracefsDecoderTest, FutexOpsAndResults) {
  FakeResolver r;
  TracefsDecoder d(r);
  auto ev = DecodeAll(
      d, {"  t-5 (    5) [0] .....  1.0: sys_futex(uaddr: 0x7f00, op: 0x80, val: 2, utime: 0)",
          "  t-5 (    5) [0] .....  1.5: sys_futex -> 0xffffffffffffff92",
          "  t-6 (    5) [0] .....  1.6: sys_futex(uaddr: 0x7f00, op: 1, val: 1)",
          "  t-6 (    5) [0] .....  1.7: sys_futex -> 0x1",
          "  t-6 (    5) [0] .....  1.8: sys_futex(uaddr: 0x7f00, op: 0x8c, val: 1)",
          "  t-6 (    5) [0] .....  1.9: sys_futex -> 0x0"});
  ASSERT_EQ(ev.size(), 4u);
  auto wait = std::get<FutexEnter>(ev[0].kind);
  EXPECT_EQ(wait.op, FutexOp::kWait);
  EXPECT_FALSE(wait.shared);
  EXPECT_EQ(wait.uaddr, 0x7f00u);
  EXPECT_EQ(std::get<FutexExit>(ev[1].kind).result, -110);
  auto wake = std::get<FutexEnter>(ev[2].kind);
  EXPECT_EQ(wake.op, FutexOp::kWake);
  EXPECT_TRUE(wake.shared);
  EXPECT_EQ(std::get<FutexExit>(ev[3].kind).result, 1);
}

TEST(TracefsDecoderTest, ReadsResolveThroughTheFdTable) {
  FakeResolver r;
  r.fds[3] = ResolvedFd{ResolvedFd::Kind::kFifo, Bri(VfsInode{15, 99}), "", true};
  r.fds[4] = ResolvedFd{ResolvedFd::Kind::kSocket,
                        *CanonicalizeSocket(SocketFamily::kInet4, "127.0.0.1:80",
                                            "127.0.0.1:5555"),
                        "127.0.0.1:5555", false};
  r.fds[5] = ResolvedFd{ResolvedFd::Kind::kRegular, Bri(VfsInode{1, 2}), "", true};
  TracefsDecoder d(r);
  auto ev = DecodeAll(
      d, {"  t-5 (    5) [0] .....  1.0: sys_read(fd: 3, buf: 0x1, count: 0x40)",
          "  t-5 (    5) [0] .....  1.1: sys_read -> 0x40",
          "  t-5 (    5) [0] .....  1.2: sys_sendto(fd: 4, buff: 0x1, len: 3)",
          "  t-5 (    5) [0] .....  1.3: sys_sendto -> 0x3",
          "  t-5 (    5) [0] .....  1.4: sys_read(fd: 5, buf: 0x1, count: 0x40)",
          "  t-5 (    5) [0] .....  1.5: sys_read -> 0x40",
          "  t-5 (    5) [0] .....  1.6: sys_write(fd: 9, buf: 0x1, count: 1)"});
  ASSERT_EQ(ev.size(), 4u);
  auto enter = std::get<VfsAccess>(ev[0].kind);
  EXPECT_EQ(enter.bri, (VfsInode{15, 99}));
  EXPECT_TRUE(enter.enter);
  EXPECT_TRUE(enter.blocking);
  EXPECT_EQ(enter.file_kind, FileKind::kFifo);
  EXPECT_FALSE(std::get<VfsAccess>(ev[1].kind).enter);
  auto send = std::get<SockAccess>(ev[2].kind);
  EXPECT_EQ(send.dir, SockDir::kSend);
  EXPECT_EQ(send.remote, "127.0.0.1:5555");
  EXPECT_FALSE(std::get<SockAccess>(ev[3].kind).enter);
  EXPECT_EQ(d.stats().unresolved_fds, 1);
}

TEST(TracefsDecoderTest, EpollCtlReportedOnlyOnSuccess) {
  FakeResolver r;
  r.fds[3] = ResolvedFd{ResolvedFd::Kind::kFifo, Bri(VfsInode{15, 99}), "", true};
  TracefsDecoder d(r);
  auto ev = DecodeAll(
      d, {"  t-5 (    5) [0] .....  1.0: sys_epoll_ctl(epfd: 7, op: 1, fd: 3, event: 0x1)",
          "  t-5 (    5) [0] .....  1.1: sys_epoll_ctl -> 0x0",
          "  t-5 (    5) [0] .....  1.2: sys_epoll_ctl(epfd: 7, op: 1, fd: 3, event: 0x1)",
          "  t-5 (    5) [0] .....  1.3: sys_epoll_ctl -> 0xffffffffffffffef",
          "  t-5 (    5) [0] .....  1.4: sys_epoll_wait(epfd: 7, events: 0x1, maxevents: 4)",
          "  t-5 (    5) [0] .....  1.5: sys_epoll_wait -> 0x1"});
  ASSERT_EQ(ev.size(), 3u);
  auto ctl = std::get<EpollCtl>(ev[0].kind);
  EXPECT_EQ(ctl.epoll.kaddr, SyntheticEpollAddr(5, 7));
  EXPECT_EQ(ctl.action, EpollAction::kInsert);
  EXPECT_EQ(ev[0].ts, 1100000000);
  EXPECT_EQ(std::get<EpollWaitEnter>(ev[1].kind).epoll.kaddr, SyntheticEpollAddr(5, 7));
  EXPECT_EQ(std::get<EpollWaitExit>(ev[2].kind).epoll.kaddr, SyntheticEpollAddr(5, 7));
}

TEST(TracefsDecoderTest, ExitWithoutMatchingEnterIsIgnored) {
  FakeResolver r;
  TracefsDecoder d(r);
  auto ev = DecodeAll(d, {"  t-5 (    5) [0] .....  1.1: sys_read -> 0x40",
                          "  t-5 (    5) [0] .....  1.2: sys_futex(uaddr: 0x1, op: 0x80, val: 0)",
                          "  t-5 (    5) [0] .....  1.3: sys_read -> 0x0"});
  ASSERT_EQ(ev.size(), 1u);
}

//-----------------------------------------------------------------------------
// Live smoke test. Needs write access to tracefs; skipped otherwise.
//-----------------------------------------------------------------------------

bool TracefsWritable() {
  std::string dir = "/sys/kernel/tracing/instances/prismlike-probe-" + std::to_string(getpid());
  if (mkdir(dir.c_str(), 0755) != 0) return false;
  rmdir(dir.c_str());
  return true;
}

std::vector<MetricSample> Samples(const std::string& db) {
  auto store = MetricStore::OpenReadOnly(db);
  if (!store.ok()) return {};
  return (*store)->LoadSamples(TimeRange{0, INT64_MAX}).value_or(std::vector<MetricSample>{});
}

TEST(LiveTracefsTest, SelftestWorkloadRecordsAndReplaysIdentically) {
  if (!TracefsWritable()) GTEST_SKIP() << "tracefs is not writable here";
  TempDir dir;
  std::string cmd = std::string(PRISMLIKE_SELFTEST_WORKLOAD) + " --seconds 4 --scratch " +
                    dir.path();
  FILE* wl = popen(cmd.c_str(), "r");
  ASSERT_NE(wl, nullptr);
  int pid = 0;
  ASSERT_EQ(fscanf(wl, "ready %d", &pid), 1);

  SessionConfig config;
  config.source = SourceKind::kLive;
  config.bootstrap_pids = {pid};
  config.output_db_path = dir.File("live.db");
  config.tee_trace_path = dir.File("tee.ndjson");
  config.duration = 2 * kNanosPerSecond;
  std::atomic<bool> stop{false};
  auto live = RunLiveSession(config, stop);
  pclose(wl);
  ASSERT_TRUE(live.ok()) << live.status();
  EXPECT_GE(live->windows, 1);
  EXPECT_GE(live->processes, 2) << "the pipe-fed child should be discovered";

  std::vector<MetricSample> samples = Samples(dir.File("live.db"));
  std::set<std::string> comms;
  bool futex = false, pipe = false, runtime = false;
  for (const MetricSample& s : samples) {
    if (!s.thread || s.thread->tgid != pid) continue;
    comms.insert(s.thread->comm);
    runtime |= s.metric == MetricKind::kRuntime && s.value > 0;
    futex |= s.metric == MetricKind::kFutexWaitTime && s.value > 0;
    pipe |= s.metric == MetricKind::kPipeWaitCount && s.value > 0;
  }
  EXPECT_TRUE(runtime);
  EXPECT_TRUE(futex);
  EXPECT_TRUE(pipe);
  EXPECT_TRUE(comms.contains("sw_lock_a"));

  SessionConfig replay;
  replay.source = SourceKind::kReplay;
  replay.bootstrap_pids = {pid};
  replay.trace_path = dir.File("tee.ndjson");
  replay.output_db_path = dir.File("replay.db");
  ASSERT_TRUE(RunReplaySession(replay).ok());
  EXPECT_EQ(samples, Samples(dir.File("replay.db")));
}

TEST(LiveTracefsTest, ZeroDurationGivesAnEmptyValidStore) {
  TempDir dir;
  SessionConfig config;
  config.source = SourceKind::kLive;
  config.bootstrap_pids = {getpid()};
  config.output_db_path = dir.File("zero.db");
  config.duration = 0;
  std::atomic<bool> stop{false};
  auto live = RunLiveSession(config, stop);
  ASSERT_TRUE(live.ok()) << live.status();
  EXPECT_EQ(live->windows, 0);
  auto store = MetricStore::OpenReadOnly(dir.File("zero.db"));
  ASSERT_TRUE(store.ok()) << store.status();
  EXPECT_TRUE((*store)->Windows()->empty());
}

TEST(LiveTracefsTest, UnknownBootstrapPidIsRejected) {
  TempDir dir;
  SessionConfig config;
  config.source = SourceKind::kLive;
  config.bootstrap_pids = {999999999};
  config.output_db_path = dir.File("x.db");
  config.duration = kNanosPerSecond;
  std::atomic<bool> stop{false};
  EXPECT_EQ(RunLiveSession(config, stop).status().code(), absl::StatusCode::kNotFound);
}

TEST(LiveTracefsTest, MissingTracefsIsAnEnvironmentError) {
  TempDir dir;
  ProcFdResolver resolver;
  TracefsOptions options;
  options.root = dir.File("no-tracefs");
  EXPECT_EQ(TracefsSource::Create(options, resolver).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

}  // namespace
}  // namespace prismlike
