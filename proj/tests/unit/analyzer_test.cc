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


#include "prismlike/analyzer/analyzer.h"

#include <gtest/gtest.h>

#include <chrono>

#include "prismlike/collector/trace_codec.h"
#include "prismlike/graph/dynamics_graph.h"
#include "prismlike/sim/scenario.h"
#include "tests/support/fixtures.h"
#include "tests/support/temp_dir.h"

namespace prismlike {
namespace {

using ::prismlike::testing::LoadFixtureInfo;
using ::prismlike::testing::ReplayFixture;
using ::prismlike::testing::TempDir;

constexpr DurationNs kSec = kNanosPerSecond;

std::unique_ptr<MetricStore> Fixture(const TempDir& dir, const std::string& name) {
  const std::string db = dir.File(name + ".db3");
  auto summary = ReplayFixture(name, db);
  EXPECT_TRUE(summary.ok()) << summary.status();
  return *MetricStore::OpenReadOnly(db);
}

std::unique_ptr<MetricStore> FromEvents(const TempDir& dir, const std::vector<KernelEvent>& events) {
  SessionConfig config;
  config.trace_path = dir.File("t.trace.ndjson");
  config.output_db_path = dir.File("t.db3");
  EXPECT_TRUE(WriteTraceFile(config.trace_path, events).ok());
  EXPECT_TRUE(RunReplaySession(config).ok());
  return *MetricStore::OpenReadOnly(config.output_db_path);
}

DiagnosisRequest RequestFor(const std::string& name) {
  auto info = *LoadFixtureInfo(name);
  DiagnosisRequest req;
  req.baseline = info.baseline;
  req.compare = info.compare;
  return req;
}

std::set<int32_t> Tids(const std::vector<ThreadRef>& threads) {
  std::set<int32_t> out;
  for (const ThreadRef& t : threads) out.insert(t.tid);
  return out;
}

std::set<int32_t> Tids(const std::set<ThreadRef>& threads) {
  std::set<int32_t> out;
  for (const ThreadRef& t : threads) out.insert(t.tid);
  return out;
}

using FlagId = std::tuple<int32_t, MetricKind, std::optional<Bri>, std::optional<Bri>>;

std::set<FlagId> Ids(const std::vector<FlaggedMetric>& flags) {
  std::set<FlagId> out;
  for (const FlaggedMetric& f : flags) {
    out.emplace(f.thread.tid, f.key.metric, f.key.resource, f.key.subject);
  }
  return out;
}

TEST(EntryThreadsTest, MysqlFixtureSelectsInetThreads) {
  TempDir dir;
  auto store = Fixture(dir, "mysql");
  auto entry = DetectEntryThreads(*store, {0, 10 * kSec});
  ASSERT_TRUE(entry.ok()) << entry.status();
  EXPECT_EQ(Tids(*entry), (std::set<int32_t>{6003, 6004, 6006}));
  EXPECT_FALSE(Tids(*entry).count(sim::mysql::kUnixOnlyTid));
  EXPECT_TRUE(DetectEntryThreads(*store, {0, 10 * kSec}, {999})->empty());
}

TEST(EntryThreadsTest, NoSocketActivityGivesEmptySet) {
  TempDir dir;
  auto store = Fixture(dir, "discovery");
  EXPECT_TRUE(DetectEntryThreads(*store, {0, 10 * kSec})->empty());
}

TEST(CounterpartsTest, LockFutexReachesContender) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  const TimeRange all{0, 60 * kSec};
  auto cps = Counterparts(*store, all, sim::lock::LockFutex(), {sim::lock::kEntryTid});
  ASSERT_TRUE(cps.ok()) << cps.status();
  EXPECT_EQ(Tids(*cps), (std::set<int32_t>{sim::lock::kContenderTid}));
  EXPECT_TRUE(Counterparts(*store, all, FutexAddr{3000, 0xdead, false})->empty());
  auto device = Counterparts(*store, all, BlockDev{8, 0});
  ASSERT_FALSE(device.ok());
  EXPECT_EQ(device.status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(std::string(device.status().message()).rfind("NotAnIpcResource", 0), 0u);
}

TEST(TrackingTest, LockFixtureReachesContenderThroughFutex) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  const auto start = std::chrono::steady_clock::now();
  auto report = SelectiveThreadTracking(*store, RequestFor("lock"));
  const auto elapsed = std::chrono::steady_clock::now() - start;
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_LT(elapsed, std::chrono::seconds(5));
  EXPECT_EQ(Tids(report->tracked.entry), (std::set<int32_t>{sim::lock::kEntryTid}));
  EXPECT_EQ(Tids(report->tracked.tracked),
            (std::set<int32_t>{sim::lock::kEntryTid, sim::lock::kContenderTid}));
  bool futex_flag = false;
  for (const FlaggedMetric& f : report->flagged_chain) {
    if (f.thread.tid == sim::lock::kEntryTid && f.key.metric == MetricKind::kFutexWaitTime &&
        f.key.resource == sim::lock::LockFutex()) {
      futex_flag = true;
      EXPECT_EQ(f.counterparts, std::vector<int32_t>{sim::lock::kContenderTid});
      EXPECT_EQ(f.iteration, 0);
    }
    if (f.thread.tid == sim::lock::kContenderTid) {
      EXPECT_EQ(f.iteration, 1);
    }
  }
  EXPECT_TRUE(futex_flag);
  EXPECT_FALSE(report->exhausted);
  EXPECT_EQ(report->tracked.iterations, 2);
}

TEST(TrackingTest, NoDegradationFlagsNothing) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  DiagnosisRequest req;
  req.baseline = {0, 30 * kSec};
  req.compare = req.baseline;
  auto report = *SelectiveThreadTracking(*store, req);
  EXPECT_TRUE(report.flagged_chain.empty());
  EXPECT_EQ(Tids(report.tracked.tracked), Tids(report.tracked.entry));
  EXPECT_TRUE(report.exhausted);
  EXPECT_TRUE(FullSearch(*store, req)->empty());
}

TEST(TrackingTest, ChainGrowsOneThreadPerIteration) {
  TempDir dir;
  auto store = Fixture(dir, "chain");
  auto report = *SelectiveThreadTracking(*store, RequestFor("chain"));
  EXPECT_EQ(report.tracked.iterations, 3);
  EXPECT_EQ(Tids(report.tracked.tracked),
            (std::set<int32_t>{sim::chain::kEntryTid, sim::chain::kMidTid,
                               sim::chain::kWorkerTid}));
  std::map<int, std::set<int32_t>> by_iteration;
  for (const FlaggedMetric& f : report.flagged_chain) by_iteration[f.iteration].insert(f.thread.tid);
  EXPECT_EQ(by_iteration[0], std::set<int32_t>{sim::chain::kEntryTid});
  EXPECT_EQ(by_iteration[1], std::set<int32_t>{sim::chain::kMidTid});
  EXPECT_EQ(by_iteration[2], std::set<int32_t>{sim::chain::kWorkerTid});
  // The unrelated thread shifts too but nothing links it to the entry.
  auto full = *FullSearch(*store, RequestFor("chain"));
  bool stray = false;
  for (const FlaggedMetric& f : full) stray |= f.thread.tid == sim::chain::kStrayTid;
  EXPECT_TRUE(stray);
}

TEST(TrackingTest, KafkaChainOrdersEpollPipeThenWorkerBlockTime) {
  TempDir dir;
  auto store = Fixture(dir, "kafka");
  auto report = *SelectiveThreadTracking(*store, RequestFor("kafka"));
  EXPECT_FALSE(report.exhausted);
  auto position = [&](auto pred) {
    for (size_t i = 0; i < report.flagged_chain.size(); ++i) {
      if (pred(report.flagged_chain[i])) return static_cast<int>(i);
    }
    return -1;
  };
  const int epoll = position([](const FlaggedMetric& f) {
    return f.thread.tid == sim::kafka::kNetworkTid && f.key.metric == MetricKind::kEpollWaitTime;
  });
  const int pipe = position([](const FlaggedMetric& f) {
    return f.thread.tid == sim::kafka::kNetworkTid && f.key.metric == MetricKind::kPipeWaitTime &&
           f.key.resource == Bri(sim::kafka::Pipe());
  });
  const int block = position([](const FlaggedMetric& f) {
    return f.thread.tid >= sim::kafka::kFirstWorkerTid &&
           f.thread.tid < sim::kafka::kFirstWorkerTid + sim::kafka::kWorkers &&
           f.key.metric == MetricKind::kBlockTime;
  });
  ASSERT_GE(epoll, 0);
  ASSERT_GE(pipe, 0);
  ASSERT_GE(block, 0);
  EXPECT_LT(epoll, pipe);
  EXPECT_LT(pipe, block);
  EXPECT_EQ(report.tracked.tracked.size(), 1u + sim::kafka::kWorkers);
}

TEST(TrackingTest, TeastoreFlagsOnlyExternalSocketWaits) {
  TempDir dir;
  auto store = Fixture(dir, "teastore");
  auto report = *SelectiveThreadTracking(*store, RequestFor("teastore"));
  const std::string external(sim::teastore::kPersistence);
  int socket_flags = 0;
  for (const FlaggedMetric& f : report.flagged_chain) {
    if (!f.key.resource) continue;
    EXPECT_EQ(f.key.metric, MetricKind::kSocketWaitTime) << MetricName(f.key.metric);
    const SocketTuple* s = f.key.resource->get_if<SocketTuple>();
    ASSERT_NE(s, nullptr);
    EXPECT_TRUE(s->first == external || s->second == external) << f.key.resource->Key();
    ++socket_flags;
  }
  EXPECT_EQ(socket_flags, sim::teastore::kThreads);
  auto graph = *BuildProcessGraph(*store);
  bool ext_node = false;
  for (const ProcessNode& n : graph.nodes) ext_node |= n.external && n.id == "external:" + external;
  EXPECT_TRUE(ext_node);
}

TEST(TrackingTest, EmptyEntrySetRecommendsFullSearch) {
  TempDir dir;
  auto store = Fixture(dir, "discovery");
  DiagnosisRequest req;
  req.baseline = {0, 2 * kSec};
  req.compare = {2 * kSec, 5 * kSec};
  auto report = *SelectiveThreadTracking(*store, req);
  EXPECT_TRUE(report.exhausted);
  EXPECT_TRUE(report.tracked.tracked.empty());
  EXPECT_NE(report.hint.find("full search"), std::string::npos);
}

TEST(TrackingTest, InvalidRequestsAreRejected) {
  TempDir dir;
  auto store = Fixture(dir, "discovery");
  DiagnosisRequest req;
  req.baseline = {5 * kSec, 2 * kSec};
  req.compare = {2 * kSec, 5 * kSec};
  EXPECT_EQ(SelectiveThreadTracking(*store, req).status().code(),
            absl::StatusCode::kInvalidArgument);
  req.baseline = {0, kSec};
  req.alpha = 1.5;
  EXPECT_EQ(FullSearch(*store, req).status().code(), absl::StatusCode::kInvalidArgument);
}

TEST(TrackingTest, FullSearchContainsSelectiveAndIsSorted) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  auto report = *SelectiveThreadTracking(*store, RequestFor("lock"));
  auto full = *FullSearch(*store, RequestFor("lock"));
  const std::set<FlagId> all = Ids(full);
  for (const FlagId& id : Ids(report.flagged_chain)) EXPECT_TRUE(all.count(id));
  for (size_t i = 1; i < full.size(); ++i) {
    EXPECT_GE(std::abs(full[i - 1].shift.cohens_d), std::abs(full[i].shift.cohens_d));
  }
}

TEST(TrackingTest, ReportJsonIsDeterministic) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  const std::string a = ToJson(*SelectiveThreadTracking(*store, RequestFor("lock"))).dump(2);
  TempDir dir2;
  auto store2 = Fixture(dir2, "lock");
  const std::string b = ToJson(*SelectiveThreadTracking(*store2, RequestFor("lock"))).dump(2);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_TRUE(j["tracked"].contains("T_track"));
  EXPECT_FALSE(j["flagged_chain"].empty());
  EXPECT_EQ(j["flagged_chain"][0]["thread"]["tid"], sim::lock::kEntryTid);
}

// Algorithm properties over random stores: selective flags are a subset of
// full search, every thread is scanned once, the loop is bounded by the
// thread count, counterparts land in T_track, and alpha is monotone.
TEST(TrackingTest, RandomStoreProperties) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    TempDir dir;
    const sim::Scenario s = sim::RandomScenario(seed);
    auto store = FromEvents(dir, s.events);
    DiagnosisRequest req;
    req.baseline = s.baseline;
    req.compare = s.compare;
    auto report = SelectiveThreadTracking(*store, req);
    ASSERT_TRUE(report.ok()) << report.status();
    auto full = *FullSearch(*store, req);
    const std::set<FlagId> all = Ids(full);
    for (const FlagId& id : Ids(report->flagged_chain)) {
      EXPECT_TRUE(all.count(id)) << "seed " << seed;
    }
    const auto threads = store->LoadThreads();
    const int64_t n = static_cast<int64_t>(threads->size());
    EXPECT_LE(report->tracked.iterations, n) << "seed " << seed;
    for (const auto& [tid, scans] : report->tracked.scans) EXPECT_EQ(scans, 1) << seed;
    EXPECT_EQ(report->tracked.scans.size(), report->tracked.seen.size());
    EXPECT_LE(report->tracked.metric_tests,
              n * (kMetricKindCount + static_cast<int64_t>(kDefaultMaxBrisPerThread)));
    const std::set<int32_t> tracked = Tids(report->tracked.tracked);
    for (int32_t tid : Tids(report->tracked.entry)) EXPECT_TRUE(tracked.count(tid));
    EXPECT_EQ(Tids(report->tracked.seen), tracked);
    for (const FlaggedMetric& f : report->flagged_chain) {
      for (int32_t cp : f.counterparts) EXPECT_TRUE(tracked.count(cp)) << seed;
    }
    DiagnosisRequest strict = req;
    strict.alpha = 0.001;
    const std::set<FlagId> strict_ids = Ids(*FullSearch(*store, strict));
    for (const FlagId& id : strict_ids) EXPECT_TRUE(all.count(id)) << seed;
  }
}

}  // namespace
}  // namespace prismlike
