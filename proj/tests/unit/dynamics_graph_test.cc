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


#include "prismlike/graph/dynamics_graph.h"

#include <gtest/gtest.h>

#include <fmt/format.h>

#include "prismlike/collector/trace_codec.h"
#include "prismlike/sim/scenario.h"
#include "tests/support/fixtures.h"
#include "tests/support/temp_dir.h"

namespace prismlike {
namespace {

using ::prismlike::testing::LoadFixtureInfo;
using ::prismlike::testing::ReplayFixture;
using ::prismlike::testing::TempDir;

constexpr DurationNs kMs = 1'000'000;
constexpr TimeRange kAll{0, INT64_MAX};

std::unique_ptr<MetricStore> Fixture(const TempDir& dir, const std::string& name) {
  const std::string db = dir.File(name + ".db3");
  auto summary = ReplayFixture(name, db);
  EXPECT_TRUE(summary.ok()) << summary.status();
  return *MetricStore::OpenReadOnly(db);
}

std::unique_ptr<MetricStore> FromEvents(const TempDir& dir, const std::vector<KernelEvent>& events,
                                        std::vector<int32_t> bootstrap = {}) {
  SessionConfig config;
  config.trace_path = dir.File("t.trace.ndjson");
  config.output_db_path = dir.File("t.db3");
  config.bootstrap_pids = std::move(bootstrap);
  EXPECT_TRUE(WriteTraceFile(config.trace_path, events).ok());
  EXPECT_TRUE(RunReplaySession(config).ok());
  return *MetricStore::OpenReadOnly(config.output_db_path);
}

std::string Tid(int32_t tid) { return fmt::format("tid:{}", tid); }

int64_t Scalar(const MetricStore& store, const std::string& sql) {
  auto t = store.Select(sql);
  EXPECT_TRUE(t.ok()) << t.status() << sql;
  const Value& v = t->rows.at(0).at(0);
  return std::holds_alternative<int64_t>(v) ? std::get<int64_t>(v) : 0;
}

// Recomputes an edge's weight straight from the store tables.
int64_t OracleWeight(const MetricStore& store, const DynEdge& e, const TimeRange& r) {
  const std::string in_range = fmt::format("ts >= {} AND ts < {}", r.start_ns, r.end_ns);
  auto tid_of = [](const std::string& id) { return id.substr(4); };
  switch (e.kind) {
    case DynEdgeKind::kWaitsOn:
      return Scalar(store, fmt::format("SELECT SUM(wait_ns) FROM resource_waits WHERE tid = {} "
                                       "AND bri_key = '{}' AND dir = '' AND {}",
                                       tid_of(e.from), e.to, in_range));
    case DynEdgeKind::kWakes:
      return Scalar(store, fmt::format("SELECT SUM(wake_count) FROM futex_wakes WHERE tid = {} "
                                       "AND bri_key = '{}' AND {}",
                                       tid_of(e.from), e.to, in_range));
    case DynEdgeKind::kWrites:
      return Scalar(store, fmt::format("SELECT SUM(wait_count) FROM resource_waits WHERE tid = {} "
                                       "AND bri_key = '{}' AND dir IN ('write','readwrite') AND {}",
                                       tid_of(e.from), e.to, in_range));
    case DynEdgeKind::kReads:
      return Scalar(store, fmt::format("SELECT SUM(wait_count) FROM resource_waits WHERE tid = {} "
                                       "AND bri_key = '{}' AND dir IN ('read','readwrite') AND {}",
                                       tid_of(e.to), e.from, in_range));
    case DynEdgeKind::kSchedules:
      return Scalar(store, fmt::format(
                               "SELECT SUM(w.wake_count) FROM futex_wakes w WHERE w.tid = {0} AND "
                               "w.{2} AND w.bri_key IN (SELECT bri_key FROM resource_waits WHERE "
                               "tid = {1} AND res_kind = 'futex' AND wait_ns > 0 AND {2})",
                               tid_of(e.from), tid_of(e.to), in_range));
    case DynEdgeKind::kRegisteredIn:
      return Scalar(store, fmt::format("SELECT SUM(wait_ns) FROM epoll_file_waits WHERE "
                                       "bri_key = '{}' AND epoll_key = '{}' AND {}",
                                       e.from, e.to, in_range));
    case DynEdgeKind::kIoTo:
      if (e.from.rfind("tid:", 0) == 0) {
        const auto dev = *ParseBriKey(e.to);
        const BlockDev& d = *dev.get_if<BlockDev>();
        return Scalar(store, fmt::format("SELECT SUM(sectors) FROM device_io WHERE tid = {} AND "
                                         "dev_major = {} AND dev_minor = {} AND {}",
                                         tid_of(e.from), d.major, d.minor, in_range));
      }
      return Scalar(store, fmt::format("SELECT SUM(wait_count) FROM resource_waits WHERE "
                                       "bri_key = '{}' AND {}",
                                       e.from, in_range));
  }
  return -1;
}

TEST(ThreadGraphTest, LockFixtureHasBidirectionalContention) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  auto g = BuildThreadGraph(*store, kAll);
  ASSERT_TRUE(g.ok()) << g.status();
  const std::string f1 = sim::lock::LockFutex().Key();
  const std::string t3 = Tid(sim::lock::kContenderTid);
  const std::string t4 = Tid(sim::lock::kEntryTid);
  ASSERT_NE(g->FindNode(f1), nullptr);
  EXPECT_EQ(g->FindNode(f1)->alias, "f1");
  EXPECT_EQ(g->FindNode(t3)->alias, "t3");
  EXPECT_EQ(g->FindNode(t4)->alias, "t4");
  for (const std::string& t : {t3, t4}) {
    EXPECT_TRUE(g->HasEdge(t, f1, DynEdgeKind::kWaitsOn)) << t;
    EXPECT_TRUE(g->HasEdge(t, f1, DynEdgeKind::kWakes)) << t;
  }
  EXPECT_TRUE(g->HasEdge(t3, t4, DynEdgeKind::kSchedules));
  EXPECT_TRUE(g->HasEdge(t4, t3, DynEdgeKind::kSchedules));
}

TEST(ThreadGraphTest, KafkaFixtureEncodesPipeChain) {
  TempDir dir;
  auto store = Fixture(dir, "kafka");
  auto g = *BuildThreadGraph(*store, kAll, {sim::kafka::kPid});
  const std::string p1 = Bri(sim::kafka::Pipe()).Key();
  const std::string e1 = Bri(EpollObj{sim::kafka::kEpollAddr}).Key();
  EXPECT_EQ(g.FindNode(p1)->alias, "p1");
  EXPECT_EQ(g.FindNode(e1)->alias, "e1");
  for (int i = 0; i < sim::kafka::kWorkers; ++i) {
    const std::string w = Tid(sim::kafka::kFirstWorkerTid + i);
    EXPECT_EQ(g.FindNode(w)->alias, fmt::format("t{}", i + 1));
    EXPECT_TRUE(g.HasEdge(w, p1, DynEdgeKind::kWrites)) << w;
    EXPECT_TRUE(g.HasEdge(w, Bri(sim::kafka::Disk()).Key(), DynEdgeKind::kIoTo)) << w;
  }
  const std::string t9 = Tid(sim::kafka::kNetworkTid);
  EXPECT_EQ(g.FindNode(t9)->alias, "t9");
  EXPECT_TRUE(g.HasEdge(p1, t9, DynEdgeKind::kReads));
  EXPECT_TRUE(g.HasEdge(p1, e1, DynEdgeKind::kRegisteredIn));
  EXPECT_TRUE(g.HasEdge(t9, e1, DynEdgeKind::kWaitsOn));
}

TEST(ThreadGraphTest, SingleThreadWithoutResources) {
  TempDir dir;
  const ThreadRef t{11, 10, "solo"};
  auto store = FromEvents(dir, {{0, t, SchedWakeup{}},
                                {0, t, SchedSwitchIn{}},
                                {5 * kMs, t, SchedSwitchOut{SchedState::kSleep, false, false}}});
  auto g = *BuildThreadGraph(*store, kAll);
  ASSERT_EQ(g.nodes.size(), 1u);
  EXPECT_EQ(g.nodes[0].alias, "t1");
  EXPECT_TRUE(g.edges.empty());
}

TEST(ThreadGraphTest, EmptyRangeGivesEmptyGraph) {
  TempDir dir;
  auto store = Fixture(dir, "lock");
  auto g = *BuildThreadGraph(*store, TimeRange{5, 5});
  EXPECT_TRUE(g.nodes.empty());
  EXPECT_TRUE(g.edges.empty());
}

TEST(ThreadGraphTest, TgidFilterRestrictsThreads) {
  TempDir dir;
  auto store = Fixture(dir, "discovery");
  auto g = *BuildThreadGraph(*store, kAll, {sim::discovery::kB});
  ASSERT_FALSE(g.nodes.empty());
  for (const DynNode& n : g.nodes) {
    if (n.thread) {
      EXPECT_EQ(n.thread->tgid, sim::discovery::kB);
    }
  }
}

TEST(ThreadGraphTest, ThresholdDropsNoiseResources) {
  TempDir dir;
  const ThreadRef t{11, 10, "w"};
  // One 100 us futex wait: below the 1 ms default.
  auto store = FromEvents(dir, {{0, t, SchedWakeup{}},
                                {0, t, SchedSwitchIn{}},
                                {kMs, t, FutexEnter{0x10, FutexOp::kWait, 0, false}},
                                {kMs, t, SchedSwitchOut{SchedState::kSleep, false, false}},
                                {kMs + 100'000, t, SchedWakeup{}},
                                {kMs + 100'000, t, SchedSwitchIn{}},
                                {kMs + 100'000, t, FutexExit{0}}});
  auto g = *BuildThreadGraph(*store, kAll);
  EXPECT_EQ(g.nodes.size(), 1u);
  GraphOptions loose;
  loose.min_time_ns = 0;
  auto g2 = *BuildThreadGraph(*store, kAll, {}, loose);
  EXPECT_EQ(g2.nodes.size(), 2u);
  ASSERT_EQ(g2.edges.size(), 1u);
  EXPECT_EQ(g2.edges[0].weight, 100'000);
}

TEST(ThreadGraphTest, EdgeWeightsMatchStoreAggregates) {
  for (const char* name : {"lock", "kafka", "teastore", "chain", "discovery"}) {
    TempDir dir;
    auto store = Fixture(dir, name);
    auto info = *LoadFixtureInfo(name);
    for (const TimeRange& r : {kAll, info.baseline, info.compare}) {
      auto g = *BuildThreadGraph(*store, r);
      ASSERT_FALSE(g.edges.empty()) << name;
      for (const DynEdge& e : g.edges) {
        EXPECT_EQ(e.weight, OracleWeight(*store, e, r))
            << name << " " << e.from << " " << DynEdgeKindName(e.kind) << " " << e.to;
      }
    }
  }
}

// schedules(w -> v) exists iff w woke and v waited on a common futex.
TEST(ThreadGraphTest, SchedulesEdgeIffWakeAndWaitProperty) {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    TempDir dir;
    const sim::Scenario s = sim::RandomScenario(seed);
    auto store = FromEvents(dir, s.events);
    auto g = *BuildThreadGraph(*store, kAll);
    std::vector<std::string> threads;
    for (const DynNode& n : g.nodes) {
      if (n.thread) threads.push_back(n.id);
    }
    for (const std::string& w : threads) {
      for (const std::string& v : threads) {
        if (w == v) continue;
        const int64_t expected = Scalar(
            *store, fmt::format("SELECT COUNT(*) FROM futex_wakes a JOIN resource_waits b ON "
                                "a.bri_key = b.bri_key WHERE a.tid = {} AND b.tid = {} AND "
                                "a.wake_count > 0 AND b.wait_ns > 0",
                                w.substr(4), v.substr(4)));
        EXPECT_EQ(g.HasEdge(w, v, DynEdgeKind::kSchedules), expected > 0)
            << "seed " << seed << " " << w << "->" << v;
      }
    }
  }
}

TEST(ThreadGraphTest, AliasesAndJsonAreStable) {
  TempDir dir;
  auto store = Fixture(dir, "kafka");
  const std::string a = ToJson(*BuildThreadGraph(*store, kAll)).dump();
  const std::string b = ToJson(*BuildThreadGraph(*store, kAll)).dump();
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_TRUE(j.contains("nodes"));
  EXPECT_TRUE(j.contains("edges"));
  for (const auto& e : j["edges"]) {
    EXPECT_TRUE(e.contains("from") && e.contains("to") && e.contains("kind") &&
                e.contains("weight"));
  }
}

TEST(ProcessGraphTest, DiscoveryIsAPath) {
  TempDir dir;
  auto store = Fixture(dir, "discovery");
  auto g = *BuildProcessGraph(*store);
  ASSERT_EQ(g.nodes.size(), 3u);
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0].from, "pid:8100");
  EXPECT_EQ(g.edges[0].to, "pid:8200");
  EXPECT_EQ(g.edges[1].from, "pid:8200");
  EXPECT_EQ(g.edges[1].to, "pid:8300");
}

TEST(ProcessGraphTest, NoEdgesGivesIsolatedBootstrap) {
  TempDir dir;
  const ThreadRef t{11, 10, "solo"};
  auto store = FromEvents(dir, {{0, t, SchedWakeup{}}, {0, t, SchedSwitchIn{}}}, {10});
  auto g = *BuildProcessGraph(*store);
  ASSERT_EQ(g.nodes.size(), 1u);
  EXPECT_EQ(g.nodes[0].id, "pid:10");
  EXPECT_TRUE(g.edges.empty());
}

TEST(ProcessGraphTest, TeastoreHasExternalPersistence) {
  TempDir dir;
  auto store = Fixture(dir, "teastore");
  auto g = *BuildProcessGraph(*store);
  const std::string ext = fmt::format("external:{}", sim::teastore::kPersistence);
  bool node = false;
  for (const ProcessNode& n : g.nodes) {
    if (n.id == ext) node = n.external;
  }
  EXPECT_TRUE(node);
  bool edge = false;
  for (const ProcessEdge& e : g.edges) {
    if (e.from == "pid:5000" && e.to == ext) edge = true;
  }
  EXPECT_TRUE(edge);
  const auto j = ToJson(g);
  EXPECT_EQ(j["nodes"][0]["comm"], "webui");
}

}  // namespace
}  // namespace prismlike
