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

#include "prismlike/store/metric_store.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"
#include "src/store/sqlite.h"

namespace prismlike {

namespace {

constexpr std::string_view kSchema = R"sql(
CREATE TABLE meta (
  key TEXT PRIMARY KEY,
  value TEXT NOT NULL
);
CREATE TABLE windows (
  ts INTEGER PRIMARY KEY,
  end_ts INTEGER NOT NULL
);
CREATE TABLE processes (
  tgid INTEGER PRIMARY KEY,
  comm TEXT NOT NULL,
  first_seen INTEGER NOT NULL,
  parent_tgid INTEGER
);
CREATE TABLE threads (
  tid INTEGER PRIMARY KEY,
  tgid INTEGER NOT NULL,
  comm TEXT NOT NULL,
  first_seen INTEGER NOT NULL
);
CREATE TABLE task_samples (
  ts INTEGER NOT NULL,
  tgid INTEGER NOT NULL,
  tid INTEGER NOT NULL,
  comm TEXT NOT NULL,
  runtime_ns INTEGER NOT NULL,
  rq_time_ns INTEGER NOT NULL,
  sleep_time_ns INTEGER NOT NULL,
  block_time_ns INTEGER NOT NULL,
  iowait_time_ns INTEGER NOT NULL,
  blkio_share REAL NOT NULL,
  PRIMARY KEY (ts, tid)
);
CREATE TABLE resource_waits (
  ts INTEGER NOT NULL,
  tgid INTEGER NOT NULL,
  tid INTEGER NOT NULL,
  res_kind TEXT NOT NULL,
  bri_key TEXT NOT NULL,
  wait_ns INTEGER NOT NULL,
  wait_count INTEGER NOT NULL,
  dir TEXT NOT NULL DEFAULT '',
  PRIMARY KEY (ts, tid, res_kind, bri_key)
);
CREATE INDEX resource_waits_by_bri ON resource_waits (bri_key, ts);
CREATE TABLE futex_wakes (
  ts INTEGER NOT NULL,
  tgid INTEGER NOT NULL,
  tid INTEGER NOT NULL,
  bri_key TEXT NOT NULL,
  wake_count INTEGER NOT NULL,
  PRIMARY KEY (ts, tid, bri_key)
);
CREATE INDEX futex_wakes_by_bri ON futex_wakes (bri_key, ts);
CREATE TABLE epoll_file_waits (
  ts INTEGER NOT NULL,
  epoll_key TEXT NOT NULL,
  bri_key TEXT NOT NULL,
  wait_ns INTEGER NOT NULL,
  PRIMARY KEY (ts, epoll_key, bri_key)
);
CREATE TABLE device_io (
  ts INTEGER NOT NULL,
  tgid INTEGER NOT NULL,
  tid INTEGER NOT NULL,
  dev_major INTEGER NOT NULL,
  dev_minor INTEGER NOT NULL,
  sectors INTEGER NOT NULL,
  PRIMARY KEY (ts, tid, dev_major, dev_minor)
);
CREATE TABLE discovery_edges (
  from_tgid INTEGER NOT NULL,
  to_tgid INTEGER NOT NULL,
  to_external TEXT NOT NULL DEFAULT '',
  bri_key TEXT NOT NULL,
  first_seen INTEGER NOT NULL,
  CHECK (from_tgid <> to_tgid),
  PRIMARY KEY (from_tgid, to_tgid, to_external, bri_key)
);
CREATE VIEW taskstats_view AS
  SELECT ts, tgid AS pid, tid, comm, runtime_ns, rq_time_ns, sleep_time_ns, block_time_ns,
         iowait_time_ns, blkio_share
  FROM task_samples;
CREATE VIEW waits_view AS
  SELECT w.ts, w.tgid AS pid, w.tid, t.comm, w.res_kind, w.bri_key, w.dir, w.wait_ns, w.wait_count
  FROM resource_waits w LEFT JOIN threads t ON t.tid = w.tid;
CREATE VIEW futex_wakes_view AS
  SELECT f.ts, f.tgid AS pid, f.tid, t.comm, f.bri_key, f.wake_count
  FROM futex_wakes f LEFT JOIN threads t ON t.tid = f.tid;
CREATE VIEW device_io_view AS
  SELECT d.ts, d.tgid AS pid, d.tid, t.comm, d.dev_major, d.dev_minor, d.sectors
  FROM device_io d LEFT JOIN threads t ON t.tid = d.tid;
)sql";

struct TableSpec {
  std::string name;
  std::string order_by;
};

const std::vector<TableSpec>& Tables() {
  static const std::vector<TableSpec> kTables = {
      {"meta", "key"},
      {"windows", "ts"},
      {"processes", "tgid"},
      {"threads", "tid"},
      {"task_samples", "ts, tid"},
      {"resource_waits", "ts, tid, res_kind, bri_key"},
      {"futex_wakes", "ts, tid, bri_key"},
      {"epoll_file_waits", "ts, epoll_key, bri_key"},
      {"device_io", "ts, tid, dev_major, dev_minor"},
      {"discovery_edges", "from_tgid, to_tgid, to_external, bri_key"},
  };
  return kTables;
}

std::string_view DirName(uint8_t access) {
  switch (access & (kAccessRead | kAccessWrite)) {
    case kAccessRead:
      return "read";
    case kAccessWrite:
      return "write";
    case kAccessRead | kAccessWrite:
      return "readwrite";
    default:
      return "";
  }
}

uint8_t DirMask(std::string_view dir) {
  if (dir == "read") return kAccessRead;
  if (dir == "write") return kAccessWrite;
  if (dir == "readwrite") return kAccessRead | kAccessWrite;
  return kAccessNone;
}

struct WaitMetrics {
  MetricKind time;
  MetricKind count;
};

std::optional<WaitMetrics> WaitMetricsOf(std::string_view res_kind) {
  if (res_kind == "pipe") return WaitMetrics{MetricKind::kPipeWaitTime, MetricKind::kPipeWaitCount};
  if (res_kind == "socket") {
    return WaitMetrics{MetricKind::kSocketWaitTime, MetricKind::kSocketWaitCount};
  }
  if (res_kind == "futex") {
    return WaitMetrics{MetricKind::kFutexWaitTime, MetricKind::kFutexWaitCount};
  }
  if (res_kind == "epoll") {
    return WaitMetrics{MetricKind::kEpollWaitTime, MetricKind::kEpollWaitCount};
  }
  return std::nullopt;
}

int SchedSlot(MetricKind m) {
  switch (m) {
    case MetricKind::kRuntime:
      return 0;
    case MetricKind::kRqTime:
      return 1;
    case MetricKind::kSleepTime:
      return 2;
    case MetricKind::kBlockTime:
      return 3;
    case MetricKind::kIowaitTime:
      return 4;
    default:
      return -1;
  }
}

constexpr MetricKind kSlotMetric[5] = {MetricKind::kRuntime, MetricKind::kRqTime,
                                       MetricKind::kSleepTime, MetricKind::kBlockTime,
                                       MetricKind::kIowaitTime};

nlohmann::ordered_json ToJson(const Value& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return nullptr;
}

}  // namespace

struct MetricStore::Impl {
  sqlite::Db db;
};

std::string_view ResKindOf(MetricKind metric) {
  switch (metric) {
    case MetricKind::kPipeWaitTime:
    case MetricKind::kPipeWaitCount:
      return "pipe";
    case MetricKind::kSocketWaitTime:
    case MetricKind::kSocketWaitCount:
      return "socket";
    case MetricKind::kFutexWaitTime:
    case MetricKind::kFutexWaitCount:
      return "futex";
    case MetricKind::kEpollWaitTime:
    case MetricKind::kEpollWaitCount:
      return "epoll";
    default:
      return "";
  }
}

bool CanonicalSampleLess(const MetricSample& a, const MetricSample& b) {
  auto key = [](const MetricSample& s) {
    return std::make_tuple(s.window.start_ns, s.thread ? s.thread->tid : 0,
                           static_cast<int>(s.metric), s.resource ? s.resource->Key() : "",
                           s.subject ? s.subject->Key() : "");
  };
  return key(a) < key(b);
}

MetricStore::MetricStore(std::string path, bool read_only, std::unique_ptr<Impl> impl)
    : path_(std::move(path)), read_only_(read_only), impl_(std::move(impl)) {}

MetricStore::~MetricStore() = default;

const std::vector<std::string>& MetricStore::TableNames() {
  static const std::vector<std::string> kNames = [] {
    std::vector<std::string> out;
    for (const auto& t : Tables()) out.push_back(t.name);
    return out;
  }();
  return kNames;
}

absl::StatusOr<std::unique_ptr<MetricStore>> MetricStore::Create(const std::string& path,
                                                                 const StoreMeta& meta) {
  if (meta.window_ns <= 0) return absl::InvalidArgumentError("window_ns must be positive");
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    return absl::AlreadyExistsError(StrCat("store already exists: ", path));
  }
  auto impl = std::make_unique<Impl>();
  PL_ASSIGN_OR_RETURN(impl->db,
                      sqlite::Db::Open(path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE));
  PL_RETURN_IF_ERROR(impl->db.Exec("BEGIN"));
  PL_RETURN_IF_ERROR(impl->db.Exec(kSchema));
  PL_ASSIGN_OR_RETURN(auto ins, impl->db.Prepare("INSERT INTO meta (key, value) VALUES (?, ?)"));
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"schema_version", StrCat(kStoreSchemaVersion)},
           {"window_ns", StrCat(meta.window_ns)},
           {"source", meta.source}}) {
    ins.Bind(1, k).Bind(2, v);
    PL_RETURN_IF_ERROR(ins.Exec());
  }
  PL_RETURN_IF_ERROR(impl->db.Exec("COMMIT"));
  auto store = std::unique_ptr<MetricStore>(new MetricStore(path, false, std::move(impl)));
  store->meta_ = meta;
  return store;
}

absl::StatusOr<std::unique_ptr<MetricStore>> MetricStore::OpenReadOnly(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    return absl::NotFoundError(StrCat("no store at ", path));
  }
  auto impl = std::make_unique<Impl>();
  PL_ASSIGN_OR_RETURN(impl->db, sqlite::Db::Open(path, SQLITE_OPEN_READONLY));
  auto store = std::unique_ptr<MetricStore>(new MetricStore(path, true, std::move(impl)));
  PL_RETURN_IF_ERROR(store->LoadMeta());
  return store;
}

absl::Status MetricStore::LoadMeta() {
  auto rows = Select("SELECT key, value FROM meta");
  if (!rows.ok()) {
    return absl::FailedPreconditionError(
        StrCat("not a metric store: ", path_, " (", StatusMessage(rows.status()), ")"));
  }
  std::map<std::string, std::string> kv;
  for (const auto& r : rows->rows) kv[std::get<std::string>(r[0])] = std::get<std::string>(r[1]);
  int version = 0;
  if (!ParseInt(kv["schema_version"], &version) || version != kStoreSchemaVersion) {
    return absl::FailedPreconditionError(
        StrCat("unsupported store schema version '", kv["schema_version"], "'"));
  }
  if (!ParseInt(kv["window_ns"], &meta_.window_ns) || meta_.window_ns <= 0) {
    return absl::FailedPreconditionError("store has no valid window_ns");
  }
  meta_.source = kv["source"];
  return absl::OkStatus();
}

absl::Status MetricStore::Append(const AppendBatch& batch) {
  if (read_only_) return absl::PermissionDeniedError("store opened read-only");
  if (batch.empty()) return absl::OkStatus();

  // Reject duplicate keys inside the batch; the primary keys catch the rest.
  std::set<std::tuple<TimestampNs, int32_t, int, std::string, std::string>> seen;
  for (const auto& s : batch.samples) {
    if (s.value < 0) return absl::InvalidArgumentError("negative metric value");
    if (InfoOf(s.metric).granularity == Granularity::kThread && !s.thread) {
      return absl::InvalidArgumentError("thread metric without thread");
    }
    if (InfoOf(s.metric).granularity != Granularity::kThread && !s.resource) {
      return absl::InvalidArgumentError(
          StrCat(MetricName(s.metric), " sample without resource"));
    }
    auto key = std::make_tuple(s.window.start_ns, s.thread ? s.thread->tid : 0,
                               static_cast<int>(s.metric), s.resource ? s.resource->Key() : "",
                               s.subject ? s.subject->Key() : "");
    if (!seen.insert(key).second) {
      return absl::AlreadyExistsError(
          StrCat("conflict: duplicate ", MetricName(s.metric), " sample in batch"));
    }
  }

  struct TaskRow {
    int32_t tgid = 0;
    std::string comm;
    int64_t v[5] = {0, 0, 0, 0, 0};
  };
  struct WaitRow {
    int32_t tgid = 0;
    int64_t wait_ns = 0;
    int64_t count = 0;
    uint8_t access = 0;
  };
  std::map<std::pair<TimestampNs, int32_t>, TaskRow> tasks;
  std::map<std::tuple<TimestampNs, int32_t, std::string, std::string>, WaitRow> waits;
  std::map<std::tuple<TimestampNs, int32_t, std::string>, std::pair<int32_t, int64_t>> wakes;
  std::map<std::tuple<TimestampNs, std::string, std::string>, int64_t> epoll_files;
  std::map<std::tuple<TimestampNs, int32_t, uint32_t, uint32_t>, std::pair<int32_t, int64_t>> dev;
  std::map<int32_t, ThreadInfo> threads;
  std::set<TimestampNs> sample_windows;

  for (const auto& s : batch.samples) {
    const TimestampNs ts = s.window.start_ns;
    sample_windows.insert(ts);
    if (s.thread) threads.try_emplace(s.thread->tid, ThreadInfo{*s.thread, ts});
    const int slot = SchedSlot(s.metric);
    if (slot >= 0) {
      TaskRow& row = tasks[{ts, s.thread->tid}];
      row.tgid = s.thread->tgid;
      row.comm = s.thread->comm;
      row.v[slot] = s.value;
      continue;
    }
    switch (s.metric) {
      case MetricKind::kFutexWakeCount:
        if (!s.thread) return absl::InvalidArgumentError("futex_wake_count without thread");
        wakes[{ts, s.thread->tid, s.resource->Key()}] = {s.thread->tgid, s.value};
        break;
      case MetricKind::kEpollFileWait:
        if (!s.subject) return absl::InvalidArgumentError("epoll_file_wait without epoll");
        epoll_files[{ts, s.subject->Key(), s.resource->Key()}] = s.value;
        break;
      case MetricKind::kSectorCount: {
        const BlockDev* d = s.resource->get_if<BlockDev>();
        if (d == nullptr) return absl::InvalidArgumentError("sector_count on a non-device BRI");
        const int32_t tid = s.thread ? s.thread->tid : 0;
        dev[{ts, tid, d->major, d->minor}] = {s.thread ? s.thread->tgid : 0, s.value};
        if (s.thread) {
          TaskRow& row = tasks[{ts, tid}];
          row.tgid = s.thread->tgid;
          row.comm = s.thread->comm;
        }
        break;
      }
      default: {
        if (!s.thread) return absl::InvalidArgumentError("wait metric without thread");
        WaitRow& row = waits[{ts, s.thread->tid, std::string(ResKindOf(s.metric)),
                              s.resource->Key()}];
        row.tgid = s.thread->tgid;
        row.access |= s.access;
        if (InfoOf(s.metric).is_time) {
          row.wait_ns = s.value;
        } else {
          row.count = s.value;
        }
      }
    }
  }

  sqlite::Db& db = impl_->db;
  PL_RETURN_IF_ERROR(db.Exec("BEGIN IMMEDIATE"));
  auto body = [&]() -> absl::Status {
    PL_ASSIGN_OR_RETURN(auto win, db.Prepare("INSERT INTO windows (ts, end_ts) VALUES (?, ?)"));
    for (const TimeWindow& w : batch.windows) {
      win.Bind(1, w.start_ns).Bind(2, w.end_ns);
      PL_RETURN_IF_ERROR(win.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto th, db.Prepare("INSERT OR IGNORE INTO threads (tid, tgid, comm, "
                                            "first_seen) VALUES (?, ?, ?, ?)"));
    for (const auto& [tid, info] : threads) {
      th.Bind(1, static_cast<int64_t>(tid))
          .Bind(2, static_cast<int64_t>(info.thread.tgid))
          .Bind(3, info.thread.comm)
          .Bind(4, info.first_seen);
      PL_RETURN_IF_ERROR(th.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto dv, db.Prepare("INSERT INTO device_io (ts, tgid, tid, dev_major, "
                                            "dev_minor, sectors) VALUES (?, ?, ?, ?, ?, ?)"));
    for (const auto& [key, v] : dev) {
      const auto& [ts, tid, major, minor] = key;
      dv.Bind(1, ts)
          .Bind(2, static_cast<int64_t>(v.first))
          .Bind(3, static_cast<int64_t>(tid))
          .Bind(4, static_cast<int64_t>(major))
          .Bind(5, static_cast<int64_t>(minor))
          .Bind(6, v.second);
      PL_RETURN_IF_ERROR(dv.Exec());
    }
    std::map<TimestampNs, std::map<int32_t, double>> shares;
    for (TimestampNs ts : sample_windows) {
      PL_ASSIGN_OR_RETURN(shares[ts], DeriveBlkioShare(ts));
    }
    PL_ASSIGN_OR_RETURN(auto tk, db.Prepare(
        "INSERT INTO task_samples (ts, tgid, tid, comm, runtime_ns, rq_time_ns, sleep_time_ns, "
        "block_time_ns, iowait_time_ns, blkio_share) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)"));
    for (const auto& [key, row] : tasks) {
      const auto& [ts, tid] = key;
      double share = 0.0;
      if (auto it = shares[ts].find(tid); it != shares[ts].end()) share = it->second;
      tk.Bind(1, ts).Bind(2, static_cast<int64_t>(row.tgid)).Bind(3, static_cast<int64_t>(tid));
      tk.Bind(4, row.comm);
      for (int i = 0; i < 5; ++i) tk.Bind(5 + i, row.v[i]);
      tk.Bind(10, share);
      PL_RETURN_IF_ERROR(tk.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto wt, db.Prepare(
        "INSERT INTO resource_waits (ts, tgid, tid, res_kind, bri_key, wait_ns, wait_count, dir) "
        "VALUES (?, ?, ?, ?, ?, ?, ?, ?)"));
    for (const auto& [key, row] : waits) {
      const auto& [ts, tid, kind, bri] = key;
      wt.Bind(1, ts)
          .Bind(2, static_cast<int64_t>(row.tgid))
          .Bind(3, static_cast<int64_t>(tid))
          .Bind(4, kind)
          .Bind(5, bri)
          .Bind(6, row.wait_ns)
          .Bind(7, row.count)
          .Bind(8, DirName(row.access));
      PL_RETURN_IF_ERROR(wt.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto wk, db.Prepare("INSERT INTO futex_wakes (ts, tgid, tid, bri_key, "
                                            "wake_count) VALUES (?, ?, ?, ?, ?)"));
    for (const auto& [key, v] : wakes) {
      const auto& [ts, tid, bri] = key;
      wk.Bind(1, ts)
          .Bind(2, static_cast<int64_t>(v.first))
          .Bind(3, static_cast<int64_t>(tid))
          .Bind(4, bri)
          .Bind(5, v.second);
      PL_RETURN_IF_ERROR(wk.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto ef, db.Prepare("INSERT INTO epoll_file_waits (ts, epoll_key, "
                                            "bri_key, wait_ns) VALUES (?, ?, ?, ?)"));
    for (const auto& [key, v] : epoll_files) {
      const auto& [ts, epoll, bri] = key;
      ef.Bind(1, ts).Bind(2, epoll).Bind(3, bri).Bind(4, v);
      PL_RETURN_IF_ERROR(ef.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto pr, db.Prepare("INSERT INTO processes (tgid, comm, first_seen, "
                                            "parent_tgid) VALUES (?, ?, ?, ?)"));
    for (const ProcessInfo& p : batch.processes) {
      pr.Bind(1, static_cast<int64_t>(p.tgid)).Bind(2, p.comm).Bind(3, p.first_seen);
      if (p.parent_tgid) {
        pr.Bind(4, static_cast<int64_t>(*p.parent_tgid));
      } else {
        pr.BindNull(4);
      }
      PL_RETURN_IF_ERROR(pr.Exec());
    }
    PL_ASSIGN_OR_RETURN(auto ed, db.Prepare("INSERT INTO discovery_edges (from_tgid, to_tgid, "
                                            "to_external, bri_key, first_seen) VALUES "
                                            "(?, ?, ?, ?, ?)"));
    for (const DiscoveryEdge& e : batch.edges) {
      ed.Bind(1, static_cast<int64_t>(e.from_tgid))
          .Bind(2, static_cast<int64_t>(e.to_tgid.value_or(0)))
          .Bind(3, e.to_external)
          .Bind(4, e.via.Key())
          .Bind(5, e.first_seen);
      PL_RETURN_IF_ERROR(ed.Exec());
    }
    return absl::OkStatus();
  };
  absl::Status s = body();
  if (!s.ok()) {
    (void)db.Exec("ROLLBACK");
    return s;
  }
  return db.Exec("COMMIT");
}

absl::StatusOr<std::map<int32_t, double>> MetricStore::DeriveBlkioShare(
    TimestampNs window_start) const {
  PL_ASSIGN_OR_RETURN(
      Table t,
      Select("WITH totals AS (SELECT dev_major, dev_minor, SUM(sectors) AS total FROM device_io "
             "WHERE ts = ?1 GROUP BY dev_major, dev_minor) "
             "SELECT d.tid, SUM(d.sectors), SUM(t.total) FROM device_io d JOIN totals t "
             "ON t.dev_major = d.dev_major AND t.dev_minor = d.dev_minor "
             "WHERE d.ts = ?1 AND d.tid > 0 GROUP BY d.tid ORDER BY d.tid",
             {Value(window_start)}));
  std::map<int32_t, double> out;
  for (const auto& r : t.rows) {
    int64_t mine = std::get<int64_t>(r[1]);
    int64_t total = std::get<int64_t>(r[2]);
    out[static_cast<int32_t>(std::get<int64_t>(r[0]))] =
        total > 0 ? static_cast<double>(mine) / static_cast<double>(total) : 0.0;
  }
  return out;
}

absl::StatusOr<Table> MetricStore::Select(const std::string& sql,
                                          const std::vector<Value>& params) const {
  PL_ASSIGN_OR_RETURN(auto stmt, impl_->db.Prepare(sql));
  if (!stmt.read_only()) return absl::PermissionDeniedError("only read-only statements allowed");
  for (size_t i = 0; i < params.size(); ++i) stmt.Bind(static_cast<int>(i + 1), params[i]);
  Table out;
  for (int c = 0; c < stmt.columns(); ++c) out.columns.push_back(stmt.ColumnName(c));
  while (true) {
    PL_ASSIGN_OR_RETURN(bool row, stmt.Step());
    if (!row) break;
    std::vector<Value> values;
    values.reserve(out.columns.size());
    for (int c = 0; c < stmt.columns(); ++c) values.push_back(stmt.Get(c));
    out.rows.push_back(std::move(values));
  }
  return out;
}

absl::StatusOr<std::vector<TimestampNs>> MetricStore::Windows() const {
  PL_ASSIGN_OR_RETURN(Table t, Select("SELECT ts FROM windows ORDER BY ts"));
  std::vector<TimestampNs> out;
  for (const auto& r : t.rows) out.push_back(std::get<int64_t>(r[0]));
  return out;
}

absl::StatusOr<std::optional<TimeRange>> MetricStore::Extent() const {
  PL_ASSIGN_OR_RETURN(Table t, Select("SELECT MIN(ts), MAX(end_ts) FROM windows"));
  if (t.rows.empty() || std::holds_alternative<std::monostate>(t.rows[0][0])) {
    return std::optional<TimeRange>();
  }
  return std::optional<TimeRange>(
      TimeRange{std::get<int64_t>(t.rows[0][0]), std::get<int64_t>(t.rows[0][1])});
}

absl::StatusOr<std::vector<MetricSample>> MetricStore::LoadSamples(const TimeRange& range) const {
  std::vector<MetricSample> out;
  const DurationNs w = meta_.window_ns;
  const std::vector<Value> params = {Value(range.start_ns), Value(range.end_ns)};
  auto window = [&](int64_t ts) { return TimeWindow{ts, ts + w}; };
  auto str = [](const Value& v) { return std::get<std::string>(v); };
  auto num = [](const Value& v) { return std::get<int64_t>(v); };
  auto parse = [](const std::string& key) -> absl::StatusOr<Bri> {
    auto b = ParseBriKey(key);
    if (!b.ok()) return absl::DataLossError(StrCat("corrupt bri_key in store: ", key));
    return b;
  };

  PL_ASSIGN_OR_RETURN(Table tasks, Select(
      "SELECT ts, tgid, tid, comm, runtime_ns, rq_time_ns, sleep_time_ns, block_time_ns, "
      "iowait_time_ns FROM task_samples WHERE ts >= ? AND ts < ?", params));
  for (const auto& r : tasks.rows) {
    ThreadRef ref{static_cast<int32_t>(num(r[2])), static_cast<int32_t>(num(r[1])), str(r[3])};
    for (int i = 0; i < 5; ++i) {
      int64_t v = num(r[4 + i]);
      if (v == 0) continue;
      MetricSample s;
      s.window = window(num(r[0]));
      s.thread = ref;
      s.metric = kSlotMetric[i];
      s.value = v;
      out.push_back(std::move(s));
    }
  }

  PL_ASSIGN_OR_RETURN(Table waits, Select(
      "SELECT w.ts, w.tgid, w.tid, COALESCE(t.comm, ''), w.res_kind, w.bri_key, w.wait_ns, "
      "w.wait_count, w.dir FROM resource_waits w LEFT JOIN threads t ON t.tid = w.tid "
      "WHERE w.ts >= ? AND w.ts < ?", params));
  for (const auto& r : waits.rows) {
    auto metrics = WaitMetricsOf(str(r[4]));
    if (!metrics) return absl::DataLossError(StrCat("unknown res_kind ", str(r[4])));
    PL_ASSIGN_OR_RETURN(Bri bri, parse(str(r[5])));
    ThreadRef ref{static_cast<int32_t>(num(r[2])), static_cast<int32_t>(num(r[1])), str(r[3])};
    for (auto [metric, value] : {std::pair{metrics->time, num(r[6])},
                                 std::pair{metrics->count, num(r[7])}}) {
      if (value == 0) continue;
      MetricSample s;
      s.window = window(num(r[0]));
      s.thread = ref;
      s.metric = metric;
      s.resource = bri;
      s.access = DirMask(str(r[8]));
      s.value = value;
      out.push_back(std::move(s));
    }
  }

  PL_ASSIGN_OR_RETURN(Table wakes, Select(
      "SELECT f.ts, f.tgid, f.tid, COALESCE(t.comm, ''), f.bri_key, f.wake_count "
      "FROM futex_wakes f LEFT JOIN threads t ON t.tid = f.tid WHERE f.ts >= ? AND f.ts < ?",
      params));
  for (const auto& r : wakes.rows) {
    if (num(r[5]) == 0) continue;
    MetricSample s;
    s.window = window(num(r[0]));
    s.thread = ThreadRef{static_cast<int32_t>(num(r[2])), static_cast<int32_t>(num(r[1])),
                         str(r[3])};
    s.metric = MetricKind::kFutexWakeCount;
    PL_ASSIGN_OR_RETURN(s.resource, parse(str(r[4])));
    s.value = num(r[5]);
    out.push_back(std::move(s));
  }

  PL_ASSIGN_OR_RETURN(Table files, Select(
      "SELECT ts, epoll_key, bri_key, wait_ns FROM epoll_file_waits WHERE ts >= ? AND ts < ?",
      params));
  for (const auto& r : files.rows) {
    if (num(r[3]) == 0) continue;
    MetricSample s;
    s.window = window(num(r[0]));
    s.metric = MetricKind::kEpollFileWait;
    PL_ASSIGN_OR_RETURN(s.subject, parse(str(r[1])));
    PL_ASSIGN_OR_RETURN(s.resource, parse(str(r[2])));
    s.value = num(r[3]);
    out.push_back(std::move(s));
  }

  PL_ASSIGN_OR_RETURN(Table devs, Select(
      "SELECT d.ts, d.tgid, d.tid, COALESCE(t.comm, ''), d.dev_major, d.dev_minor, d.sectors "
      "FROM device_io d LEFT JOIN threads t ON t.tid = d.tid WHERE d.ts >= ? AND d.ts < ?",
      params));
  for (const auto& r : devs.rows) {
    if (num(r[6]) == 0) continue;
    MetricSample s;
    s.window = window(num(r[0]));
    if (num(r[2]) != 0) {
      s.thread = ThreadRef{static_cast<int32_t>(num(r[2])), static_cast<int32_t>(num(r[1])),
                           str(r[3])};
    }
    s.metric = MetricKind::kSectorCount;
    s.resource = Bri(BlockDev{static_cast<uint32_t>(num(r[4])), static_cast<uint32_t>(num(r[5]))});
    s.value = num(r[6]);
    out.push_back(std::move(s));
  }

  std::sort(out.begin(), out.end(), CanonicalSampleLess);
  return out;
}

absl::StatusOr<std::vector<ProcessInfo>> MetricStore::LoadProcesses() const {
  PL_ASSIGN_OR_RETURN(Table t, Select("SELECT tgid, comm, first_seen, parent_tgid FROM processes "
                                      "ORDER BY tgid"));
  std::vector<ProcessInfo> out;
  for (const auto& r : t.rows) {
    ProcessInfo p;
    p.tgid = static_cast<int32_t>(std::get<int64_t>(r[0]));
    p.comm = std::get<std::string>(r[1]);
    p.first_seen = std::get<int64_t>(r[2]);
    if (const auto* parent = std::get_if<int64_t>(&r[3])) {
      p.parent_tgid = static_cast<int32_t>(*parent);
    }
    out.push_back(std::move(p));
  }
  return out;
}

absl::StatusOr<std::vector<ThreadInfo>> MetricStore::LoadThreads() const {
  PL_ASSIGN_OR_RETURN(Table t,
                      Select("SELECT tid, tgid, comm, first_seen FROM threads ORDER BY tid"));
  std::vector<ThreadInfo> out;
  for (const auto& r : t.rows) {
    out.push_back(ThreadInfo{ThreadRef{static_cast<int32_t>(std::get<int64_t>(r[0])),
                                       static_cast<int32_t>(std::get<int64_t>(r[1])),
                                       std::get<std::string>(r[2])},
                             std::get<int64_t>(r[3])});
  }
  return out;
}

absl::StatusOr<std::vector<DiscoveryEdge>> MetricStore::LoadEdges() const {
  PL_ASSIGN_OR_RETURN(Table t, Select("SELECT from_tgid, to_tgid, to_external, bri_key, "
                                      "first_seen FROM discovery_edges "
                                      "ORDER BY first_seen, from_tgid, to_tgid, to_external, "
                                      "bri_key"));
  std::vector<DiscoveryEdge> out;
  for (const auto& r : t.rows) {
    DiscoveryEdge e;
    e.from_tgid = static_cast<int32_t>(std::get<int64_t>(r[0]));
    int64_t to = std::get<int64_t>(r[1]);
    if (to != 0) e.to_tgid = static_cast<int32_t>(to);
    e.to_external = std::get<std::string>(r[2]);
    auto bri = ParseBriKey(std::get<std::string>(r[3]));
    if (!bri.ok()) return absl::DataLossError("corrupt bri_key in discovery_edges");
    e.via = *std::move(bri);
    e.first_seen = std::get<int64_t>(r[4]);
    out.push_back(std::move(e));
  }
  return out;
}

absl::Status MetricStore::ExportNdjson(const std::string& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::PermissionDeniedError(StrCat("cannot create ", dir, ": ", ec.message()));
  for (const auto& spec : Tables()) {
    PL_ASSIGN_OR_RETURN(Table t,
                        Select(StrCat("SELECT * FROM ", spec.name, " ORDER BY ", spec.order_by)));
    const std::string file = (std::filesystem::path(dir) / (spec.name + ".ndjson")).string();
    std::ofstream out(file, std::ios::trunc | std::ios::binary);
    if (!out) return absl::PermissionDeniedError(StrCat("cannot write ", file));
    for (const auto& row : t.rows) {
      nlohmann::ordered_json obj;
      for (size_t c = 0; c < t.columns.size(); ++c) obj[t.columns[c]] = ToJson(row[c]);
      out << obj.dump() << '\n';
    }
    out.flush();
    if (!out) return absl::DataLossError(StrCat("write failed: ", file));
  }
  return absl::OkStatus();
}

}  // namespace prismlike
