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


// prismlike: record, replay, analyze and serve thread-dynamics stores.
//
// Exit codes: 0 ok, 1 usage, 2 runtime failure, 3 environment or privilege.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <glog/logging.h>

#include "CLI11.hpp"
#include "prismlike/collector/session.h"
#include "prismlike/core/strings.h"
#include "prismlike/service/api.h"
#include "prismlike/service/http_server.h"
#include "prismlike/service/kpi.h"
#include "prismlike/store/metric_store.h"

namespace prismlike {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitEnvironment = 3;

std::atomic<bool> g_stop{false};

extern "C" void OnSignal(int) { g_stop.store(true); }

void InstallSignalHandlers() {
  struct sigaction sa {};
  sa.sa_handler = OnSignal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

int Fail(const absl::Status& status, int code) {
  std::cerr << "prismlike: " << status.message() << "\n";
  return code;
}

int ExitCodeFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kOutOfRange:
    case absl::StatusCode::kNotFound:
      return kExitUsage;
    case absl::StatusCode::kPermissionDenied:
    case absl::StatusCode::kUnavailable:
      return kExitEnvironment;
    default:
      return kExitRuntime;
  }
}

int Emit(const ApiResponse& response) {
  if (response.status >= 400) {
    std::cerr << "prismlike: " << response.body.value("error", std::string("error")) << "\n";
    return response.status >= 500 ? kExitRuntime : kExitUsage;
  }
  std::cout << RenderJson(response.body);
  return kExitOk;
}

nlohmann::ordered_json SummaryJson(const SessionSummary& s) {
  return {{"windows", s.windows},     {"threads", s.threads},
          {"processes", s.processes}, {"edges", s.edges},
          {"events", s.events},       {"out_of_order", s.out_of_order}};
}

absl::StatusOr<std::vector<int32_t>> PidVector(const std::string& text) {
  std::vector<int32_t> out;
  if (text.empty()) return out;
  auto set = ParseTgidList(text);
  if (!set.ok()) return set.status();
  out.assign(set->begin(), set->end());
  return out;
}

absl::StatusOr<std::string> ReadWholeFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(StrCat("cannot read ", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

absl::StatusOr<KpiSeries> LoadKpiFile(const std::string& path) {
  auto text = ReadWholeFile(path);
  if (!text.ok()) return text.status();
  if (path.ends_with(".json")) {
    auto j = nlohmann::json::parse(*text, nullptr, false);
    if (j.is_discarded()) return absl::InvalidArgumentError(StrCat(path, ": invalid JSON"));
    return ParseKpiJson(j);
  }
  return ParseKpiCsv(*text);
}

struct CommonSession {
  std::string pids;
  std::string out;
  double window_ms = 1000;
  size_t max_bris = kDefaultMaxBrisPerThread;
};

void AddSessionOptions(CLI::App* cmd, CommonSession& opts, bool pids_required) {
  auto* pids = cmd->add_option("--pids", opts.pids, "Comma-separated bootstrap process ids")
                   ->envname("PRISMLIKE_PIDS");
  if (pids_required) pids->required();
  cmd->add_option("--out", opts.out, "Output store path")->required()->envname("PRISMLIKE_OUT");
  cmd->add_option("--window-ms", opts.window_ms, "Aggregation window in milliseconds")
      ->envname("PRISMLIKE_WINDOW_MS")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-bris", opts.max_bris, "Tracked resources per thread and window")
      ->envname("PRISMLIKE_MAX_BRIS")
      ->check(CLI::PositiveNumber);
}

absl::StatusOr<SessionConfig> BuildConfig(const CommonSession& opts, SourceKind source) {
  SessionConfig config;
  config.source = source;
  auto pids = PidVector(opts.pids);
  if (!pids.ok()) return pids.status();
  config.bootstrap_pids = *pids;
  config.output_db_path = opts.out;
  config.window_ns = static_cast<DurationNs>(opts.window_ms * 1e6);
  config.max_bris_per_thread = opts.max_bris;
  return config;
}

}  // namespace
}  // namespace prismlike

int main(int argc, char** argv) {
  using namespace prismlike;
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;
  FLAGS_minloglevel = google::GLOG_WARNING;

  CLI::App app{"prismlike: thread-dynamics recording and degradation diagnosis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "prismlike 0.1.0");

  // record
  CommonSession rec;
  double duration = -1;
  std::string tee;
  auto* record = app.add_subcommand("record", "Record a live session through tracefs");
  AddSessionOptions(record, rec, true);
  record->add_option("--duration", duration, "Seconds to record; default until SIGINT")
      ->envname("PRISMLIKE_DURATION")
      ->check(CLI::NonNegativeNumber);
  record->add_option("--tee-trace", tee, "Also write every ingested event as a trace file");

  // replay
  CommonSession rep;
  std::string trace;
  auto* replay = app.add_subcommand("replay", "Build a store from a recorded trace");
  AddSessionOptions(replay, rep, false);
  replay->add_option("--trace", trace, "Trace file (NDJSON)")->required()->check(CLI::ExistingFile);

  // analyze
  std::string db, baseline, compare, pids;
  double alpha = kDefaultAlpha;
  bool full = false;
  auto* analyze = app.add_subcommand("analyze", "Run Selective Thread Tracking");
  analyze->add_option("--db", db, "Store path")->required()->envname("PRISMLIKE_DB");
  analyze->add_option("--baseline", baseline, "Baseline range a..b in seconds")->required();
  analyze->add_option("--compare", compare, "Comparison range c..d in seconds")->required();
  analyze->add_option("--pids", pids, "Restrict entry threads to these processes");
  analyze->add_option("--alpha", alpha, "Significance level")->envname("PRISMLIKE_ALPHA");
  analyze->add_flag("--full", full, "Test every metric of every thread instead");

  // export
  std::string export_dir;
  auto* exp = app.add_subcommand("export", "Dump every table as canonical NDJSON");
  exp->add_option("--db", db, "Store path")->required()->envname("PRISMLIKE_DB");
  exp->add_option("--out", export_dir, "Output directory")->required();

  // graph
  std::string range;
  bool process_graph = false;
  auto* graph = app.add_subcommand("graph", "Print the thread or process dynamics graph");
  graph->add_option("--db", db, "Store path")->required()->envname("PRISMLIKE_DB");
  graph->add_option("--range", range, "Range a..b in seconds; default the whole store");
  graph->add_option("--pids", pids, "Processes to include");
  graph->add_flag("--process", process_graph, "Print the process discovery graph");

  // query
  std::string template_name, bindings = "{}", sql_dir;
  auto* query = app.add_subcommand("query", "Run a query template");
  query->add_option("--db", db, "Store path")->required()->envname("PRISMLIKE_DB");
  query->add_option("--template", template_name, "Template name")->required();
  query->add_option("--bindings", bindings, "Bindings as a JSON object");
  query->add_option("--sql-dir", sql_dir, "Extra templates")->envname("PRISMLIKE_SQL_DIR");

  // templates
  auto* templates = app.add_subcommand("templates", "List query templates");
  templates->add_option("--sql-dir", sql_dir, "Extra templates")->envname("PRISMLIKE_SQL_DIR");

  // serve
  std::string host = "127.0.0.1", kpi_file;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over one store");
  serve->add_option("--db", db, "Store path")->required()->envname("PRISMLIKE_DB");
  serve->add_option("--host", host, "Bind address")->envname("PRISMLIKE_HOST");
  serve->add_option("--port", port, "Port; 0 picks a free one")->envname("PRISMLIKE_PORT");
  serve->add_option("--sql-dir", sql_dir, "Extra templates")->envname("PRISMLIKE_SQL_DIR");
  serve->add_option("--kpi", kpi_file, "Preload a KPI series (.csv or .json)");

  // kpi suggest
  auto* kpi = app.add_subcommand("kpi", "KPI helpers");
  kpi->require_subcommand(1);
  auto* suggest = kpi->add_subcommand("suggest", "Suggest baseline and comparison ranges");
  suggest->add_option("--file", kpi_file, "KPI series (.csv or .json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*record) {
    auto config = BuildConfig(rec, SourceKind::kLive);
    if (!config.ok()) return Fail(config.status(), kExitUsage);
    if (duration >= 0) config->duration = static_cast<DurationNs>(duration * 1e9);
    config->tee_trace_path = tee;
    if (auto s = ValidateSessionConfig(*config); !s.ok()) return Fail(s, kExitUsage);
    InstallSignalHandlers();
    auto summary = RunLiveSession(*config, g_stop);
    if (!summary.ok()) {
      int code = ExitCodeFor(summary.status());
      if (summary.status().code() == absl::StatusCode::kFailedPrecondition) {
        code = kExitEnvironment;
      }
      return Fail(summary.status(), code);
    }
    std::cout << RenderJson(SummaryJson(*summary));
    return kExitOk;
  }

  if (*replay) {
    auto config = BuildConfig(rep, SourceKind::kReplay);
    if (!config.ok()) return Fail(config.status(), kExitUsage);
    config->trace_path = trace;
    if (auto s = ValidateSessionConfig(*config); !s.ok()) return Fail(s, kExitUsage);
    auto summary = RunReplaySession(*config);
    if (!summary.ok()) return Fail(summary.status(), kExitRuntime);
    std::cout << RenderJson(SummaryJson(*summary));
    return kExitOk;
  }

  if (*analyze) {
    DiagnosisRequest req;
    auto b = ParseSecondsRange(baseline);
    if (!b.ok()) return Fail(b.status(), kExitUsage);
    auto c = ParseSecondsRange(compare);
    if (!c.ok()) return Fail(c.status(), kExitUsage);
    auto tgids = ParseTgidList(pids);
    if (!pids.empty() && !tgids.ok()) return Fail(tgids.status(), kExitUsage);
    req.baseline = *b;
    req.compare = *c;
    if (!pids.empty()) req.tgids = *tgids;
    req.alpha = alpha;
    if (auto s = ValidateDiagnosisRequest(req); !s.ok()) return Fail(s, kExitUsage);
    auto store = MetricStore::OpenReadOnly(db);
    if (!store.ok()) return Fail(store.status(), ExitCodeFor(store.status()));
    auto report = RunTracking(**store, req, full);
    if (!report.ok()) return Fail(report.status(), ExitCodeFor(report.status()));
    std::cout << RenderJson(*report);
    return kExitOk;
  }

  if (*exp) {
    auto store = MetricStore::OpenReadOnly(db);
    if (!store.ok()) return Fail(store.status(), ExitCodeFor(store.status()));
    if (auto s = (*store)->ExportNdjson(export_dir); !s.ok()) return Fail(s, kExitRuntime);
    return kExitOk;
  }

  if (*templates) {
    TemplateRegistry registry = TemplateRegistry::Builtin();
    if (!sql_dir.empty()) {
      if (auto s = registry.LoadDirectory(sql_dir); !s.ok()) return Fail(s, ExitCodeFor(s));
    }
    std::cout << RenderJson(TemplatesJson(registry));
    return kExitOk;
  }

  if (*kpi) {
    auto series = LoadKpiFile(kpi_file);
    if (!series.ok()) return Fail(series.status(), ExitCodeFor(series.status()));
    std::cout << RenderJson(ToJson(*series));
    return kExitOk;
  }

  ServiceOptions options;
  options.db_path = db;
  options.sql_dir = sql_dir;
  auto api = ApiService::Create(options);
  if (!api.ok()) return Fail(api.status(), ExitCodeFor(api.status()));

  if (*graph) {
    std::optional<std::string> r;
    if (!range.empty()) r = range;
    if (process_graph) return Emit((*api)->GetProcessGraph(r));
    std::optional<std::string> t;
    if (!pids.empty()) t = pids;
    return Emit((*api)->GetThreadGraph(r, t));
  }

  if (*query) {
    auto j = nlohmann::json::parse(bindings, nullptr, false);
    if (j.is_discarded()) return Fail(absl::InvalidArgumentError("bindings are not JSON"), 1);
    nlohmann::json body{{"template", template_name}, {"bindings", j}};
    return Emit((*api)->PostQuery(body.dump()));
  }

  // serve
  if (!kpi_file.empty()) {
    auto text = ReadWholeFile(kpi_file);
    if (!text.ok()) return Fail(text.status(), kExitUsage);
    ApiResponse r = (*api)->PostKpi(*text, kpi_file.ends_with(".json") ? "application/json"
                                                                         : "text/csv");
    if (r.status >= 400) return Emit(r);
  }
  HttpServer server(**api);
  auto bound = server.Bind(host, port);
  if (!bound.ok()) return Fail(bound.status(), kExitEnvironment);
  std::cerr << "prismlike: serving " << db << " on http://" << host << ":" << *bound << "\n";
  InstallSignalHandlers();
  std::thread watcher([&server] {
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.Stop();
  });
  server.Listen();
  g_stop.store(true);
  watcher.join();
  return kExitOk;
}
