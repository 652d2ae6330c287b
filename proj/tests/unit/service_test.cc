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


#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "prismlike/graph/dynamics_graph.h"
#include "prismlike/service/api.h"
#include "prismlike/service/http_server.h"
#include "prismlike/store/metric_store.h"
#include "tests/support/fixtures.h"
#include "tests/support/temp_dir.h"

namespace prismlike {
namespace {

using testing::TempDir;

struct CommandResult {
  int exit_code = -1;
  std::string out;
};

CommandResult RunCli(const std::string& args) {
  std::string cmd = std::string(PRISMLIKE_CLI) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  CommandResult r;
  if (p == nullptr) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    ASSERT_TRUE(testing::ReplayFixture("lock", LockDb()).ok());
    ServiceOptions options;
    options.db_path = LockDb();
    auto api = ApiService::Create(options);
    ASSERT_TRUE(api.ok()) << api.status();
    api_ = api->release();
    server_ = new HttpServer(*api_);
    auto port = server_->Bind("127.0.0.1", 0);
    ASSERT_TRUE(port.ok()) << port.status();
    port_ = *port;
    thread_ = new std::thread([] { server_->Listen(); });
  }

  static void TearDownTestSuite() {
    server_->Stop();
    thread_->join();
    delete thread_;
    delete server_;
    delete api_;
    delete dir_;
  }

  static std::string LockDb() { return dir_->File("lock.db"); }
  static httplib::Client Client() {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

  static inline TempDir* dir_ = nullptr;
  static inline ApiService* api_ = nullptr;
  static inline HttpServer* server_ = nullptr;
  static inline std::thread* thread_ = nullptr;
  static inline int port_ = 0;
};

nlohmann::json Json(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

TEST_F(ServiceTest, TemplatesListIncludesBlkioDistribution) {
  auto r = Client().Get("/templates");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "application/json");
  bool found = false;
  auto j = Json(r);
  for (const auto& t : j["templates"]) {
    if (t["name"] == "blkio_distribution") {
      found = true;
      EXPECT_EQ(t["columns"], nlohmann::json({"ts", "value", "label"}));
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(r->body, RunCli("templates").out);
}

TEST_F(ServiceTest, QueryErrorsMapToStatusCodes) {
  auto c = Client();
  auto unknown = c.Post("/query", R"({"template":"no_such_template"})", "application/json");
  ASSERT_TRUE(unknown);
  EXPECT_EQ(unknown->status, 404);
  EXPECT_TRUE(Json(unknown).contains("error"));

  auto bad = c.Post("/query",
                    R"({"template":"blkio_distribution","bindings":{"pid_filter":"1; DROP TABLE x"}})",
                    "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto unknown_name = c.Post(
      "/query", R"({"template":"blkio_distribution","bindings":{"nope":"TRUE"}})",
      "application/json");
  ASSERT_TRUE(unknown_name);
  EXPECT_EQ(unknown_name->status, 400);

  auto not_json = c.Post("/query", "{", "application/json");
  ASSERT_TRUE(not_json);
  EXPECT_EQ(not_json->status, 400);
}

TEST_F(ServiceTest, QueryReturnsRows) {
  auto r = Client().Post("/query",
                         R"({"template":"blkio_distribution","bindings":{"pid_filter":[3000],)"
                         R"("baseline_filter":{"start":0,"end":30000000000},)"
                         R"("compare_filter":{"start":30000000000,"end":60000000000}}})",
                         "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  auto j = Json(r);
  EXPECT_EQ(j["template"], "blkio_distribution");
  EXPECT_EQ(j["columns"], nlohmann::json({"ts", "value", "label"}));
  ASSERT_FALSE(j["rows"].empty());
  std::set<std::string> labels;
  for (const auto& row : j["rows"]) {
    labels.insert(row[2].get<std::string>());
    EXPECT_GT(row[1].get<double>(), 0.0);
    EXPECT_LE(row[1].get<double>(), 1.0);
  }
  EXPECT_EQ(labels, (std::set<std::string>{"baseline", "compare"}));
}

TEST_F(ServiceTest, TrackMatchesCliAnalyze) {
  auto r = Client().Post("/track", R"({"baseline":"0..30","compare":"30..60"})",
                         "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  CommandResult cli =
      RunCli("analyze --db " + LockDb() + " --baseline 0..30 --compare 30..60");
  EXPECT_EQ(cli.exit_code, 0);
  EXPECT_EQ(r->body, cli.out);

  auto j = Json(r);
  EXPECT_FALSE(j["flagged_chain"].empty());
  EXPECT_FALSE(j["exhausted"].get<bool>());

  // Structured ranges and explicit tgids give the same report body.
  auto r2 = Client().Post("/track",
                          R"({"baseline":{"start":0,"end":30000000000},)"
                          R"("compare":{"start":30000000000,"end":60000000000},"tgids":[3000]})",
                          "application/json");
  ASSERT_TRUE(r2);
  CommandResult cli2 = RunCli("analyze --db " + LockDb() +
                              " --baseline 0..30 --compare 30..60 --pids 3000");
  EXPECT_EQ(r2->body, cli2.out);

  auto full = Client().Post("/track", R"({"baseline":"0..30","compare":"30..60","full":true})",
                            "application/json");
  ASSERT_TRUE(full);
  CommandResult cli3 =
      RunCli("analyze --db " + LockDb() + " --baseline 0..30 --compare 30..60 --full");
  EXPECT_EQ(full->body, cli3.out);
  EXPECT_EQ(Json(full)["mode"], "full_search");
}

TEST_F(ServiceTest, TrackRejectsBadRequests) {
  auto c = Client();
  for (const char* body :
       {R"({"baseline":"30..0","compare":"30..60"})", R"({"compare":"30..60"})",
        R"({"baseline":"0..30","compare":"30..60","alpha":2})",
        R"({"baseline":"0..30","compare":"30..60","tgids":[-1]})"}) {
    auto r = c.Post("/track", body, "application/json");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400) << body;
  }
}

TEST_F(ServiceTest, GraphsMatchTheLibrarySerialization) {
  auto store = MetricStore::OpenReadOnly(LockDb());
  ASSERT_TRUE(store.ok());
  auto pg = BuildProcessGraph(**store, std::nullopt);
  ASSERT_TRUE(pg.ok());
  auto r = Client().Get("/process-graph");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->body, RenderJson(ToJson(*pg)));

  auto tg = BuildThreadGraph(**store, TimeRange{30 * kNanosPerSecond, 60 * kNanosPerSecond},
                             {3000});
  ASSERT_TRUE(tg.ok());
  auto r2 = Client().Get("/thread-graph?range=30..60&tgids=3000");
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->status, 200);
  EXPECT_EQ(r2->body, RenderJson(ToJson(*tg)));
  EXPECT_EQ(r2->body, RunCli("graph --db " + LockDb() + " --range 30..60 --pids 3000").out);

  auto bad = Client().Get("/thread-graph?range=60..30");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST_F(ServiceTest, ProcessesListsThreads) {
  auto r = Client().Get("/processes");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  auto j = Json(r);
  ASSERT_EQ(j["processes"].size(), 1u);
  EXPECT_EQ(j["processes"][0]["tgid"], 3000);
  EXPECT_EQ(j["processes"][0]["threads"].size(), 6u);
}

TEST_F(ServiceTest, KpiUploadLimitsAndRoundTrip) {
  auto c = Client();
  std::string huge = "ts,value\n";
  while (huge.size() <= kMaxKpiBytes) huge += "1.000,2.000\n";
  auto big = c.Post("/kpi", huge, "text/csv");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);

  auto bad = c.Post("/kpi", "ts,value\n2,1\n1,1\n", "text/csv");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  std::string csv = "ts,value\n";
  for (int s = 0; s < 60; ++s) csv += std::to_string(s) + "," + (s < 30 ? "10" : "50") + "\n";
  auto ok = c.Post("/kpi", csv, "text/csv");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200) << ok->body;
  auto got = c.Get("/kpi");
  ASSERT_TRUE(got);
  ASSERT_EQ(got->status, 200);
  auto j = Json(got);
  ASSERT_EQ(j["points"].size(), 60u);
  EXPECT_EQ(j["points"][1]["ts"], kNanosPerSecond);
  EXPECT_EQ(j["suggestion"]["compare"]["start"], 30 * kNanosPerSecond);
}

TEST_F(ServiceTest, ConcurrentRequestsAgree) {
  std::string expected = Client()
                             .Post("/track", R"({"baseline":"0..30","compare":"30..60"})",
                                   "application/json")
                             ->body;
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 12; ++i) {
    threads.emplace_back([&, i] {
      auto c = Client();
      for (int k = 0; k < 3; ++k) {
        if (i % 3 == 0) {
          auto r = c.Post("/track", R"({"baseline":"0..30","compare":"30..60"})",
                          "application/json");
          if (!r || r->status != 200 || r->body != expected) ++failures;
        } else if (i % 3 == 1) {
          auto r = c.Get("/thread-graph?range=0..60");
          if (!r || r->status != 200) ++failures;
        } else {
          auto r = c.Get("/processes");
          if (!r || r->status != 200) ++failures;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(failures.load(), 0);
}

TEST_F(ServiceTest, ApiNeverMutatesTheStore) {
  std::string before = testing::ReadFileBytes(LockDb());
  auto c = Client();
  c.Get("/processes");
  c.Get("/process-graph?range=0..60");
  c.Get("/thread-graph");
  c.Post("/query", R"({"template":"pid_rq_share"})", "application/json");
  c.Post("/track", R"({"baseline":"0..30","compare":"30..60"})", "application/json");
  c.Post("/kpi", "ts,value\n0,1\n", "text/csv");
  EXPECT_EQ(testing::ReadFileBytes(LockDb()), before);
  EXPECT_FALSE(std::filesystem::exists(LockDb() + "-wal"));
  EXPECT_FALSE(std::filesystem::exists(LockDb() + "-journal"));
}

TEST_F(ServiceTest, CorsPreflight) {
  auto r = Client().Options("/track");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 204);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
}

//-----------------------------------------------------------------------------
// CLI
//-----------------------------------------------------------------------------

TEST(CliTest, AnalyzeExitCodes) {
  TempDir dir;
  ASSERT_TRUE(testing::ReplayFixture("lock", dir.File("lock.db")).ok());
  EXPECT_EQ(RunCli("analyze --db " + dir.File("lock.db") + " --baseline 30..0 --compare 30..60")
                .exit_code,
            1);
  CommandResult same =
      RunCli("analyze --db " + dir.File("lock.db") + " --baseline 0..30 --compare 0..30");
  EXPECT_EQ(same.exit_code, 0);
  EXPECT_TRUE(nlohmann::json::parse(same.out)["flagged_chain"].empty());
  EXPECT_EQ(RunCli("analyze --db " + dir.File("missing.db") + " --baseline 0..1 --compare 1..2")
                .exit_code,
            1);
  EXPECT_EQ(RunCli("analyze --baseline 0..1").exit_code, 1);
  EXPECT_EQ(RunCli("").exit_code, 1);
}

TEST(CliTest, EnvironmentSuppliesTheDatabase) {
  TempDir dir;
  ASSERT_TRUE(testing::ReplayFixture("chain", dir.File("chain.db")).ok());
  CommandResult env = RunCli("graph --process");
  EXPECT_EQ(env.exit_code, 1);
  std::string cmd = "PRISMLIKE_DB=" + dir.File("chain.db") + " " + std::string(PRISMLIKE_CLI) +
                    " graph --process > " + dir.File("out.json");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(testing::ReadFileBytes(dir.File("out.json")),
            RunCli("graph --process --db " + dir.File("chain.db")).out);
}

TEST(CliTest, ReplayReportsTheBadLine) {
  TempDir dir;
  std::string trace = testing::ReadFileBytes(testing::FixturePath("chain.trace.ndjson"));
  std::vector<std::string> lines;
  size_t start = 0;
  for (int i = 0; i < 6; ++i) {
    size_t nl = trace.find('\n', start);
    lines.push_back(trace.substr(start, nl - start + 1));
    start = nl + 1;
  }
  std::ofstream(dir.File("bad.ndjson")) << lines[0] << lines[1] << lines[2] << lines[3]
                                        << lines[4] << lines[5] << "{\"ts\":\n";
  std::string cmd = std::string(PRISMLIKE_CLI) + " replay --trace " + dir.File("bad.ndjson") +
                    " --out " + dir.File("bad.db") + " 2>" + dir.File("err.txt");
  int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 2);
  EXPECT_NE(testing::ReadFileBytes(dir.File("err.txt")).find("line 7"), std::string::npos);

  std::ofstream(dir.File("empty.ndjson")).close();
  CommandResult empty = RunCli("replay --trace " + dir.File("empty.ndjson") + " --out " +
                               dir.File("empty.db"));
  EXPECT_EQ(empty.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(empty.out)["windows"], 0);
}

TEST(CliTest, ReplayAndExportAreByteIdentical) {
  TempDir dir;
  for (const char* name : {"a", "b"}) {
    std::string db = dir.File(std::string(name) + ".db");
    ASSERT_EQ(RunCli("replay --trace " + testing::FixturePath("lock.trace.ndjson") +
                     " --pids 3000 --out " + db)
                  .exit_code,
              0);
    ASSERT_EQ(RunCli("export --db " + db + " --out " + dir.File(name)).exit_code, 0);
  }
  auto a = testing::ReadDirBytes(dir.File("a"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, testing::ReadDirBytes(dir.File("b")));
  EXPECT_EQ(a, testing::ReadDirBytes(testing::FixturePath("golden/lock")));
}

TEST(CliTest, RecordZeroDurationAndBadPids) {
  TempDir dir;
  CommandResult zero = RunCli("record --pids " + std::to_string(getpid()) + " --out " +
                              dir.File("z.db") + " --duration 0");
  EXPECT_EQ(zero.exit_code, 0);
  EXPECT_TRUE(MetricStore::OpenReadOnly(dir.File("z.db")).ok());
  EXPECT_EQ(RunCli("record --pids 999999999 --out " + dir.File("n.db") + " --duration 1")
                .exit_code,
            1);
  EXPECT_EQ(RunCli("record --pids abc --out " + dir.File("n.db")).exit_code, 1);
}

TEST(CliTest, RecordWithoutPrivilegesIsAnEnvironmentError) {
  if (geteuid() != 0 || access("/usr/bin/setpriv", X_OK) != 0) {
    GTEST_SKIP() << "needs root and setpriv to drop privileges";
  }
  TempDir dir;
  chmod(dir.path().c_str(), 0777);
  std::string cmd = "/usr/bin/setpriv --reuid=65534 --regid=65534 --clear-groups " +
                    std::string(PRISMLIKE_CLI) + " record --pids 1 --out " + dir.File("p.db") +
                    " --duration 1 2>/dev/null";
  int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 3);
}

TEST(CliTest, QueryAndKpiSuggest) {
  TempDir dir;
  ASSERT_TRUE(testing::ReplayFixture("lock", dir.File("lock.db")).ok());
  EXPECT_EQ(RunCli("query --db " + dir.File("lock.db") + " --template nope").exit_code, 1);
  CommandResult q = RunCli("query --db " + dir.File("lock.db") +
                           " --template pid_rq_share --bindings "
                           "'{\"pid_filter\":[3000],\"baseline_filter\":\"TRUE\",\"compare_filter\":\"TRUE\"}'");
  EXPECT_EQ(q.exit_code, 0);
  EXPECT_FALSE(nlohmann::json::parse(q.out)["rows"].empty());

  CommandResult k = RunCli("kpi suggest --file " + testing::FixturePath("lock.kpi.csv"));
  ASSERT_EQ(k.exit_code, 0);
  auto j = nlohmann::json::parse(k.out);
  EXPECT_EQ(j["suggestion"]["compare"]["start"], 30 * kNanosPerSecond);
}

}  // namespace
}  // namespace prismlike
