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


#include "prismlike/service/http_server.h"

#include <fmt/format.h>

#include "httplib.h"

namespace prismlike {

namespace {

std::optional<std::string> Param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

void Reply(httplib::Response& res, const ApiResponse& api) {
  res.status = api.status;
  res.set_header("Access-Control-Allow-Origin", "*");
  res.set_content(RenderJson(api.body), "application/json");
}

}  // namespace

std::string RenderJson(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

HttpServer::HttpServer(ApiService& api) : api_(api), server_(std::make_unique<httplib::Server>()) {
  httplib::Server& s = *server_;
  s.set_payload_max_length(kMaxKpiBytes + 1);
  s.Get("/processes", [this](const httplib::Request&, httplib::Response& res) {
    Reply(res, api_.GetProcesses());
  });
  s.Get("/process-graph", [this](const httplib::Request& req, httplib::Response& res) {
    Reply(res, api_.GetProcessGraph(Param(req, "range")));
  });
  s.Get("/thread-graph", [this](const httplib::Request& req, httplib::Response& res) {
    Reply(res, api_.GetThreadGraph(Param(req, "range"), Param(req, "tgids")));
  });
  s.Get("/templates", [this](const httplib::Request&, httplib::Response& res) {
    Reply(res, api_.GetTemplates());
  });
  s.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    Reply(res, api_.PostQuery(req.body));
  });
  s.Post("/track", [this](const httplib::Request& req, httplib::Response& res) {
    Reply(res, api_.PostTrack(req.body));
  });
  s.Post("/kpi", [this](const httplib::Request& req, httplib::Response& res) {
    Reply(res, api_.PostKpi(req.body, req.get_header_value("Content-Type")));
  });
  s.Get("/kpi", [this](const httplib::Request&, httplib::Response& res) {
    Reply(res, api_.GetKpi());
  });
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* msg = res.status == 413 ? "request body too large"
                      : res.status == 404 ? "no such endpoint"
                                          : "request failed";
    res.set_content(RenderJson({{"error", msg}}), "application/json");
  });
}

HttpServer::~HttpServer() { Stop(); }

absl::StatusOr<int> HttpServer::Bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port)
                                                                       ? port
                                                                       : -1);
  if (bound <= 0) {
    return absl::UnavailableError(fmt::format("cannot bind {}:{}", host, port));
  }
  return bound;
}

void HttpServer::Listen() { server_->listen_after_bind(); }

void HttpServer::Stop() {
  if (server_) server_->stop();
}

}  // namespace prismlike
