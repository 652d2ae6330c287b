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

#include <memory>
#include <string>

#include <absl/status/statusor.h>

#include "prismlike/service/api.h"

namespace httplib {
class Server;
}

namespace prismlike {

// Routes:
//   GET  /processes               GET /templates
//   GET  /process-graph?range=a..b
//   GET  /thread-graph?range=a..b&tgids=1,2
//   POST /query {template, bindings}
//   POST /track {baseline, compare, tgids, alpha, full}
//   POST /kpi   (text/csv or application/json)   GET /kpi
class HttpServer {
 public:
  explicit HttpServer(ApiService& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  absl::StatusOr<int> Bind(const std::string& host, int port);
  // Serves until Stop(); call after Bind.
  void Listen();
  void Stop();

 private:
  ApiService& api_;
  std::unique_ptr<httplib::Server> server_;
};

// Serialization used for every JSON response and for CLI output.
std::string RenderJson(const nlohmann::ordered_json& j);

}  // namespace prismlike
