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
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <absl/status/statusor.h>

#include "json.hpp"
#include "prismlike/analyzer/analyzer.h"
#include "prismlike/service/kpi.h"
#include "prismlike/store/templates.h"

namespace prismlike {

struct ApiResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

int HttpStatusFor(const absl::Status& status);
ApiResponse ErrorResponse(const absl::Status& status);

struct ServiceOptions {
  std::string db_path;
  // Extra or overriding templates.
  std::string sql_dir;
  // Tracking runs allowed at once; further requests wait.
  int max_concurrent_tracks = 2;
};

// Parses a range given as {"start": ns, "end": ns} or "a..b" seconds.
absl::StatusOr<TimeRange> RangeFromJson(const nlohmann::json& j);

// Parses a /track body into a request.
absl::StatusOr<DiagnosisRequest> TrackRequestFromJson(const nlohmann::json& j);

// The JSON shared by `prismlike analyze` and POST /track.
absl::StatusOr<nlohmann::ordered_json> RunTracking(const MetricStore& store,
                                                   const DiagnosisRequest& request, bool full);

// Read-only API over one store. Each call opens its own connection, so calls
// may run concurrently. The only mutable state is the uploaded KPI series.
class ApiService {
 public:
  static absl::StatusOr<std::unique_ptr<ApiService>> Create(const ServiceOptions& options);

  ApiResponse GetProcesses() const;
  ApiResponse GetProcessGraph(const std::optional<std::string>& range) const;
  ApiResponse GetThreadGraph(const std::optional<std::string>& range,
                             const std::optional<std::string>& tgids) const;
  ApiResponse GetTemplates() const;
  ApiResponse PostQuery(std::string_view body) const;
  ApiResponse PostTrack(std::string_view body) const;
  ApiResponse PostKpi(std::string_view body, std::string_view content_type);
  ApiResponse GetKpi() const;

  const ServiceOptions& options() const { return options_; }

 private:
  ApiService(ServiceOptions options, TemplateRegistry registry);
  absl::StatusOr<std::unique_ptr<MetricStore>> Open() const;

  ServiceOptions options_;
  TemplateRegistry registry_;
  mutable std::counting_semaphore<64> track_slots_;
  mutable std::mutex kpi_mu_;
  std::optional<KpiSeries> kpi_;
};

// Parses "1,2,3" into tgids.
absl::StatusOr<std::set<int32_t>> ParseTgidList(std::string_view text);

nlohmann::ordered_json TableJson(const Table& table);

// {"templates": [{name, description, plot, columns, placeholders}, ...]}
nlohmann::ordered_json TemplatesJson(const TemplateRegistry& registry);

}  // namespace prismlike
