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


#include "prismlike/service/api.h"

#include <algorithm>

#include <fmt/format.h>

#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"
#include "prismlike/graph/dynamics_graph.h"

namespace prismlike {

namespace {

absl::StatusOr<nlohmann::json> ParseBody(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return absl::InvalidArgumentError("request body is not valid JSON");
  if (!j.is_object()) return absl::InvalidArgumentError("request body must be a JSON object");
  return j;
}

// Graph range: explicit "a..b" or the store's whole extent.
absl::StatusOr<TimeRange> RangeOrExtent(const MetricStore& store,
                                        const std::optional<std::string>& range) {
  if (range && !range->empty()) return ParseSecondsRange(*range);
  PL_ASSIGN_OR_RETURN(std::optional<TimeRange> extent, store.Extent());
  return extent.value_or(TimeRange{});
}

nlohmann::ordered_json CellJson(const Value& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else {
          return x;
        }
      },
      v);
}

}  // namespace

int HttpStatusFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kOk:
      return 200;
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kOutOfRange:
      return 400;
    case absl::StatusCode::kPermissionDenied:
      return 403;
    case absl::StatusCode::kNotFound:
      return 404;
    case absl::StatusCode::kAlreadyExists:
    case absl::StatusCode::kFailedPrecondition:
      return 409;
    case absl::StatusCode::kResourceExhausted:
      return 413;
    default:
      return 500;
  }
}

ApiResponse ErrorResponse(const absl::Status& status) {
  return ApiResponse{HttpStatusFor(status),
                     {{"error", StatusMessage(status)},
                      {"code", absl::StatusCodeToString(status.code())}}};
}

absl::StatusOr<std::set<int32_t>> ParseTgidList(std::string_view text) {
  std::set<int32_t> out;
  for (std::string_view part : Split(text, ',')) {
    part = Trim(part);
    if (part.empty()) continue;
    int32_t v = 0;
    if (!ParseInt(part, &v) || v <= 0) {
      return absl::InvalidArgumentError(fmt::format("bad pid '{}'", part));
    }
    out.insert(v);
  }
  return out;
}

absl::StatusOr<TimeRange> RangeFromJson(const nlohmann::json& j) {
  if (j.is_string()) return ParseSecondsRange(j.get<std::string>());
  if (j.is_object() && j.contains("start") && j.contains("end") &&
      j["start"].is_number_integer() && j["end"].is_number_integer()) {
    TimeRange r{j["start"].get<int64_t>(), j["end"].get<int64_t>()};
    if (r.empty()) return absl::InvalidArgumentError("range is empty or inverted");
    return r;
  }
  return absl::InvalidArgumentError("range must be {\"start\": ns, \"end\": ns} or \"a..b\"");
}

absl::StatusOr<DiagnosisRequest> TrackRequestFromJson(const nlohmann::json& j) {
  DiagnosisRequest req;
  if (!j.contains("baseline") || !j.contains("compare")) {
    return absl::InvalidArgumentError("baseline and compare ranges are required");
  }
  PL_ASSIGN_OR_RETURN(req.baseline, RangeFromJson(j["baseline"]));
  PL_ASSIGN_OR_RETURN(req.compare, RangeFromJson(j["compare"]));
  if (j.contains("tgids") && !j["tgids"].is_null()) {
    if (!j["tgids"].is_array()) return absl::InvalidArgumentError("tgids must be an array");
    for (const auto& t : j["tgids"]) {
      if (!t.is_number_integer() || t.get<int64_t>() <= 0) {
        return absl::InvalidArgumentError("tgids must be positive integers");
      }
      req.tgids.insert(t.get<int32_t>());
    }
  }
  if (j.contains("alpha") && !j["alpha"].is_null()) {
    if (!j["alpha"].is_number()) return absl::InvalidArgumentError("alpha must be a number");
    req.alpha = j["alpha"].get<double>();
  }
  PL_RETURN_IF_ERROR(ValidateDiagnosisRequest(req));
  return req;
}

absl::StatusOr<nlohmann::ordered_json> RunTracking(const MetricStore& store,
                                                   const DiagnosisRequest& request, bool full) {
  if (!full) {
    PL_ASSIGN_OR_RETURN(DiagnosisReport report, SelectiveThreadTracking(store, request));
    return ToJson(report);
  }
  PL_ASSIGN_OR_RETURN(std::vector<FlaggedMetric> flags, FullSearch(store, request));
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const FlaggedMetric& f : flags) list.push_back(ToJson(f));
  return nlohmann::ordered_json{{"mode", "full_search"}, {"flags", std::move(list)}};
}

nlohmann::ordered_json TableJson(const Table& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (const Value& v : row) r.push_back(CellJson(v));
    rows.push_back(std::move(r));
  }
  return {{"columns", table.columns}, {"rows", std::move(rows)}};
}

ApiService::ApiService(ServiceOptions options, TemplateRegistry registry)
    : options_(std::move(options)),
      registry_(std::move(registry)),
      track_slots_(std::clamp(options_.max_concurrent_tracks, 1, 64)) {}

absl::StatusOr<std::unique_ptr<ApiService>> ApiService::Create(const ServiceOptions& options) {
  TemplateRegistry registry = TemplateRegistry::Builtin();
  if (!options.sql_dir.empty()) PL_RETURN_IF_ERROR(registry.LoadDirectory(options.sql_dir));
  PL_ASSIGN_OR_RETURN(auto probe, MetricStore::OpenReadOnly(options.db_path));
  return std::unique_ptr<ApiService>(new ApiService(options, std::move(registry)));
}

absl::StatusOr<std::unique_ptr<MetricStore>> ApiService::Open() const {
  return MetricStore::OpenReadOnly(options_.db_path);
}

ApiResponse ApiService::GetProcesses() const {
  auto store = Open();
  if (!store.ok()) return ErrorResponse(store.status());
  auto processes = (*store)->LoadProcesses();
  auto threads = (*store)->LoadThreads();
  auto extent = (*store)->Extent();
  if (!processes.ok()) return ErrorResponse(processes.status());
  if (!threads.ok()) return ErrorResponse(threads.status());
  if (!extent.ok()) return ErrorResponse(extent.status());
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const ProcessInfo& p : *processes) {
    nlohmann::ordered_json ts = nlohmann::ordered_json::array();
    for (const ThreadInfo& t : *threads) {
      if (t.thread.tgid == p.tgid) {
        ts.push_back({{"tid", t.thread.tid}, {"comm", t.thread.comm}, {"first_seen", t.first_seen}});
      }
    }
    list.push_back({{"tgid", p.tgid},
                    {"comm", p.comm},
                    {"first_seen", p.first_seen},
                    {"parent_tgid", p.parent_tgid ? nlohmann::ordered_json(*p.parent_tgid)
                                                  : nlohmann::ordered_json(nullptr)},
                    {"threads", std::move(ts)}});
  }
  nlohmann::ordered_json ext = nullptr;
  if (extent->has_value()) ext = {{"start", (*extent)->start_ns}, {"end", (*extent)->end_ns}};
  return ApiResponse{200,
                     {{"source", (*store)->meta().source},
                      {"window_ns", (*store)->meta().window_ns},
                      {"extent", std::move(ext)},
                      {"processes", std::move(list)}}};
}

ApiResponse ApiService::GetProcessGraph(const std::optional<std::string>& range) const {
  auto store = Open();
  if (!store.ok()) return ErrorResponse(store.status());
  std::optional<TimeRange> r;
  if (range && !range->empty()) {
    auto parsed = ParseSecondsRange(*range);
    if (!parsed.ok()) return ErrorResponse(parsed.status());
    r = *parsed;
  }
  auto g = BuildProcessGraph(**store, r);
  if (!g.ok()) return ErrorResponse(g.status());
  return ApiResponse{200, ToJson(*g)};
}

ApiResponse ApiService::GetThreadGraph(const std::optional<std::string>& range,
                                       const std::optional<std::string>& tgids) const {
  auto store = Open();
  if (!store.ok()) return ErrorResponse(store.status());
  auto r = RangeOrExtent(**store, range);
  if (!r.ok()) return ErrorResponse(r.status());
  std::set<int32_t> filter;
  if (tgids) {
    auto parsed = ParseTgidList(*tgids);
    if (!parsed.ok()) return ErrorResponse(parsed.status());
    filter = *parsed;
  }
  auto g = BuildThreadGraph(**store, *r, filter);
  if (!g.ok()) return ErrorResponse(g.status());
  return ApiResponse{200, ToJson(*g)};
}

nlohmann::ordered_json TemplatesJson(const TemplateRegistry& registry) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const QueryTemplate* t : registry.List()) {
    list.push_back({{"name", t->name},
                    {"description", t->description},
                    {"plot", t->plot},
                    {"columns", t->columns},
                    {"placeholders", t->placeholders}});
  }
  return {{"templates", std::move(list)}};
}

ApiResponse ApiService::GetTemplates() const { return ApiResponse{200, TemplatesJson(registry_)}; }

ApiResponse ApiService::PostQuery(std::string_view body) const {
  auto j = ParseBody(body);
  if (!j.ok()) return ErrorResponse(j.status());
  if (!j->contains("template") || !(*j)["template"].is_string()) {
    return ErrorResponse(absl::InvalidArgumentError("template name is required"));
  }
  const std::string name = (*j)["template"];
  auto tmpl = registry_.Find(name);
  if (!tmpl.ok()) return ErrorResponse(tmpl.status());
  Bindings bindings;
  if (j->contains("bindings")) {
    const nlohmann::json& b = (*j)["bindings"];
    if (!b.is_object()) return ErrorResponse(absl::InvalidArgumentError("bindings must be an object"));
    for (const auto& [key, value] : b.items()) {
      auto text = BindingFromJson(key, value);
      if (!text.ok()) return ErrorResponse(text.status());
      bindings[key] = *text;
    }
  }
  auto store = Open();
  if (!store.ok()) return ErrorResponse(store.status());
  auto table = RunTemplate(**store, registry_, name, bindings);
  if (!table.ok()) return ErrorResponse(table.status());
  nlohmann::ordered_json out = {{"template", name}, {"plot", (*tmpl)->plot}};
  nlohmann::ordered_json t = TableJson(*table);
  out["columns"] = std::move(t["columns"]);
  out["rows"] = std::move(t["rows"]);
  return ApiResponse{200, std::move(out)};
}

ApiResponse ApiService::PostTrack(std::string_view body) const {
  auto j = ParseBody(body);
  if (!j.ok()) return ErrorResponse(j.status());
  auto req = TrackRequestFromJson(*j);
  if (!req.ok()) return ErrorResponse(req.status());
  const bool full = j->contains("full") && (*j)["full"].is_boolean() && (*j)["full"].get<bool>();
  auto store = Open();
  if (!store.ok()) return ErrorResponse(store.status());
  track_slots_.acquire();
  auto out = RunTracking(**store, *req, full);
  track_slots_.release();
  if (!out.ok()) return ErrorResponse(out.status());
  return ApiResponse{200, *std::move(out)};
}

ApiResponse ApiService::PostKpi(std::string_view body, std::string_view content_type) {
  if (body.size() > kMaxKpiBytes) {
    return ErrorResponse(absl::ResourceExhaustedError(
        fmt::format("kpi upload of {} bytes exceeds {} bytes", body.size(), kMaxKpiBytes)));
  }
  absl::StatusOr<KpiSeries> kpi;
  if (content_type.find("json") != std::string_view::npos) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) return ErrorResponse(absl::InvalidArgumentError("kpi body is not JSON"));
    kpi = ParseKpiJson(j);
  } else {
    kpi = ParseKpiCsv(body);
  }
  if (!kpi.ok()) return ErrorResponse(kpi.status());
  nlohmann::ordered_json out = ToJson(*kpi);
  std::lock_guard<std::mutex> lock(kpi_mu_);
  kpi_ = *std::move(kpi);
  return ApiResponse{200, std::move(out)};
}

ApiResponse ApiService::GetKpi() const {
  std::lock_guard<std::mutex> lock(kpi_mu_);
  if (!kpi_) return ErrorResponse(absl::NotFoundError("no kpi series uploaded"));
  return ApiResponse{200, ToJson(*kpi_)};
}

}  // namespace prismlike
