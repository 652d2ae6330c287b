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

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <absl/status/statusor.h>
#include <json.hpp>

#include "prismlike/store/metric_store.h"
#include "prismlike/store/table.h"

namespace prismlike {

// A parameterized read-only query. Template files start with a header of
// "-- key: value" comment lines (name, description, plot, columns) followed by
// SQL with {{ placeholder }} holes.
struct QueryTemplate {
  std::string name;
  std::string description;
  // line, histogram or bar.
  std::string plot;
  std::vector<std::string> columns;
  std::string text;
  // Distinct placeholder names in order of first use.
  std::vector<std::string> placeholders;
};

// Placeholder names a template may use.
inline constexpr std::string_view kPidFilter = "pid_filter";
inline constexpr std::string_view kBaselineFilter = "baseline_filter";
inline constexpr std::string_view kCompareFilter = "compare_filter";
inline constexpr std::string_view kBriFilter = "bri_filter";

using Bindings = std::map<std::string, std::string>;

absl::StatusOr<QueryTemplate> ParseTemplate(std::string_view text);

class TemplateRegistry {
 public:
  // The templates compiled into the binary from sql/.
  static const TemplateRegistry& Builtin();

  absl::Status Add(QueryTemplate tmpl);
  // Adds every *.sql file in `dir`, replacing same-named entries.
  absl::Status LoadDirectory(const std::string& dir);

  absl::StatusOr<const QueryTemplate*> Find(std::string_view name) const;
  std::vector<const QueryTemplate*> List() const;

 private:
  std::map<std::string, QueryTemplate, std::less<>> templates_;
};

// Parses a predicate fragment for the given placeholder and re-renders it in
// canonical form. pid_filter admits pid comparisons and IN lists, the range
// filters admit ts comparisons and BETWEEN, bri_filter admits bri_key and
// res_kind string comparisons. Anything else is InvalidArgument.
absl::StatusOr<std::string> ValidateBinding(std::string_view placeholder, std::string_view text);

// Accepts either a predicate string or a structured value: a pid or list of
// pids, {"start": ns, "end": ns} for ranges, a bri_key string for bri_filter.
absl::StatusOr<std::string> BindingFromJson(std::string_view placeholder,
                                            const nlohmann::json& value);

// Renders with validated bindings. Unbound pid_filter and bri_filter default
// to TRUE; range filters must be bound. Unknown binding names are rejected.
absl::StatusOr<std::string> RenderTemplate(const QueryTemplate& tmpl, const Bindings& bindings);

absl::StatusOr<Table> RunTemplate(const MetricStore& store, const TemplateRegistry& registry,
                                  std::string_view name, const Bindings& bindings);

}  // namespace prismlike
