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

// Brute-force reference evaluator for the 16 metrics. Each metric is computed
// straight from its definition by rescanning the whole trace: wait pairs are
// found by scanning backwards from every exit, scheduler time by intersecting
// per-thread state intervals with each window, and epoll_file_wait by
// intersecting each wait with interest-list membership intervals rebuilt
// from scratch. Quadratic on purpose; nothing is shared with the engine.

#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "prismlike/core/model.h"

namespace prismlike::testing {

// (window start, tid or 0, metric, resource key, subject key)
using OracleKey = std::tuple<TimestampNs, int32_t, MetricKind, std::string, std::string>;

struct OracleResult {
  std::map<OracleKey, int64_t> values;
  std::map<OracleKey, uint8_t> access;
  std::set<TimestampNs> windows;
};

// `events` must be sorted by ts. Stream end is the last event's ts.
OracleResult EvaluateOracle(const std::vector<KernelEvent>& events, DurationNs window_ns,
                            const std::function<bool(int32_t)>& monitored = nullptr);

// Flattens engine output to the same keyed form.
OracleResult FlattenSamples(const std::vector<MetricSample>& samples);

std::string DescribeKey(const OracleKey& key);

// Human-readable diff, empty when identical.
std::string DiffResults(const OracleResult& expected, const OracleResult& actual,
                        size_t max_lines = 20);

}  // namespace prismlike::testing
