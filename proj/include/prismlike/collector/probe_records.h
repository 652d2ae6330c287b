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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/collector/probe_abi.h"
#include "prismlike/core/model.h"

namespace prismlike {

// Fails unless the probes report the magic and version this build mirrors.
absl::Status CheckProbeAbi(const pl_abi_info& info);

// Unix sockets must be in "dev:ino" form; paths do not fit the layout.
absl::StatusOr<pl_bri> EncodeBri(const std::optional<Bri>& bri);
absl::StatusOr<std::optional<Bri>> DecodeBri(const pl_bri& raw);

absl::StatusOr<std::vector<uint8_t>> EncodeProbeRecord(const KernelEvent& event);

// Decodes the record at the front of `bytes` and reports its size.
absl::StatusOr<KernelEvent> DecodeProbeRecord(std::span<const uint8_t> bytes, size_t* consumed);

// Decodes back-to-back records. Errors name the byte offset.
absl::StatusOr<std::vector<KernelEvent>> DecodeProbeRecords(std::span<const uint8_t> bytes);

// One drained pl_agg entry.
struct AggEntry {
  int32_t tid = 0;
  int32_t tgid = 0;
  MetricKind metric = MetricKind::kRuntime;
  uint8_t access = kAccessNone;
  std::optional<Bri> resource;
  std::optional<Bri> subject;
  uint64_t time_ns = 0;
  uint64_t count = 0;

  friend bool operator==(const AggEntry&, const AggEntry&) = default;
};

absl::StatusOr<std::pair<pl_agg_key, pl_agg_value>> EncodeAggEntry(const AggEntry& entry);

// `keys` and `values` are parallel arrays as returned by a batched map
// lookup.
absl::StatusOr<std::vector<AggEntry>> DecodeAggSnapshot(std::span<const uint8_t> keys,
                                                        std::span<const uint8_t> values);

}  // namespace prismlike
