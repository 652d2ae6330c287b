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

// Trace files are newline-delimited JSON, one KernelEvent per line:
//
//   {"ts":1000,"tid":11,"tgid":10,"comm":"worker","kind":"FutexEnter",
//    "uaddr":"0x7f00","op":"wait","val":0}
//
// Unknown fields are ignored; an unknown kind is an error. Addresses may be
// numbers or "0x" hex strings; BRI lists (PollEnter.bris, EpollCtl.target)
// use the store's bri_key text encoding.

#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/core/model.h"

namespace prismlike {

// Parses a single trace line. Errors do not carry a line number.
absl::StatusOr<KernelEvent> DecodeTraceLine(std::string_view line);

// One JSON object with a fixed field order, no trailing newline.
std::string EncodeTraceLine(const KernelEvent& event);

// Reads every event. Parse errors name the 1-based line. Blank lines are
// skipped. The result is stable-sorted by ts.
absl::StatusOr<std::vector<KernelEvent>> ReadTrace(std::istream& in);
absl::StatusOr<std::vector<KernelEvent>> ReadTraceFile(const std::string& path);

class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(out) {}
  void Write(const KernelEvent& event);
  int64_t written() const { return written_; }

 private:
  std::ostream& out_;
  int64_t written_ = 0;
};

absl::Status WriteTraceFile(const std::string& path, const std::vector<KernelEvent>& events);

}  // namespace prismlike
