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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/collector/session.h"
#include "prismlike/core/model.h"

namespace prismlike {

// A live event feed. Poll hands over whatever is ready, in timestamp order
// as far as the source can tell, and returns false once nothing more will
// arrive.
class EventSource {
 public:
  virtual ~EventSource() = default;
  virtual absl::Status Start() = 0;
  virtual absl::StatusOr<bool> Poll(std::vector<KernelEvent>& out,
                                    std::chrono::milliseconds timeout) = 0;
  // Stops producing. Events already buffered are still delivered by Poll.
  virtual void Stop() = 0;
};

// Replays a captured probe ring buffer, `batch` records per poll.
class ProbeRecordSource : public EventSource {
 public:
  ProbeRecordSource(std::vector<uint8_t> ring, size_t batch = 256);

  absl::Status Start() override { return absl::OkStatus(); }
  absl::StatusOr<bool> Poll(std::vector<KernelEvent>& out,
                            std::chrono::milliseconds timeout) override;
  void Stop() override { stopped_ = true; }

 private:
  std::vector<uint8_t> ring_;
  size_t batch_;
  size_t offset_ = 0;
  bool stopped_ = false;
};

// Drives a Session from `source` until it runs dry, the configured duration
// elapses or `stop` is raised. Events older than the newest one ingested are
// dropped and counted; only ingested events reach the tee file, so replaying
// the tee reproduces the live store's samples.
absl::StatusOr<SessionSummary> RunLiveSessionWith(const SessionConfig& config,
                                                  EventSource& source,
                                                  const std::atomic<bool>& stop);

}  // namespace prismlike
