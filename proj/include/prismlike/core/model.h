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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <absl/status/statusor.h>

namespace prismlike {

using TimestampNs = int64_t;
using DurationNs = int64_t;

inline constexpr DurationNs kNanosPerSecond = 1'000'000'000;
inline constexpr DurationNs kDefaultWindowNs = kNanosPerSecond;

// Kernel threads are identified by tid; tgid is the owning process. comm is
// the label captured the first time the thread was observed.
struct ThreadRef {
  int32_t tid = 0;
  int32_t tgid = 0;
  std::string comm;

  friend bool operator==(const ThreadRef&, const ThreadRef&) = default;
  friend auto operator<=>(const ThreadRef&, const ThreadRef&) = default;
};

inline constexpr size_t kMaxCommLen = 16;

//-----------------------------------------------------------------------------
// Backing resource identifiers
//-----------------------------------------------------------------------------

// Pipes, FIFOs, regular files. Both ends of one pipe share (s_dev, i_ino).
struct VfsInode {
  uint64_t s_dev = 0;
  uint64_t i_ino = 0;
  friend auto operator<=>(const VfsInode&, const VfsInode&) = default;
};

enum class SocketFamily : uint8_t { kInet4, kInet6, kUnix };

// Endpoints are kept in canonical text form with the lexicographically
// smaller endpoint first, so both peers of a connection produce one value.
struct SocketTuple {
  SocketFamily family = SocketFamily::kInet4;
  std::string first;
  std::string second;
  friend auto operator<=>(const SocketTuple&, const SocketTuple&) = default;
};

// Private futexes are scoped by tgid; shared ones only by address.
struct FutexAddr {
  int32_t tgid = 0;
  uint64_t uaddr = 0;
  bool shared = false;
  friend auto operator<=>(const FutexAddr&, const FutexAddr&) = default;
};

// Identity is the kernel eventpoll object address. The anonymous inode
// filesystem hands out one inode for every epoll instance.
struct EpollObj {
  uint64_t kaddr = 0;
  friend auto operator<=>(const EpollObj&, const EpollObj&) = default;
};

struct BlockDev {
  uint32_t major = 0;
  uint32_t minor = 0;
  friend auto operator<=>(const BlockDev&, const BlockDev&) = default;
};

enum class BriKind : uint8_t { kVfs, kSocket, kFutex, kEpoll, kBlock };

class Bri {
 public:
  using Payload = std::variant<VfsInode, SocketTuple, FutexAddr, EpollObj, BlockDev>;

  Bri() = default;
  Bri(VfsInode v) : payload_(v) {}                 // NOLINT(runtime/explicit)
  Bri(SocketTuple v) : payload_(std::move(v)) {}   // NOLINT(runtime/explicit)
  Bri(FutexAddr v) : payload_(v) {}                // NOLINT(runtime/explicit)
  Bri(EpollObj v) : payload_(v) {}                 // NOLINT(runtime/explicit)
  Bri(BlockDev v) : payload_(v) {}                 // NOLINT(runtime/explicit)

  BriKind kind() const { return static_cast<BriKind>(payload_.index()); }
  const Payload& payload() const { return payload_; }

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(&payload_);
  }

  // Stable text encoding used as the store's bri_key column.
  std::string Key() const;

  friend bool operator==(const Bri&, const Bri&) = default;
  friend auto operator<=>(const Bri&, const Bri&) = default;

 private:
  Payload payload_;
};

absl::StatusOr<Bri> ParseBriKey(std::string_view key);

struct BriHash {
  size_t operator()(const Bri& bri) const;
};

std::string_view BriKindName(BriKind kind);
std::string_view SocketFamilyName(SocketFamily family);
absl::StatusOr<SocketFamily> ParseSocketFamily(std::string_view name);

Bri BriOfFile(uint64_t s_dev, uint64_t i_ino);

// Normalizes both endpoints for the family and orders them canonically.
// inet4: "a.b.c.d:port"; inet6: "[addr]:port"; unix: "dev:ino" or a path.
absl::StatusOr<Bri> CanonicalizeSocket(SocketFamily family, std::string_view local,
                                       std::string_view remote);
// Same, keyed by the AF_* constant. Anything other than AF_INET, AF_INET6 and
// AF_UNIX is reported as an unsupported family.
absl::StatusOr<Bri> CanonicalizeSocket(int address_family, std::string_view local,
                                       std::string_view remote);
absl::StatusOr<std::string> NormalizeEndpoint(SocketFamily family, std::string_view endpoint);

// True for inet4/inet6 socket tuples.
bool IsInetSocket(const Bri& bri);
// Futex, pipe (vfs inode) and socket resources mediate thread interactions.
bool IsIpcResource(const Bri& bri);

//-----------------------------------------------------------------------------
// Kernel events
//-----------------------------------------------------------------------------

enum class SchedState : uint8_t { kRunning, kRunnable, kSleep, kBlock };
enum class FutexOp : uint8_t { kWait, kWake };
enum class VfsDir : uint8_t { kRead, kWrite };
enum class FileKind : uint8_t { kFifo, kRegular, kOther };
enum class SockDir : uint8_t { kRecv, kSend };
enum class PollApi : uint8_t { kSelect, kPoll };
enum class EpollAction : uint8_t { kInsert, kRemove };

struct SchedSwitchOut {
  SchedState next_state = SchedState::kRunnable;
  bool in_iowait = false;
  // The task is dead after this switch (TASK_DEAD in prev_state).
  bool exiting = false;
};
struct SchedSwitchIn {};
struct SchedWakeup {};
struct FutexEnter {
  uint64_t uaddr = 0;
  FutexOp op = FutexOp::kWait;
  int64_t val = 0;
  bool shared = false;
};
struct FutexExit {
  int64_t result = 0;
};
struct VfsAccess {
  VfsInode bri;
  VfsDir dir = VfsDir::kRead;
  FileKind file_kind = FileKind::kFifo;
  bool blocking = true;
  bool enter = true;
};
struct SockAccess {
  SocketTuple bri;
  SockDir dir = SockDir::kRecv;
  bool enter = true;
  // Endpoint of the peer as seen by this thread, used for external discovery.
  std::string remote;
};
struct PollEnter {
  PollApi api = PollApi::kPoll;
  std::vector<Bri> bris;
};
struct PollExit {
  PollApi api = PollApi::kPoll;
  // Registered BRIs collected on return; empty means "as registered at entry".
  std::vector<Bri> bris;
};
struct EpollCtl {
  EpollObj epoll;
  Bri target;
  EpollAction action = EpollAction::kInsert;
};
struct EpollWaitEnter {
  EpollObj epoll;
};
struct EpollWaitExit {
  EpollObj epoll;
};
struct BlockRq {
  BlockDev dev;
  int64_t sectors = 0;
};

using EventKind = std::variant<SchedSwitchOut, SchedSwitchIn, SchedWakeup, FutexEnter, FutexExit,
                               VfsAccess, SockAccess, PollEnter, PollExit, EpollCtl,
                               EpollWaitEnter, EpollWaitExit, BlockRq>;

struct KernelEvent {
  TimestampNs ts = 0;
  ThreadRef thread;
  EventKind kind;
};

std::string_view EventKindName(const EventKind& kind);

std::string_view SchedStateName(SchedState s);
absl::StatusOr<SchedState> ParseSchedState(std::string_view s);

//-----------------------------------------------------------------------------
// Metrics
//-----------------------------------------------------------------------------

// Declaration order is significant: it is the canonical metric order used for
// reports and the store.
enum class MetricKind : uint8_t {
  kRuntime,
  kRqTime,
  kBlockTime,
  kIowaitTime,
  kSleepTime,
  kPipeWaitTime,
  kPipeWaitCount,
  kSocketWaitTime,
  kSocketWaitCount,
  kSectorCount,
  kEpollWaitTime,
  kEpollWaitCount,
  kEpollFileWait,
  kFutexWaitTime,
  kFutexWaitCount,
  kFutexWakeCount,
};

inline constexpr int kMetricKindCount = 16;

enum class Granularity : uint8_t { kThread, kThreadResource, kEpollResource };

struct MetricInfo {
  MetricKind kind;
  std::string_view name;
  Granularity granularity;
  bool is_time;
};

const MetricInfo& InfoOf(MetricKind kind);
std::string_view MetricName(MetricKind kind);
absl::StatusOr<MetricKind> ParseMetricKind(std::string_view name);
const std::vector<MetricKind>& AllMetricKinds();
bool IsSchedulerMetric(MetricKind kind);
// futex_*, pipe_*, socket_* metrics; the ones Selective Thread Tracking
// expands through.
bool IsIpcMetric(MetricKind kind);

// Half-open [start_ns, end_ns).
struct TimeWindow {
  TimestampNs start_ns = 0;
  TimestampNs end_ns = 0;

  DurationNs length() const { return end_ns - start_ns; }
  bool Contains(TimestampNs ts) const { return ts >= start_ns && ts < end_ns; }
  friend auto operator<=>(const TimeWindow&, const TimeWindow&) = default;
};

TimeWindow WindowContaining(TimestampNs ts, DurationNs window_ns);

// Bitmask of directions seen for pipe/socket accesses.
enum AccessMask : uint8_t {
  kAccessNone = 0,
  kAccessRead = 1,
  kAccessWrite = 2,
};

struct MetricSample {
  TimeWindow window;
  // Absent for epoll_file_wait rows and for device sectors issued by threads
  // outside the monitored set.
  std::optional<ThreadRef> thread;
  MetricKind metric = MetricKind::kRuntime;
  std::optional<Bri> resource;
  // The epoll object for epoll_file_wait rows.
  std::optional<Bri> subject;
  uint8_t access = kAccessNone;
  int64_t value = 0;

  friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

}  // namespace prismlike
