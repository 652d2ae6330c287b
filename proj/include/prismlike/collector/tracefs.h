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


// Live collection through tracefs. Scheduler, syscall and block tracepoints
// are read as text from a private trace instance on the monotonic clock and
// turned into KernelEvents; file descriptors are resolved through /proc at
// the time the line is read.

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <absl/status/statusor.h>

#include "prismlike/collector/live_source.h"
#include "prismlike/core/model.h"

namespace prismlike {

struct ResolvedFd {
  enum class Kind { kFifo, kSocket, kEpoll, kRegular, kOther };
  Kind kind = Kind::kOther;
  std::optional<Bri> bri;
  // Peer endpoint for sockets.
  std::string remote;
  bool blocking = true;
};

class FdResolver {
 public:
  virtual ~FdResolver() = default;
  virtual std::optional<ResolvedFd> Resolve(int32_t tid, int fd) = 0;
  virtual std::optional<int32_t> TgidOf(int32_t tid) = 0;
};

// Resolves through /proc/<tid>/fd, /proc/<tid>/fdinfo, the per-namespace
// inet socket tables and a sock_diag dump for unix peers.
class ProcFdResolver : public FdResolver {
 public:
  std::optional<ResolvedFd> Resolve(int32_t tid, int fd) override;
  std::optional<int32_t> TgidOf(int32_t tid) override;

 private:
  struct SockInfo {
    SocketFamily family;
    std::string local;
    std::string remote;
    uint64_t peer_ino = 0;
  };
  void RefreshSockets(int32_t tid);

  std::map<uint64_t, SockInfo> sockets_;
  std::chrono::steady_clock::time_point last_refresh_{};
};

struct TracefsLine {
  std::string comm;
  int32_t tid = 0;
  std::optional<int32_t> tgid;
  TimestampNs ts = 0;
  std::string_view event;
  // Text after the event name: ": fields", "(args)" or " -> ret".
  std::string_view body;
};

// Parses "comm-tid (tgid) [cpu] flags secs.frac: event..." lines. The tgid
// column is optional.
absl::StatusOr<TracefsLine> ParseTracefsLine(std::string_view line);

struct TracefsStats {
  int64_t lines = 0;
  int64_t unparsed = 0;
  int64_t unresolved_fds = 0;
};

// Stateful line decoder: syscall exits are matched to the enter seen on the
// same thread.
class TracefsDecoder {
 public:
  explicit TracefsDecoder(FdResolver& resolver) : resolver_(resolver) {}

  void Decode(std::string_view line, std::vector<KernelEvent>& out);
  const TracefsStats& stats() const { return stats_; }
  // Drops every event of `tgid`, typically the recorder itself.
  void IgnoreProcess(int32_t tgid) { ignored_.insert(tgid); }

 private:
  struct Pending {
    std::string syscall;
    KernelEvent event;
  };

  ThreadRef Thread(int32_t tid, std::optional<int32_t> tgid, std::string_view comm);
  void DecodeLine(const TracefsLine& l, std::vector<KernelEvent>& out);
  void DecodeSwitch(const TracefsLine& l, std::vector<KernelEvent>& out);
  void DecodeWakeup(const TracefsLine& l, std::vector<KernelEvent>& out);
  void DecodeBlock(const TracefsLine& l, const ThreadRef& t, std::vector<KernelEvent>& out);
  void DecodeEnter(const TracefsLine& l, const ThreadRef& t, std::vector<KernelEvent>& out);
  void DecodeExit(const TracefsLine& l, const ThreadRef& t, std::vector<KernelEvent>& out);

  FdResolver& resolver_;
  TracefsStats stats_;
  std::map<int32_t, int32_t> tgid_of_;
  std::map<int32_t, Pending> pending_;
  // Threads that issued block requests since they last switched in.
  std::map<int32_t, bool> issued_io_;
  std::set<int32_t> ignored_;
};

// Epoll objects are keyed by (tgid, epfd): tracefs does not expose the kernel
// eventpoll address.
inline uint64_t SyntheticEpollAddr(int32_t tgid, int epfd) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(tgid)) << 32) |
         static_cast<uint32_t>(epfd);
}

struct TracefsOptions {
  std::string root = "/sys/kernel/tracing";
  std::string instance;
  int buffer_kb = 8192;
};

class TracefsSource : public EventSource {
 public:
  // PermissionDenied without write access to tracefs; FailedPrecondition when
  // it is not mounted.
  static absl::StatusOr<std::unique_ptr<TracefsSource>> Create(TracefsOptions options,
                                                               FdResolver& resolver);
  ~TracefsSource() override;

  absl::Status Start() override;
  absl::StatusOr<bool> Poll(std::vector<KernelEvent>& out,
                            std::chrono::milliseconds timeout) override;
  void Stop() override;

  // Tracepoints that could not be enabled.
  const std::vector<std::string>& warnings() const { return warnings_; }
  const TracefsStats& stats() const { return decoder_.stats(); }

 private:
  TracefsSource(TracefsOptions options, std::string dir, FdResolver& resolver);
  absl::Status WriteControl(const std::string& file, std::string_view value);
  void Teardown();

  TracefsOptions options_;
  std::string dir_;
  TracefsDecoder decoder_;
  std::vector<std::string> warnings_;
  std::vector<std::string> enabled_;
  std::string partial_;
  int pipe_fd_ = -1;
  bool stopped_ = false;
};

}  // namespace prismlike
