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

#include "prismlike/core/model.h"

#include <arpa/inet.h>
#include <sys/socket.h>

#include <array>
#include <charconv>

#include <absl/hash/hash.h>

#include "prismlike/core/strings.h"

namespace prismlike {

namespace {

template <typename... T>
size_t HashOf(const T&... values) {
  return absl::Hash<std::tuple<T...>>{}(std::tuple<T...>(values...));
}

// Endpoints are joined with ',' inside socket keys; '%' and ',' are escaped.
std::string EscapeEndpoint(std::string_view ep) {
  std::string out;
  out.reserve(ep.size());
  for (char c : ep) {
    if (c == '%') {
      out += "%25";
    } else if (c == ',') {
      out += "%2C";
    } else {
      out += c;
    }
  }
  return out;
}

absl::StatusOr<std::string> UnescapeEndpoint(std::string_view ep) {
  std::string out;
  out.reserve(ep.size());
  for (size_t i = 0; i < ep.size(); ++i) {
    if (ep[i] != '%') {
      out += ep[i];
      continue;
    }
    if (i + 2 >= ep.size()) {
      return absl::InvalidArgumentError(StrCat("truncated escape in endpoint: ", ep));
    }
    std::string_view code = ep.substr(i + 1, 2);
    if (code == "25") {
      out += '%';
    } else if (code == "2C") {
      out += ',';
    } else {
      return absl::InvalidArgumentError(StrCat("bad escape in endpoint: ", ep));
    }
    i += 2;
  }
  return out;
}

template <typename T>
bool ParseUnsigned(std::string_view s, T* out, int base = 10) {
  if (s.empty()) return false;
  if (base == 16) {
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out, base);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string Hex(uint64_t v) {
  std::array<char, 20> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, 16);
  return StrCat("0x", std::string_view(buf.data(), ptr - buf.data()));
}

absl::StatusOr<std::pair<std::string_view, uint16_t>> SplitHostPort(std::string_view ep) {
  size_t colon = ep.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    return absl::InvalidArgumentError(StrCat("endpoint missing port: ", ep));
  }
  uint32_t port = 0;
  if (!ParseUnsigned(ep.substr(colon + 1), &port) || port > 65535) {
    return absl::InvalidArgumentError(StrCat("bad port in endpoint: ", ep));
  }
  return std::make_pair(ep.substr(0, colon), static_cast<uint16_t>(port));
}

}  // namespace

//-----------------------------------------------------------------------------
// Names
//-----------------------------------------------------------------------------

std::string_view BriKindName(BriKind kind) {
  switch (kind) {
    case BriKind::kVfs:
      return "vfs";
    case BriKind::kSocket:
      return "sock";
    case BriKind::kFutex:
      return "futex";
    case BriKind::kEpoll:
      return "epoll";
    case BriKind::kBlock:
      return "blk";
  }
  return "?";
}

std::string_view SocketFamilyName(SocketFamily family) {
  switch (family) {
    case SocketFamily::kInet4:
      return "inet4";
    case SocketFamily::kInet6:
      return "inet6";
    case SocketFamily::kUnix:
      return "unix";
  }
  return "?";
}

absl::StatusOr<SocketFamily> ParseSocketFamily(std::string_view name) {
  if (name == "inet4") return SocketFamily::kInet4;
  if (name == "inet6") return SocketFamily::kInet6;
  if (name == "unix") return SocketFamily::kUnix;
  return absl::InvalidArgumentError(StrCat("UnsupportedFamily: ", name));
}

std::string_view SchedStateName(SchedState s) {
  switch (s) {
    case SchedState::kRunning:
      return "running";
    case SchedState::kRunnable:
      return "runnable";
    case SchedState::kSleep:
      return "sleep";
    case SchedState::kBlock:
      return "block";
  }
  return "?";
}

absl::StatusOr<SchedState> ParseSchedState(std::string_view s) {
  if (s == "running") return SchedState::kRunning;
  if (s == "runnable") return SchedState::kRunnable;
  if (s == "sleep") return SchedState::kSleep;
  if (s == "block") return SchedState::kBlock;
  return absl::InvalidArgumentError(StrCat("unknown scheduler state: ", s));
}

std::string_view EventKindName(const EventKind& kind) {
  static constexpr std::array<std::string_view, std::variant_size_v<EventKind>> kNames = {
      "SchedSwitchOut", "SchedSwitchIn", "SchedWakeup",    "FutexEnter",    "FutexExit",
      "VfsAccess",      "SockAccess",    "PollEnter",      "PollExit",      "EpollCtl",
      "EpollWaitEnter", "EpollWaitExit", "BlockRq",
  };
  return kNames[kind.index()];
}

//-----------------------------------------------------------------------------
// Bri
//-----------------------------------------------------------------------------

std::string Bri::Key() const {
  struct Visitor {
    std::string operator()(const VfsInode& v) const {
      return StrCat("vfs:", v.s_dev, ":", v.i_ino);
    }
    std::string operator()(const SocketTuple& v) const {
      return StrCat("sock:", SocketFamilyName(v.family), ":", EscapeEndpoint(v.first), ",",
                          EscapeEndpoint(v.second));
    }
    std::string operator()(const FutexAddr& v) const {
      if (v.shared) return StrCat("futex:shared:", Hex(v.uaddr));
      return StrCat("futex:", v.tgid, ":", Hex(v.uaddr));
    }
    std::string operator()(const EpollObj& v) const { return StrCat("epoll:", Hex(v.kaddr)); }
    std::string operator()(const BlockDev& v) const {
      return StrCat("blk:", v.major, ":", v.minor);
    }
  };
  return std::visit(Visitor{}, payload_);
}

absl::StatusOr<Bri> ParseBriKey(std::string_view key) {
  auto bad = [&]() { return absl::InvalidArgumentError(StrCat("malformed bri key: ", key)); };
  size_t colon = key.find(':');
  if (colon == std::string_view::npos) return bad();
  std::string_view tag = key.substr(0, colon);
  std::string_view rest = key.substr(colon + 1);

  if (tag == "vfs") {
    std::vector<std::string_view> parts = Split(rest, ':');
    VfsInode v;
    if (parts.size() != 2 || !ParseUnsigned(parts[0], &v.s_dev) ||
        !ParseUnsigned(parts[1], &v.i_ino)) {
      return bad();
    }
    return Bri(v);
  }
  if (tag == "blk") {
    std::vector<std::string_view> parts = Split(rest, ':');
    BlockDev v;
    if (parts.size() != 2 || !ParseUnsigned(parts[0], &v.major) ||
        !ParseUnsigned(parts[1], &v.minor)) {
      return bad();
    }
    return Bri(v);
  }
  if (tag == "epoll") {
    EpollObj v;
    if (!ParseUnsigned(rest, &v.kaddr, 16)) return bad();
    return Bri(v);
  }
  if (tag == "futex") {
    size_t c2 = rest.find(':');
    if (c2 == std::string_view::npos) return bad();
    FutexAddr v;
    std::string_view scope = rest.substr(0, c2);
    if (scope == "shared") {
      v.shared = true;
    } else if (!ParseInt(scope, &v.tgid)) {
      return bad();
    }
    if (!ParseUnsigned(rest.substr(c2 + 1), &v.uaddr, 16)) return bad();
    return Bri(v);
  }
  if (tag == "sock") {
    size_t c2 = rest.find(':');
    if (c2 == std::string_view::npos) return bad();
    auto family = ParseSocketFamily(rest.substr(0, c2));
    if (!family.ok()) return bad();
    std::string_view eps = rest.substr(c2 + 1);
    size_t comma = eps.find(',');
    if (comma == std::string_view::npos) return bad();
    auto first = UnescapeEndpoint(eps.substr(0, comma));
    auto second = UnescapeEndpoint(eps.substr(comma + 1));
    if (!first.ok() || !second.ok()) return bad();
    return Bri(SocketTuple{*family, *std::move(first), *std::move(second)});
  }
  return bad();
}

size_t BriHash::operator()(const Bri& bri) const {
  struct Visitor {
    size_t operator()(const VfsInode& v) const { return HashOf(0, v.s_dev, v.i_ino); }
    size_t operator()(const SocketTuple& v) const {
      return HashOf(1, static_cast<int>(v.family), v.first, v.second);
    }
    size_t operator()(const FutexAddr& v) const {
      return HashOf(2, v.tgid, v.uaddr, v.shared);
    }
    size_t operator()(const EpollObj& v) const { return HashOf(3, v.kaddr); }
    size_t operator()(const BlockDev& v) const { return HashOf(4, v.major, v.minor); }
  };
  return std::visit(Visitor{}, bri.payload());
}

Bri BriOfFile(uint64_t s_dev, uint64_t i_ino) { return Bri(VfsInode{s_dev, i_ino}); }

absl::StatusOr<std::string> NormalizeEndpoint(SocketFamily family, std::string_view endpoint) {
  switch (family) {
    case SocketFamily::kInet4: {
      auto hp = SplitHostPort(endpoint);
      if (!hp.ok()) return hp.status();
      std::string host(hp->first);
      in_addr addr{};
      if (inet_pton(AF_INET, host.c_str(), &addr) != 1) {
        return absl::InvalidArgumentError(StrCat("bad inet4 address: ", endpoint));
      }
      char buf[INET_ADDRSTRLEN];
      inet_ntop(AF_INET, &addr, buf, sizeof(buf));
      return StrCat(buf, ":", hp->second);
    }
    case SocketFamily::kInet6: {
      auto hp = SplitHostPort(endpoint);
      if (!hp.ok()) return hp.status();
      std::string_view bracketed = hp->first;
      if (bracketed.size() < 3 || bracketed.front() != '[' || bracketed.back() != ']') {
        return absl::InvalidArgumentError(
            StrCat("inet6 endpoint must be [addr]:port: ", endpoint));
      }
      std::string host(bracketed.substr(1, bracketed.size() - 2));
      in6_addr addr{};
      if (inet_pton(AF_INET6, host.c_str(), &addr) != 1) {
        return absl::InvalidArgumentError(StrCat("bad inet6 address: ", endpoint));
      }
      char buf[INET6_ADDRSTRLEN];
      inet_ntop(AF_INET6, &addr, buf, sizeof(buf));
      return StrCat("[", buf, "]:", hp->second);
    }
    case SocketFamily::kUnix: {
      if (endpoint.empty()) {
        return absl::InvalidArgumentError("empty unix endpoint");
      }
      // "dev:ino" pairs identify the socket inode; anything else is a path.
      std::vector<std::string_view> parts = Split(endpoint, ':');
      uint64_t dev = 0, ino = 0;
      if (parts.size() == 2 && ParseUnsigned(parts[0], &dev) && ParseUnsigned(parts[1], &ino)) {
        return StrCat(dev, ":", ino);
      }
      if (endpoint.front() != '/' && endpoint.front() != '@') {
        return absl::InvalidArgumentError(
            StrCat("unix endpoint must be dev:ino, a path or @abstract: ", endpoint));
      }
      return std::string(endpoint);
    }
  }
  return absl::InvalidArgumentError("unknown family");
}

absl::StatusOr<Bri> CanonicalizeSocket(SocketFamily family, std::string_view local,
                                       std::string_view remote) {
  auto a = NormalizeEndpoint(family, local);
  if (!a.ok()) return a.status();
  auto b = NormalizeEndpoint(family, remote);
  if (!b.ok()) return b.status();
  if (*b < *a) std::swap(*a, *b);
  return Bri(SocketTuple{family, *std::move(a), *std::move(b)});
}

absl::StatusOr<Bri> CanonicalizeSocket(int address_family, std::string_view local,
                                       std::string_view remote) {
  switch (address_family) {
    case AF_INET:
      return CanonicalizeSocket(SocketFamily::kInet4, local, remote);
    case AF_INET6:
      return CanonicalizeSocket(SocketFamily::kInet6, local, remote);
    case AF_UNIX:
      return CanonicalizeSocket(SocketFamily::kUnix, local, remote);
    default:
      return absl::InvalidArgumentError(
          StrCat("UnsupportedFamily: address family ", address_family));
  }
}

bool IsInetSocket(const Bri& bri) {
  const auto* s = bri.get_if<SocketTuple>();
  return s != nullptr && s->family != SocketFamily::kUnix;
}

bool IsIpcResource(const Bri& bri) {
  return bri.kind() == BriKind::kFutex || bri.kind() == BriKind::kVfs ||
         bri.kind() == BriKind::kSocket;
}

//-----------------------------------------------------------------------------
// Metrics
//-----------------------------------------------------------------------------

namespace {

constexpr std::array<MetricInfo, kMetricKindCount> kMetricTable = {{
    {MetricKind::kRuntime, "runtime", Granularity::kThread, true},
    {MetricKind::kRqTime, "rq_time", Granularity::kThread, true},
    {MetricKind::kBlockTime, "block_time", Granularity::kThread, true},
    {MetricKind::kIowaitTime, "iowait_time", Granularity::kThread, true},
    {MetricKind::kSleepTime, "sleep_time", Granularity::kThread, true},
    {MetricKind::kPipeWaitTime, "pipe_wait_time", Granularity::kThreadResource, true},
    {MetricKind::kPipeWaitCount, "pipe_wait_count", Granularity::kThreadResource, false},
    {MetricKind::kSocketWaitTime, "socket_wait_time", Granularity::kThreadResource, true},
    {MetricKind::kSocketWaitCount, "socket_wait_count", Granularity::kThreadResource, false},
    {MetricKind::kSectorCount, "sector_count", Granularity::kThreadResource, false},
    {MetricKind::kEpollWaitTime, "epoll_wait_time", Granularity::kThreadResource, true},
    {MetricKind::kEpollWaitCount, "epoll_wait_count", Granularity::kThreadResource, false},
    {MetricKind::kEpollFileWait, "epoll_file_wait", Granularity::kEpollResource, true},
    {MetricKind::kFutexWaitTime, "futex_wait_time", Granularity::kThreadResource, true},
    {MetricKind::kFutexWaitCount, "futex_wait_count", Granularity::kThreadResource, false},
    {MetricKind::kFutexWakeCount, "futex_wake_count", Granularity::kThreadResource, false},
}};

}  // namespace

const MetricInfo& InfoOf(MetricKind kind) { return kMetricTable[static_cast<size_t>(kind)]; }

std::string_view MetricName(MetricKind kind) { return InfoOf(kind).name; }

absl::StatusOr<MetricKind> ParseMetricKind(std::string_view name) {
  for (const auto& info : kMetricTable) {
    if (info.name == name) return info.kind;
  }
  return absl::InvalidArgumentError(StrCat("unknown metric: ", name));
}

const std::vector<MetricKind>& AllMetricKinds() {
  static const std::vector<MetricKind> kAll = [] {
    std::vector<MetricKind> v;
    for (const auto& info : kMetricTable) v.push_back(info.kind);
    return v;
  }();
  return kAll;
}

bool IsSchedulerMetric(MetricKind kind) {
  return static_cast<int>(kind) <= static_cast<int>(MetricKind::kSleepTime);
}

bool IsIpcMetric(MetricKind kind) {
  switch (kind) {
    case MetricKind::kPipeWaitTime:
    case MetricKind::kPipeWaitCount:
    case MetricKind::kSocketWaitTime:
    case MetricKind::kSocketWaitCount:
    case MetricKind::kFutexWaitTime:
    case MetricKind::kFutexWaitCount:
    case MetricKind::kFutexWakeCount:
      return true;
    default:
      return false;
  }
}

TimeWindow WindowContaining(TimestampNs ts, DurationNs window_ns) {
  TimestampNs start = ts / window_ns * window_ns;
  if (ts < 0 && ts % window_ns != 0) start -= window_ns;
  return TimeWindow{start, start + window_ns};
}

}  // namespace prismlike
