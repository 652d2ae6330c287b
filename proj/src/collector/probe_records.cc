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


#include "prismlike/collector/probe_records.h"

#include <arpa/inet.h>

#include <cstring>

#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"

namespace prismlike {
namespace {

template <typename T>
void Append(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T Load(std::span<const uint8_t> bytes, size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

absl::StatusOr<pl_endpoint> EncodeEndpoint(SocketFamily family, std::string_view text) {
  pl_endpoint ep{};
  if (family == SocketFamily::kUnix) {
    std::vector<std::string_view> parts = Split(text, ':');
    uint64_t dev = 0, ino = 0;
    if (parts.size() != 2 || !ParseInt(parts[0], &dev) || !ParseInt(parts[1], &ino)) {
      return absl::InvalidArgumentError(StrCat("unix endpoint is not dev:ino: ", text));
    }
    ep.family = PL_FAMILY_UNIX;
    std::memcpy(ep.addr, &dev, 8);
    std::memcpy(ep.addr + 8, &ino, 8);
    return ep;
  }
  size_t colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    return absl::InvalidArgumentError(StrCat("endpoint has no port: ", text));
  }
  std::string host(text.substr(0, colon));
  if (!ParseInt(text.substr(colon + 1), &ep.port)) {
    return absl::InvalidArgumentError(StrCat("bad port: ", text));
  }
  if (family == SocketFamily::kInet6) {
    if (host.size() < 2 || host.front() != '[' || host.back() != ']') {
      return absl::InvalidArgumentError(StrCat("bad inet6 endpoint: ", text));
    }
    host = host.substr(1, host.size() - 2);
    ep.family = PL_FAMILY_INET6;
    if (inet_pton(AF_INET6, host.c_str(), ep.addr) != 1) {
      return absl::InvalidArgumentError(StrCat("bad inet6 endpoint: ", text));
    }
    return ep;
  }
  ep.family = PL_FAMILY_INET4;
  if (inet_pton(AF_INET, host.c_str(), ep.addr) != 1) {
    return absl::InvalidArgumentError(StrCat("bad inet4 endpoint: ", text));
  }
  return ep;
}

absl::StatusOr<std::pair<SocketFamily, std::string>> DecodeEndpoint(const pl_endpoint& ep) {
  char buf[INET6_ADDRSTRLEN];
  switch (ep.family) {
    case PL_FAMILY_INET4:
      inet_ntop(AF_INET, ep.addr, buf, sizeof(buf));
      return std::pair{SocketFamily::kInet4, StrCat(buf, ":", ep.port)};
    case PL_FAMILY_INET6:
      inet_ntop(AF_INET6, ep.addr, buf, sizeof(buf));
      return std::pair{SocketFamily::kInet6, StrCat("[", buf, "]:", ep.port)};
    case PL_FAMILY_UNIX: {
      uint64_t dev = 0, ino = 0;
      std::memcpy(&dev, ep.addr, 8);
      std::memcpy(&ino, ep.addr + 8, 8);
      return std::pair{SocketFamily::kUnix, StrCat(dev, ":", ino)};
    }
    default:
      return absl::InvalidArgumentError(StrCat("bad endpoint family ", int{ep.family}));
  }
}

absl::StatusOr<Bri> DecodeSocketPair(const pl_endpoint& a, const pl_endpoint& b,
                                     std::string* first_text, std::string* second_text) {
  PL_ASSIGN_OR_RETURN(auto ea, DecodeEndpoint(a));
  PL_ASSIGN_OR_RETURN(auto eb, DecodeEndpoint(b));
  if (ea.first != eb.first) return absl::InvalidArgumentError("socket endpoint families differ");
  if (first_text) *first_text = ea.second;
  if (second_text) *second_text = eb.second;
  return CanonicalizeSocket(ea.first, ea.second, eb.second);
}

void FillComm(char (&dst)[PL_COMM_LEN], const std::string& comm) {
  std::memset(dst, 0, sizeof(dst));
  std::memcpy(dst, comm.data(), std::min(comm.size(), sizeof(dst) - 1));
}

template <typename T>
absl::Status Need(std::span<const uint8_t> payload, size_t n = sizeof(T)) {
  if (payload.size() < n) return absl::InvalidArgumentError("truncated record payload");
  return absl::OkStatus();
}

}  // namespace

absl::Status CheckProbeAbi(const pl_abi_info& info) {
  if (info.magic != PL_ABI_MAGIC) {
    return absl::FailedPreconditionError(fmt::format("probe ABI magic {:#x}", info.magic));
  }
  if (info.version != PL_ABI_VERSION) {
    return absl::FailedPreconditionError(
        fmt::format("probe ABI version {} but collector expects {}", info.version,
                    PL_ABI_VERSION));
  }
  return absl::OkStatus();
}

absl::StatusOr<pl_bri> EncodeBri(const std::optional<Bri>& bri) {
  pl_bri raw{};
  if (!bri) return raw;
  if (const auto* v = bri->get_if<VfsInode>()) {
    raw.kind = PL_BRI_VFS;
    raw.u.vfs.s_dev = v->s_dev;
    raw.u.vfs.i_ino = v->i_ino;
  } else if (const auto* s = bri->get_if<SocketTuple>()) {
    raw.kind = PL_BRI_SOCKET;
    PL_ASSIGN_OR_RETURN(raw.u.sock.a, EncodeEndpoint(s->family, s->first));
    PL_ASSIGN_OR_RETURN(raw.u.sock.b, EncodeEndpoint(s->family, s->second));
  } else if (const auto* f = bri->get_if<FutexAddr>()) {
    raw.kind = PL_BRI_FUTEX;
    raw.u.futex.uaddr = f->uaddr;
    raw.u.futex.tgid = static_cast<uint32_t>(f->tgid);
    raw.u.futex.shared = f->shared ? 1 : 0;
  } else if (const auto* e = bri->get_if<EpollObj>()) {
    raw.kind = PL_BRI_EPOLL;
    raw.u.epoll.kaddr = e->kaddr;
  } else if (const auto* b = bri->get_if<BlockDev>()) {
    raw.kind = PL_BRI_BLOCK;
    raw.u.block.major = b->major;
    raw.u.block.minor = b->minor;
  }
  return raw;
}

absl::StatusOr<std::optional<Bri>> DecodeBri(const pl_bri& raw) {
  switch (raw.kind) {
    case PL_BRI_NONE:
      return std::optional<Bri>();
    case PL_BRI_VFS:
      return std::optional<Bri>(VfsInode{raw.u.vfs.s_dev, raw.u.vfs.i_ino});
    case PL_BRI_SOCKET: {
      PL_ASSIGN_OR_RETURN(Bri bri, DecodeSocketPair(raw.u.sock.a, raw.u.sock.b, nullptr, nullptr));
      return std::optional<Bri>(std::move(bri));
    }
    case PL_BRI_FUTEX:
      return std::optional<Bri>(FutexAddr{static_cast<int32_t>(raw.u.futex.tgid),
                                          raw.u.futex.uaddr, raw.u.futex.shared != 0});
    case PL_BRI_EPOLL:
      return std::optional<Bri>(EpollObj{raw.u.epoll.kaddr});
    case PL_BRI_BLOCK:
      return std::optional<Bri>(BlockDev{raw.u.block.major, raw.u.block.minor});
    default:
      return absl::InvalidArgumentError(StrCat("unknown BRI kind ", int{raw.kind}));
  }
}

absl::StatusOr<std::vector<uint8_t>> EncodeProbeRecord(const KernelEvent& event) {
  std::vector<uint8_t> payload;
  uint16_t type = 0;
  absl::Status status = std::visit(
      [&](const auto& k) -> absl::Status {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SchedSwitchOut>) {
          type = PL_REC_SWITCH_OUT;
          pl_switch_out p{};
          p.state = static_cast<uint8_t>(k.next_state);
          p.in_iowait = k.in_iowait;
          p.exiting = k.exiting;
          Append(payload, p);
        } else if constexpr (std::is_same_v<K, SchedSwitchIn>) {
          type = PL_REC_SWITCH_IN;
        } else if constexpr (std::is_same_v<K, SchedWakeup>) {
          type = PL_REC_WAKEUP;
        } else if constexpr (std::is_same_v<K, FutexEnter>) {
          type = PL_REC_FUTEX_ENTER;
          pl_futex_enter p{};
          p.uaddr = k.uaddr;
          p.val = k.val;
          p.op = k.op == FutexOp::kWait ? 0 : 1;
          p.shared = k.shared;
          Append(payload, p);
        } else if constexpr (std::is_same_v<K, FutexExit>) {
          type = PL_REC_FUTEX_EXIT;
          Append(payload, pl_futex_exit{k.result});
        } else if constexpr (std::is_same_v<K, VfsAccess>) {
          type = PL_REC_VFS;
          pl_vfs p{};
          p.s_dev = k.bri.s_dev;
          p.i_ino = k.bri.i_ino;
          p.dir = k.dir == VfsDir::kRead ? 0 : 1;
          p.file_kind = static_cast<uint8_t>(k.file_kind);
          p.blocking = k.blocking;
          p.enter = k.enter;
          Append(payload, p);
        } else if constexpr (std::is_same_v<K, SockAccess>) {
          type = PL_REC_SOCK;
          pl_sock p{};
          PL_ASSIGN_OR_RETURN(p.a, EncodeEndpoint(k.bri.family, k.bri.first));
          PL_ASSIGN_OR_RETURN(p.b, EncodeEndpoint(k.bri.family, k.bri.second));
          p.dir = k.dir == SockDir::kRecv ? 0 : 1;
          p.enter = k.enter;
          if (!k.remote.empty()) {
            if (k.remote == k.bri.first) {
              p.remote = 1;
            } else if (k.remote == k.bri.second) {
              p.remote = 2;
            } else {
              return absl::InvalidArgumentError(
                  StrCat("remote endpoint ", k.remote, " is not part of the socket"));
            }
          }
          Append(payload, p);
        } else if constexpr (std::is_same_v<K, PollEnter> || std::is_same_v<K, PollExit>) {
          type = std::is_same_v<K, PollEnter> ? PL_REC_POLL_ENTER : PL_REC_POLL_EXIT;
          if (k.bris.size() > PL_MAX_POLL_BRIS) {
            return absl::InvalidArgumentError("too many poll BRIs for one record");
          }
          pl_poll p{};
          p.api = k.api == PollApi::kSelect ? 0 : 1;
          p.nbris = static_cast<uint32_t>(k.bris.size());
          Append(payload, p);
          for (const Bri& b : k.bris) {
            PL_ASSIGN_OR_RETURN(pl_bri raw, EncodeBri(b));
            Append(payload, raw);
          }
        } else if constexpr (std::is_same_v<K, EpollCtl>) {
          type = PL_REC_EPOLL_CTL;
          pl_epoll_ctl p{};
          p.kaddr = k.epoll.kaddr;
          p.action = k.action == EpollAction::kInsert ? 0 : 1;
          PL_ASSIGN_OR_RETURN(p.target, EncodeBri(k.target));
          Append(payload, p);
        } else if constexpr (std::is_same_v<K, EpollWaitEnter>) {
          type = PL_REC_EPOLL_WAIT_ENTER;
          Append(payload, pl_epoll_wait{k.epoll.kaddr});
        } else if constexpr (std::is_same_v<K, EpollWaitExit>) {
          type = PL_REC_EPOLL_WAIT_EXIT;
          Append(payload, pl_epoll_wait{k.epoll.kaddr});
        } else if constexpr (std::is_same_v<K, BlockRq>) {
          type = PL_REC_BLOCK_RQ;
          Append(payload, pl_block_rq{k.dev.major, k.dev.minor, k.sectors});
        }
        return absl::OkStatus();
      },
      event.kind);
  PL_RETURN_IF_ERROR(status);

  pl_record_hdr hdr{};
  hdr.ts_ns = static_cast<uint64_t>(event.ts);
  hdr.tid = static_cast<uint32_t>(event.thread.tid);
  hdr.tgid = static_cast<uint32_t>(event.thread.tgid);
  FillComm(hdr.comm, event.thread.comm);
  hdr.type = type;
  size_t size = sizeof(hdr) + payload.size();
  hdr.size = static_cast<uint16_t>((size + 7) & ~size_t{7});
  std::vector<uint8_t> out;
  out.reserve(hdr.size);
  Append(out, hdr);
  out.insert(out.end(), payload.begin(), payload.end());
  out.resize(hdr.size, 0);
  return out;
}

absl::StatusOr<KernelEvent> DecodeProbeRecord(std::span<const uint8_t> bytes, size_t* consumed) {
  if (bytes.size() < sizeof(pl_record_hdr)) {
    return absl::InvalidArgumentError("truncated record header");
  }
  auto hdr = Load<pl_record_hdr>(bytes, 0);
  if (hdr.size < sizeof(pl_record_hdr) || hdr.size % 8 != 0 || hdr.size > bytes.size()) {
    return absl::InvalidArgumentError(StrCat("bad record size ", hdr.size));
  }
  *consumed = hdr.size;
  std::span<const uint8_t> payload = bytes.subspan(sizeof(hdr), hdr.size - sizeof(hdr));

  KernelEvent e;
  e.ts = static_cast<TimestampNs>(hdr.ts_ns);
  e.thread.tid = static_cast<int32_t>(hdr.tid);
  e.thread.tgid = static_cast<int32_t>(hdr.tgid);
  e.thread.comm.assign(hdr.comm, strnlen(hdr.comm, sizeof(hdr.comm)));

  switch (hdr.type) {
    case PL_REC_SWITCH_OUT: {
      PL_RETURN_IF_ERROR(Need<pl_switch_out>(payload));
      auto p = Load<pl_switch_out>(payload, 0);
      if (p.state > PL_STATE_BLOCK) return absl::InvalidArgumentError("bad sched state");
      e.kind = SchedSwitchOut{static_cast<SchedState>(p.state), p.in_iowait != 0, p.exiting != 0};
      break;
    }
    case PL_REC_SWITCH_IN:
      e.kind = SchedSwitchIn{};
      break;
    case PL_REC_WAKEUP:
      e.kind = SchedWakeup{};
      break;
    case PL_REC_FUTEX_ENTER: {
      PL_RETURN_IF_ERROR(Need<pl_futex_enter>(payload));
      auto p = Load<pl_futex_enter>(payload, 0);
      e.kind = FutexEnter{p.uaddr, p.op == 0 ? FutexOp::kWait : FutexOp::kWake, p.val,
                          p.shared != 0};
      break;
    }
    case PL_REC_FUTEX_EXIT: {
      PL_RETURN_IF_ERROR(Need<pl_futex_exit>(payload));
      e.kind = FutexExit{Load<pl_futex_exit>(payload, 0).result};
      break;
    }
    case PL_REC_VFS: {
      PL_RETURN_IF_ERROR(Need<pl_vfs>(payload));
      auto p = Load<pl_vfs>(payload, 0);
      if (p.file_kind > 2) return absl::InvalidArgumentError("bad file kind");
      e.kind = VfsAccess{VfsInode{p.s_dev, p.i_ino}, p.dir == 0 ? VfsDir::kRead : VfsDir::kWrite,
                         static_cast<FileKind>(p.file_kind), p.blocking != 0, p.enter != 0};
      break;
    }
    case PL_REC_SOCK: {
      PL_RETURN_IF_ERROR(Need<pl_sock>(payload));
      auto p = Load<pl_sock>(payload, 0);
      std::string a, b;
      PL_ASSIGN_OR_RETURN(Bri bri, DecodeSocketPair(p.a, p.b, &a, &b));
      SockAccess s;
      s.bri = *bri.get_if<SocketTuple>();
      s.dir = p.dir == 0 ? SockDir::kRecv : SockDir::kSend;
      s.enter = p.enter != 0;
      if (p.remote == 1) s.remote = a;
      if (p.remote == 2) s.remote = b;
      if (!s.remote.empty()) {
        PL_ASSIGN_OR_RETURN(s.remote, NormalizeEndpoint(s.bri.family, s.remote));
      }
      e.kind = std::move(s);
      break;
    }
    case PL_REC_POLL_ENTER:
    case PL_REC_POLL_EXIT: {
      PL_RETURN_IF_ERROR(Need<pl_poll>(payload));
      auto p = Load<pl_poll>(payload, 0);
      if (p.nbris > PL_MAX_POLL_BRIS) return absl::InvalidArgumentError("too many poll BRIs");
      PL_RETURN_IF_ERROR(Need<pl_poll>(payload, sizeof(p) + p.nbris * sizeof(pl_bri)));
      std::vector<Bri> bris;
      for (uint32_t i = 0; i < p.nbris; ++i) {
        PL_ASSIGN_OR_RETURN(std::optional<Bri> b,
                            DecodeBri(Load<pl_bri>(payload, sizeof(p) + i * sizeof(pl_bri))));
        if (!b) return absl::InvalidArgumentError("empty poll BRI");
        bris.push_back(*std::move(b));
      }
      PollApi api = p.api == 0 ? PollApi::kSelect : PollApi::kPoll;
      if (hdr.type == PL_REC_POLL_ENTER) {
        e.kind = PollEnter{api, std::move(bris)};
      } else {
        e.kind = PollExit{api, std::move(bris)};
      }
      break;
    }
    case PL_REC_EPOLL_CTL: {
      PL_RETURN_IF_ERROR(Need<pl_epoll_ctl>(payload));
      auto p = Load<pl_epoll_ctl>(payload, 0);
      PL_ASSIGN_OR_RETURN(std::optional<Bri> target, DecodeBri(p.target));
      if (!target) return absl::InvalidArgumentError("epoll_ctl without target");
      e.kind = EpollCtl{EpollObj{p.kaddr}, *std::move(target),
                        p.action == 0 ? EpollAction::kInsert : EpollAction::kRemove};
      break;
    }
    case PL_REC_EPOLL_WAIT_ENTER:
    case PL_REC_EPOLL_WAIT_EXIT: {
      PL_RETURN_IF_ERROR(Need<pl_epoll_wait>(payload));
      EpollObj ep{Load<pl_epoll_wait>(payload, 0).kaddr};
      if (hdr.type == PL_REC_EPOLL_WAIT_ENTER) {
        e.kind = EpollWaitEnter{ep};
      } else {
        e.kind = EpollWaitExit{ep};
      }
      break;
    }
    case PL_REC_BLOCK_RQ: {
      PL_RETURN_IF_ERROR(Need<pl_block_rq>(payload));
      auto p = Load<pl_block_rq>(payload, 0);
      e.kind = BlockRq{BlockDev{p.major, p.minor}, p.sectors};
      break;
    }
    default:
      return absl::InvalidArgumentError(StrCat("unknown record type ", hdr.type));
  }
  return e;
}

absl::StatusOr<std::vector<KernelEvent>> DecodeProbeRecords(std::span<const uint8_t> bytes) {
  std::vector<KernelEvent> out;
  size_t offset = 0;
  while (offset < bytes.size()) {
    size_t used = 0;
    auto e = DecodeProbeRecord(bytes.subspan(offset), &used);
    if (!e.ok()) {
      return absl::InvalidArgumentError(StrCat("offset ", offset, ": ", StatusMessage(e.status())));
    }
    out.push_back(*std::move(e));
    offset += used;
  }
  return out;
}

absl::StatusOr<std::pair<pl_agg_key, pl_agg_value>> EncodeAggEntry(const AggEntry& entry) {
  pl_agg_key key{};
  key.tid = static_cast<uint32_t>(entry.tid);
  key.tgid = static_cast<uint32_t>(entry.tgid);
  key.metric = static_cast<uint16_t>(entry.metric);
  key.access = entry.access;
  PL_ASSIGN_OR_RETURN(key.resource, EncodeBri(entry.resource));
  PL_ASSIGN_OR_RETURN(key.subject, EncodeBri(entry.subject));
  return std::pair{key, pl_agg_value{entry.time_ns, entry.count}};
}

absl::StatusOr<std::vector<AggEntry>> DecodeAggSnapshot(std::span<const uint8_t> keys,
                                                        std::span<const uint8_t> values) {
  if (keys.size() % sizeof(pl_agg_key) != 0 || values.size() % sizeof(pl_agg_value) != 0 ||
      keys.size() / sizeof(pl_agg_key) != values.size() / sizeof(pl_agg_value)) {
    return absl::InvalidArgumentError("snapshot key and value arrays do not line up");
  }
  size_t n = keys.size() / sizeof(pl_agg_key);
  std::vector<AggEntry> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    auto key = Load<pl_agg_key>(keys, i * sizeof(pl_agg_key));
    auto value = Load<pl_agg_value>(values, i * sizeof(pl_agg_value));
    if (key.metric >= kMetricKindCount) {
      return absl::InvalidArgumentError(StrCat("entry ", i, ": bad metric ordinal ", key.metric));
    }
    AggEntry e;
    e.tid = static_cast<int32_t>(key.tid);
    e.tgid = static_cast<int32_t>(key.tgid);
    e.metric = static_cast<MetricKind>(key.metric);
    e.access = key.access;
    PL_ASSIGN_OR_RETURN(e.resource, DecodeBri(key.resource));
    PL_ASSIGN_OR_RETURN(e.subject, DecodeBri(key.subject));
    e.time_ns = value.time_ns;
    e.count = value.count;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace prismlike
