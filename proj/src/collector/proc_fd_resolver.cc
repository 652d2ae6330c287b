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


#include <arpa/inet.h>
#include <linux/netlink.h>
#include <linux/rtnetlink.h>
#include <linux/sock_diag.h>
#include <linux/unix_diag.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>
#include <fstream>

#include "prismlike/collector/tracefs.h"
#include "prismlike/core/strings.h"

namespace prismlike {
namespace {

constexpr int kNonBlockFlag = 04000;
constexpr auto kRefreshInterval = std::chrono::milliseconds(20);

// "0100007F:1F90" -> "127.0.0.1:8080"; the address words are printed in host
// byte order.
std::optional<std::string> DecodeProcAddress(std::string_view hex, bool v6) {
  size_t colon = hex.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  std::string_view addr = hex.substr(0, colon);
  uint16_t port = 0;
  if (!ParseInt(hex.substr(colon + 1), &port, 16)) return std::nullopt;
  size_t words = v6 ? 4 : 1;
  if (addr.size() != words * 8) return std::nullopt;
  uint8_t bytes[16];
  for (size_t w = 0; w < words; ++w) {
    uint32_t v = 0;
    if (!ParseInt(addr.substr(w * 8, 8), &v, 16)) return std::nullopt;
    std::memcpy(bytes + w * 4, &v, 4);
  }
  char buf[INET6_ADDRSTRLEN];
  inet_ntop(v6 ? AF_INET6 : AF_INET, bytes, buf, sizeof(buf));
  if (v6) return StrCat("[", buf, "]:", port);
  return StrCat(buf, ":", port);
}

// Unix socket inode -> peer inode for the collector's network namespace.
std::map<uint64_t, uint64_t> UnixPeers() {
  std::map<uint64_t, uint64_t> peers;
  int fd = socket(AF_NETLINK, SOCK_DGRAM | SOCK_CLOEXEC, NETLINK_SOCK_DIAG);
  if (fd < 0) return peers;
  struct {
    nlmsghdr nlh;
    unix_diag_req req;
  } msg{};
  msg.nlh.nlmsg_len = sizeof(msg);
  msg.nlh.nlmsg_type = SOCK_DIAG_BY_FAMILY;
  msg.nlh.nlmsg_flags = NLM_F_REQUEST | NLM_F_DUMP;
  msg.req.sdiag_family = AF_UNIX;
  msg.req.udiag_states = ~0u;
  msg.req.udiag_show = UDIAG_SHOW_PEER;
  if (send(fd, &msg, sizeof(msg), 0) < 0) {
    close(fd);
    return peers;
  }
  alignas(nlmsghdr) char buf[1 << 15];
  bool done = false;
  while (!done) {
    ssize_t n = recv(fd, buf, sizeof(buf), 0);
    if (n <= 0) break;
    for (auto* h = reinterpret_cast<nlmsghdr*>(buf); NLMSG_OK(h, static_cast<unsigned>(n));
         h = NLMSG_NEXT(h, n)) {
      if (h->nlmsg_type == NLMSG_DONE || h->nlmsg_type == NLMSG_ERROR) {
        done = true;
        break;
      }
      auto* m = static_cast<unix_diag_msg*>(NLMSG_DATA(h));
      int len = static_cast<int>(h->nlmsg_len - NLMSG_LENGTH(sizeof(*m)));
      for (auto* a = reinterpret_cast<rtattr*>(m + 1); RTA_OK(a, len); a = RTA_NEXT(a, len)) {
        if (a->rta_type == UNIX_DIAG_PEER) {
          uint32_t peer = 0;
          std::memcpy(&peer, RTA_DATA(a), sizeof(peer));
          peers[m->udiag_ino] = peer;
        }
      }
    }
  }
  close(fd);
  return peers;
}

}  // namespace

std::optional<int32_t> ProcFdResolver::TgidOf(int32_t tid) {
  std::ifstream in(StrCat("/proc/", tid, "/status"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("Tgid:")) {
      int32_t v = 0;
      if (ParseInt(Trim(std::string_view(line).substr(5)), &v)) return v;
    }
  }
  return std::nullopt;
}

void ProcFdResolver::RefreshSockets(int32_t tid) {
  auto now = std::chrono::steady_clock::now();
  if (now - last_refresh_ < kRefreshInterval) return;
  last_refresh_ = now;
  for (auto [file, v6] : {std::pair{"tcp", false}, {"tcp6", true}, {"udp", false},
                          {"udp6", true}}) {
    std::ifstream in(StrCat("/proc/", tid, "/net/", file));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string_view> cols;
      for (std::string_view c : Split(line, ' ')) {
        if (!c.empty()) cols.push_back(c);
      }
      uint64_t ino = 0;
      if (cols.size() < 10 || !ParseInt(cols[9], &ino) || ino == 0) continue;
      auto local = DecodeProcAddress(cols[1], v6);
      auto remote = DecodeProcAddress(cols[2], v6);
      if (!local || !remote) continue;
      sockets_[ino] = SockInfo{v6 ? SocketFamily::kInet6 : SocketFamily::kInet4, *local, *remote};
    }
  }
  for (auto [ino, peer] : UnixPeers()) {
    sockets_[ino] = SockInfo{SocketFamily::kUnix, "", "", peer};
  }
}

std::optional<ResolvedFd> ProcFdResolver::Resolve(int32_t tid, int fd) {
  std::string path = StrCat("/proc/", tid, "/fd/", fd);
  char link[256];
  ssize_t n = readlink(path.c_str(), link, sizeof(link) - 1);
  if (n < 0) return std::nullopt;
  std::string_view target(link, static_cast<size_t>(n));
  struct stat st{};
  if (stat(path.c_str(), &st) != 0) return std::nullopt;

  ResolvedFd out;
  std::ifstream info(StrCat("/proc/", tid, "/fdinfo/", fd));
  std::string line;
  while (std::getline(info, line)) {
    int flags = 0;
    if (line.starts_with("flags:") && ParseInt(Trim(std::string_view(line).substr(6)), &flags, 8)) {
      out.blocking = (flags & kNonBlockFlag) == 0;
      break;
    }
  }

  if (S_ISFIFO(st.st_mode)) {
    out.kind = ResolvedFd::Kind::kFifo;
    out.bri = Bri(VfsInode{st.st_dev, st.st_ino});
    return out;
  }
  if (S_ISREG(st.st_mode)) {
    out.kind = ResolvedFd::Kind::kRegular;
    out.bri = Bri(VfsInode{st.st_dev, st.st_ino});
    return out;
  }
  if (target == "anon_inode:[eventpoll]") {
    out.kind = ResolvedFd::Kind::kEpoll;
    return out;
  }
  if (!S_ISSOCK(st.st_mode)) return out;

  auto it = sockets_.find(st.st_ino);
  if (it == sockets_.end()) {
    RefreshSockets(tid);
    it = sockets_.find(st.st_ino);
    if (it == sockets_.end()) return std::nullopt;
  }
  const SockInfo& s = it->second;
  absl::StatusOr<Bri> bri;
  if (s.family == SocketFamily::kUnix) {
    if (s.peer_ino == 0) return std::nullopt;
    std::string dev = std::to_string(st.st_dev);
    std::string self = StrCat(dev, ":", st.st_ino);
    out.remote = StrCat(dev, ":", s.peer_ino);
    bri = CanonicalizeSocket(SocketFamily::kUnix, self, out.remote);
  } else {
    out.remote = s.remote;
    bri = CanonicalizeSocket(s.family, s.local, s.remote);
  }
  if (!bri.ok()) return std::nullopt;
  out.kind = ResolvedFd::Kind::kSocket;
  out.bri = *std::move(bri);
  return out;
}

}  // namespace prismlike
