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

#include "prismlike/collector/discovery.h"

#include <algorithm>
#include <deque>

namespace prismlike {

ProcessDiscovery::ProcessDiscovery(std::vector<int32_t> bootstrap)
    : monitor_all_(bootstrap.empty()), monitored_(bootstrap.begin(), bootstrap.end()) {}

bool ProcessDiscovery::IsMonitored(int32_t tgid) const {
  return monitor_all_ || monitored_.contains(tgid);
}

std::vector<DiscoveryEdge> ProcessDiscovery::Observe(const KernelEvent& event) {
  std::vector<DiscoveryEdge> out;
  const int32_t tgid = event.thread.tgid;
  if (monitor_all_) monitored_.insert(tgid);

  if (const auto* sock = std::get_if<SockAccess>(&event.kind)) {
    Touch(tgid, Bri(sock->bri), event.ts, sock->remote, out);
  } else if (const auto* vfs = std::get_if<VfsAccess>(&event.kind)) {
    if (vfs->file_kind == FileKind::kFifo) Touch(tgid, Bri(vfs->bri), event.ts, "", out);
  }
  return out;
}

void ProcessDiscovery::Touch(int32_t tgid, const Bri& bri, TimestampNs ts,
                             const std::string& remote, std::vector<DiscoveryEdge>& out) {
  auto& touchers = touchers_[bri];
  for (const Toucher& t : touchers) {
    if (t.tgid != tgid) continue;
    // Both endpoints used by one process: a loopback connection to itself.
    if (!remote.empty() && !t.remote.empty() && remote != t.remote) self_connected_.insert(bri);
    return;
  }
  touchers.push_back({tgid, ts, remote});
  bris_of_[tgid].push_back(bri);

  const bool self = IsMonitored(tgid);
  for (size_t i = 0; i + 1 < touchers.size(); ++i) {
    const int32_t other = touchers[i].tgid;
    const bool peer = IsMonitored(other);
    if (self && peer) {
      Link(other, tgid, bri, ts, out);
    } else if (self) {
      Link(tgid, other, bri, ts, out);
      Admit(other, ts, out);
    } else if (peer) {
      Link(other, tgid, bri, ts, out);
      Admit(tgid, ts, out);
      return;  // Admit already linked the rest of this BRI's touchers.
    }
  }
}

void ProcessDiscovery::Link(int32_t from, int32_t to, const Bri& bri, TimestampNs ts,
                            std::vector<DiscoveryEdge>& out) {
  if (from == to) return;
  auto key = std::make_tuple(std::min(from, to), std::max(from, to), bri);
  if (!linked_.insert(key).second) return;
  out.push_back(DiscoveryEdge{from, to, "", bri, ts});
}

void ProcessDiscovery::Admit(int32_t tgid, TimestampNs ts, std::vector<DiscoveryEdge>& out) {
  std::deque<int32_t> queue{tgid};
  monitored_.insert(tgid);
  while (!queue.empty()) {
    const int32_t cur = queue.front();
    queue.pop_front();
    for (const Bri& bri : bris_of_[cur]) {
      for (const Toucher& t : touchers_[bri]) {
        if (t.tgid == cur) continue;
        if (!IsMonitored(t.tgid)) {
          monitored_.insert(t.tgid);
          queue.push_back(t.tgid);
        }
        Link(cur, t.tgid, bri, ts, out);
      }
    }
  }
}

std::vector<DiscoveryEdge> ProcessDiscovery::Finish() {
  std::vector<DiscoveryEdge> out;
  for (const auto& [bri, touchers] : touchers_) {
    if (touchers.size() != 1 || !IsInetSocket(bri) || self_connected_.contains(bri)) continue;
    const Toucher& t = touchers.front();
    if (!IsMonitored(t.tgid) || t.remote.empty()) continue;
    out.push_back(DiscoveryEdge{t.tgid, std::nullopt, "external:" + t.remote, bri, t.first_seen});
  }
  std::sort(out.begin(), out.end(), [](const DiscoveryEdge& a, const DiscoveryEdge& b) {
    return std::tie(a.first_seen, a.from_tgid, a.to_external) <
           std::tie(b.first_seen, b.from_tgid, b.to_external);
  });
  return out;
}

}  // namespace prismlike
