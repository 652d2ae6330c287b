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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "prismlike/core/model.h"
#include "prismlike/core/records.h"

namespace prismlike {

// Transitive IPC process discovery.
//
// Every pipe or socket BRI remembers which processes touched it. When a
// monitored process shares a BRI with an unmonitored one, the latter joins
// the monitored set and an edge is emitted; the newcomer's earlier BRIs are
// then re-examined so closure does not wait for fresh traffic.
class ProcessDiscovery {
 public:
  // An empty bootstrap set monitors every process seen.
  explicit ProcessDiscovery(std::vector<int32_t> bootstrap);

  // Returns the edges this event produced, in emission order.
  std::vector<DiscoveryEdge> Observe(const KernelEvent& event);

  // Inet sockets touched by exactly one monitored process become edges to
  // "external:<peer>" endpoints, unless that process used both ends.
  std::vector<DiscoveryEdge> Finish();

  bool IsMonitored(int32_t tgid) const;
  bool monitor_all() const { return monitor_all_; }
  const std::set<int32_t>& monitored() const { return monitored_; }

 private:
  struct Toucher {
    int32_t tgid;
    TimestampNs first_seen;
    std::string remote;
  };

  void Touch(int32_t tgid, const Bri& bri, TimestampNs ts, const std::string& remote,
             std::vector<DiscoveryEdge>& out);
  void Link(int32_t from, int32_t to, const Bri& bri, TimestampNs ts,
            std::vector<DiscoveryEdge>& out);
  void Admit(int32_t tgid, TimestampNs ts, std::vector<DiscoveryEdge>& out);

  bool monitor_all_;
  std::set<int32_t> monitored_;
  std::map<Bri, std::vector<Toucher>> touchers_;
  std::map<int32_t, std::vector<Bri>> bris_of_;
  // Unordered pair + BRI already linked.
  std::set<std::tuple<int32_t, int32_t, Bri>> linked_;
  std::set<Bri> self_connected_;
};

}  // namespace prismlike
