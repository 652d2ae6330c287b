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


#include "prismlike/graph/dynamics_graph.h"

#include <algorithm>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "prismlike/core/status_macros.h"

namespace prismlike {

namespace {

constexpr std::string_view kUnitNs = "ns";
constexpr std::string_view kUnitCount = "count";
constexpr std::string_view kUnitSectors = "sectors";

DynNodeKind NodeKindOf(const Bri& bri) {
  switch (bri.kind()) {
    case BriKind::kVfs:
      return DynNodeKind::kPipe;
    case BriKind::kSocket:
      return DynNodeKind::kSocket;
    case BriKind::kFutex:
      return DynNodeKind::kFutex;
    case BriKind::kEpoll:
      return DynNodeKind::kEpoll;
    case BriKind::kBlock:
      return DynNodeKind::kDevice;
  }
  return DynNodeKind::kPipe;
}

char AliasPrefix(DynNodeKind kind) {
  static constexpr char kPrefix[] = {'t', 'f', 'p', 's', 'e', 'd', 'x'};
  return kPrefix[static_cast<int>(kind)];
}

std::string ThreadId(const ThreadRef& t) { return fmt::format("tid:{}", t.tid); }

class GraphAccumulator {
 public:
  // Registers a node on first sight; returns its id.
  const std::string& Node(std::string id, DynNodeKind kind,
                          std::optional<ThreadRef> thread = std::nullopt) {
    auto [it, inserted] = index_.try_emplace(id, nodes_.size());
    if (inserted) nodes_.push_back(DynNode{std::move(id), kind, "", std::move(thread)});
    return nodes_[it->second].id;
  }

  void Add(const std::string& from, const std::string& to, DynEdgeKind kind, int64_t weight,
           std::string_view unit) {
    auto& slot = edges_[{from, to, kind}];
    slot.first += weight;
    slot.second = unit;
  }

  bool HasNode(const std::string& id) const { return index_.count(id) != 0; }

  ThreadDynamicsGraph Finish(const TimeRange& range, const GraphOptions& options) {
    std::vector<DynEdge> kept;
    std::set<std::string> linked;
    for (const auto& [key, agg] : edges_) {
      const auto& [from, to, kind] = key;
      const int64_t floor =
          kind == DynEdgeKind::kSchedules ? 1 : (agg.second == kUnitNs ? options.min_time_ns
                                                                       : options.min_count);
      if (agg.first < floor) continue;
      kept.push_back(DynEdge{from, to, kind, agg.first, agg.second});
      linked.insert(from);
      linked.insert(to);
    }
    ThreadDynamicsGraph g;
    g.range = range;
    std::map<DynNodeKind, int> counters;
    std::map<std::string, size_t> order;
    for (DynNode& n : nodes_) {
      if (n.kind != DynNodeKind::kThread && !linked.count(n.id)) continue;
      n.alias = fmt::format("{}{}", AliasPrefix(n.kind), ++counters[n.kind]);
      order[n.id] = g.nodes.size();
      g.nodes.push_back(std::move(n));
    }
    std::sort(kept.begin(), kept.end(), [&](const DynEdge& a, const DynEdge& b) {
      return std::tuple(a.kind, order.at(a.from), order.at(a.to)) <
             std::tuple(b.kind, order.at(b.from), order.at(b.to));
    });
    g.edges = std::move(kept);
    return g;
  }

 private:
  std::vector<DynNode> nodes_;
  std::map<std::string, size_t> index_;
  std::map<std::tuple<std::string, std::string, DynEdgeKind>, std::pair<int64_t, std::string_view>>
      edges_;
};

}  // namespace

std::string_view DynNodeKindName(DynNodeKind kind) {
  static constexpr std::string_view kNames[] = {"thread", "futex",  "pipe",    "socket",
                                                "epoll",  "device", "external"};
  return kNames[static_cast<int>(kind)];
}

std::string_view DynEdgeKindName(DynEdgeKind kind) {
  static constexpr std::string_view kNames[] = {"waits_on",  "wakes",         "writes", "reads",
                                                "schedules", "registered_in", "io_to"};
  return kNames[static_cast<int>(kind)];
}

const DynNode* ThreadDynamicsGraph::FindNode(std::string_view id) const {
  for (const DynNode& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const DynNode* ThreadDynamicsGraph::FindByAlias(std::string_view alias) const {
  for (const DynNode& n : nodes) {
    if (n.alias == alias) return &n;
  }
  return nullptr;
}

bool ThreadDynamicsGraph::HasEdge(std::string_view from, std::string_view to,
                                  DynEdgeKind kind) const {
  return std::any_of(edges.begin(), edges.end(), [&](const DynEdge& e) {
    return e.from == from && e.to == to && e.kind == kind;
  });
}

absl::StatusOr<ThreadDynamicsGraph> BuildThreadGraph(const MetricStore& store,
                                                     const TimeRange& range,
                                                     const std::set<int32_t>& tgids,
                                                     const GraphOptions& options) {
  GraphAccumulator acc;
  if (range.empty()) return acc.Finish(range, options);
  PL_ASSIGN_OR_RETURN(std::vector<MetricSample> samples, store.LoadSamples(range));
  PL_ASSIGN_OR_RETURN(std::vector<DiscoveryEdge> discovered, store.LoadEdges());

  // futex key -> thread id -> (wake count | wait time)
  std::map<std::string, std::map<std::string, int64_t>> wakers, waiters;
  std::map<std::string, int64_t> socket_traffic;
  std::vector<const MetricSample*> registrations;

  for (const MetricSample& s : samples) {
    if (!s.thread.has_value()) {
      if (s.metric == MetricKind::kEpollFileWait) registrations.push_back(&s);
      continue;
    }
    if (!tgids.empty() && !tgids.count(s.thread->tgid)) continue;
    const std::string tid = acc.Node(ThreadId(*s.thread), DynNodeKind::kThread, s.thread);
    if (!s.resource.has_value()) continue;
    const std::string res = acc.Node(s.resource->Key(), NodeKindOf(*s.resource));
    switch (s.metric) {
      case MetricKind::kFutexWaitTime:
        acc.Add(tid, res, DynEdgeKind::kWaitsOn, s.value, kUnitNs);
        waiters[res][tid] += s.value;
        break;
      case MetricKind::kFutexWakeCount:
        acc.Add(tid, res, DynEdgeKind::kWakes, s.value, kUnitCount);
        wakers[res][tid] += s.value;
        break;
      case MetricKind::kPipeWaitCount:
      case MetricKind::kSocketWaitCount:
        if (s.access & kAccessWrite) acc.Add(tid, res, DynEdgeKind::kWrites, s.value, kUnitCount);
        if (s.access & kAccessRead) acc.Add(res, tid, DynEdgeKind::kReads, s.value, kUnitCount);
        if (s.metric == MetricKind::kSocketWaitCount) socket_traffic[res] += s.value;
        break;
      case MetricKind::kPipeWaitTime:
      case MetricKind::kSocketWaitTime:
        // Multiplexed waits carry no direction.
        if (s.access == kAccessNone) acc.Add(tid, res, DynEdgeKind::kWaitsOn, s.value, kUnitNs);
        break;
      case MetricKind::kEpollWaitTime:
        acc.Add(tid, res, DynEdgeKind::kWaitsOn, s.value, kUnitNs);
        break;
      case MetricKind::kSectorCount:
        acc.Add(tid, res, DynEdgeKind::kIoTo, s.value, kUnitSectors);
        break;
      default:
        break;
    }
  }

  for (const MetricSample* s : registrations) {
    const std::string epoll = s->subject->Key();
    if (!acc.HasNode(epoll)) continue;
    const std::string file = acc.Node(s->resource->Key(), NodeKindOf(*s->resource));
    acc.Add(file, epoll, DynEdgeKind::kRegisteredIn, s->value, kUnitNs);
  }

  for (const auto& [futex, by_waker] : wakers) {
    auto it = waiters.find(futex);
    if (it == waiters.end()) continue;
    for (const auto& [waker, wakes] : by_waker) {
      for (const auto& [waiter, wait_ns] : it->second) {
        if (waker != waiter && wakes > 0 && wait_ns > 0) {
          acc.Add(waker, waiter, DynEdgeKind::kSchedules, wakes, kUnitCount);
        }
      }
    }
  }

  for (const DiscoveryEdge& e : discovered) {
    if (!e.is_external() || e.first_seen >= range.end_ns) continue;
    const std::string via = e.via.Key();
    auto traffic = socket_traffic.find(via);
    if (traffic == socket_traffic.end()) continue;
    const std::string ext = acc.Node(e.to_external, DynNodeKind::kExternal);
    acc.Add(via, ext, DynEdgeKind::kIoTo, traffic->second, kUnitCount);
  }
  return acc.Finish(range, options);
}

absl::StatusOr<ProcessGraph> BuildProcessGraph(const MetricStore& store,
                                               const std::optional<TimeRange>& range) {
  const TimestampNs until = range ? range->end_ns : INT64_MAX;
  PL_ASSIGN_OR_RETURN(std::vector<ProcessInfo> processes, store.LoadProcesses());
  PL_ASSIGN_OR_RETURN(std::vector<DiscoveryEdge> edges, store.LoadEdges());
  ProcessGraph g;
  for (const ProcessInfo& p : processes) {
    if (p.first_seen >= until) continue;
    g.nodes.push_back(ProcessNode{fmt::format("pid:{}", p.tgid), false, p.tgid, p.comm,
                                  p.parent_tgid, p.first_seen});
  }
  std::map<std::string, TimestampNs> externals;
  for (const DiscoveryEdge& e : edges) {
    if (e.first_seen >= until) continue;
    std::string to;
    if (e.is_external()) {
      to = e.to_external;
      auto [it, inserted] = externals.try_emplace(to, e.first_seen);
      if (!inserted) it->second = std::min(it->second, e.first_seen);
    } else {
      to = fmt::format("pid:{}", *e.to_tgid);
    }
    g.edges.push_back(
        ProcessEdge{fmt::format("pid:{}", e.from_tgid), std::move(to), e.via.Key(), e.first_seen});
  }
  for (const auto& [id, first_seen] : externals) {
    ProcessNode n;
    n.id = id;
    n.external = true;
    n.comm = id.substr(id.find(':') + 1);
    n.first_seen = first_seen;
    g.nodes.push_back(std::move(n));
  }
  return g;
}

nlohmann::ordered_json ToJson(const ThreadDynamicsGraph& graph) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const DynNode& n : graph.nodes) {
    nlohmann::ordered_json j = {{"id", n.id},
                                {"kind", DynNodeKindName(n.kind)},
                                {"alias", n.alias}};
    if (n.thread) {
      j["tid"] = n.thread->tid;
      j["tgid"] = n.thread->tgid;
      j["comm"] = n.thread->comm;
      j["label"] = fmt::format("{} ({} {})", n.alias, n.thread->comm, n.thread->tid);
    } else {
      j["label"] = fmt::format("{} ({})", n.alias, n.id);
    }
    nodes.push_back(std::move(j));
  }
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const DynEdge& e : graph.edges) {
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"kind", DynEdgeKindName(e.kind)},
                     {"weight", e.weight},
                     {"unit", e.unit}});
  }
  return {{"range", {{"start", graph.range.start_ns}, {"end", graph.range.end_ns}}},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

nlohmann::ordered_json ToJson(const ProcessGraph& graph) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const ProcessNode& n : graph.nodes) {
    nlohmann::ordered_json j = {{"id", n.id}, {"kind", n.external ? "external" : "process"}};
    if (!n.external) j["tgid"] = n.tgid;
    j["comm"] = n.comm;
    j["parent"] = n.parent_tgid ? nlohmann::ordered_json(fmt::format("pid:{}", *n.parent_tgid))
                                : nlohmann::ordered_json(nullptr);
    j["first_seen"] = n.first_seen;
    nodes.push_back(std::move(j));
  }
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const ProcessEdge& e : graph.edges) {
    edges.push_back(
        {{"from", e.from}, {"to", e.to}, {"via", e.via}, {"first_seen", e.first_seen}});
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

}  // namespace prismlike
