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

#include "tests/support/oracle.h"

#include <algorithm>
#include <optional>

#include "prismlike/core/strings.h"

namespace prismlike::testing {

namespace {

TimestampNs WindowOf(TimestampNs ts, DurationNs w) { return ts - ts % w; }

// Which pairing class an event belongs to, if any.
enum class Cls { kNone, kFutex, kVfs, kSock, kPoll, kEpoll };

struct Role {
  Cls cls = Cls::kNone;
  bool enter = false;
};

Role RoleOf(const EventKind& k) {
  if (std::holds_alternative<FutexEnter>(k)) return {Cls::kFutex, true};
  if (std::holds_alternative<FutexExit>(k)) return {Cls::kFutex, false};
  if (const auto* v = std::get_if<VfsAccess>(&k)) {
    if (v->file_kind != FileKind::kFifo || !v->blocking) return {};
    return {Cls::kVfs, v->enter};
  }
  if (const auto* s = std::get_if<SockAccess>(&k)) return {Cls::kSock, s->enter};
  if (std::holds_alternative<PollEnter>(k)) return {Cls::kPoll, true};
  if (std::holds_alternative<PollExit>(k)) return {Cls::kPoll, false};
  if (std::holds_alternative<EpollWaitEnter>(k)) return {Cls::kEpoll, true};
  if (std::holds_alternative<EpollWaitExit>(k)) return {Cls::kEpoll, false};
  return {};
}

bool IsSched(const EventKind& k) {
  return std::holds_alternative<SchedSwitchOut>(k) || std::holds_alternative<SchedSwitchIn>(k) ||
         std::holds_alternative<SchedWakeup>(k);
}

struct Interval {
  TimestampNs from;
  TimestampNs to;
};

DurationNs Overlap(Interval a, Interval b) {
  return std::max<DurationNs>(0, std::min(a.to, b.to) - std::max(a.from, b.from));
}

// Membership intervals of `target` in `epoll`'s interest list, rebuilt by
// replaying every EpollCtl in the trace.
std::vector<Interval> Membership(const std::vector<KernelEvent>& events, uint64_t epoll,
                                 const Bri& target, TimestampNs end) {
  std::vector<Interval> out;
  std::optional<TimestampNs> since;
  for (const auto& e : events) {
    const auto* ctl = std::get_if<EpollCtl>(&e.kind);
    if (ctl == nullptr || ctl->epoll.kaddr != epoll || ctl->target != target) continue;
    if (ctl->action == EpollAction::kInsert) {
      if (!since) since = e.ts;
    } else if (since) {
      out.push_back({*since, e.ts});
      since.reset();
    }
  }
  if (since) out.push_back({*since, end});
  return out;
}

std::set<Bri> EverRegistered(const std::vector<KernelEvent>& events, uint64_t epoll) {
  std::set<Bri> out;
  for (const auto& e : events) {
    const auto* ctl = std::get_if<EpollCtl>(&e.kind);
    if (ctl != nullptr && ctl->epoll.kaddr == epoll) out.insert(ctl->target);
  }
  return out;
}

void Add(OracleResult& r, OracleKey key, int64_t value, uint8_t access = kAccessNone) {
  if (value == 0 && access == kAccessNone) {
    r.values[key] += 0;
    return;
  }
  r.values[key] += value;
  r.access[key] |= access;
}

}  // namespace

OracleResult EvaluateOracle(const std::vector<KernelEvent>& events, DurationNs window_ns,
                            const std::function<bool(int32_t)>& monitored) {
  OracleResult r;
  if (events.empty()) return r;
  const TimestampNs stream_end = events.back().ts;
  for (TimestampNs w = WindowOf(events.front().ts, window_ns); w <= WindowOf(stream_end, window_ns);
       w += window_ns) {
    r.windows.insert(w);
  }
  auto is_monitored = [&](int32_t tgid) { return !monitored || monitored(tgid); };

  // comm is whatever the first event of the thread carried.
  std::map<int32_t, int32_t> tgid_of;
  for (const auto& e : events) tgid_of.try_emplace(e.thread.tid, e.thread.tgid);

  // --- scheduler states: build each thread's interval list, then intersect.
  for (const auto& [tid, tgid] : tgid_of) {
    if (!is_monitored(tgid)) continue;
    struct Seg {
      TimestampNs from;
      SchedState state;
      bool iowait;
    };
    std::vector<Seg> segs;  // open-ended; the next seg or a death closes it
    std::optional<SchedState> state;
    bool dead = false;
    std::vector<Interval> death;
    TimestampNs died_at = 0;
    for (const auto& e : events) {
      if (e.thread.tid != tid || !IsSched(e.kind)) continue;
      if (dead) continue;
      if (const auto* out = std::get_if<SchedSwitchOut>(&e.kind)) {
        if (out->exiting) {
          dead = true;
          died_at = e.ts;
          continue;
        }
        SchedState next =
            out->next_state == SchedState::kRunning ? SchedState::kRunnable : out->next_state;
        state = next;
        segs.push_back({e.ts, next, next == SchedState::kBlock && out->in_iowait});
      } else if (std::holds_alternative<SchedSwitchIn>(e.kind)) {
        if (!state || *state == SchedState::kRunning) continue;
        state = SchedState::kRunning;
        segs.push_back({e.ts, SchedState::kRunning, false});
      } else {
        if (state && *state != SchedState::kSleep && *state != SchedState::kBlock) continue;
        state = SchedState::kRunnable;
        segs.push_back({e.ts, SchedState::kRunnable, false});
      }
    }
    const TimestampNs life_end = dead ? died_at : stream_end;
    for (size_t i = 0; i < segs.size(); ++i) {
      Interval iv{segs[i].from, i + 1 < segs.size() ? segs[i + 1].from : life_end};
      iv.to = std::min(iv.to, life_end);
      for (TimestampNs w : r.windows) {
        DurationNs d = Overlap(iv, {w, w + window_ns});
        if (d == 0) continue;
        auto key = [&](MetricKind m) { return OracleKey{w, tid, m, "", ""}; };
        switch (segs[i].state) {
          case SchedState::kRunning:
            Add(r, key(MetricKind::kRuntime), d);
            break;
          case SchedState::kRunnable:
            Add(r, key(MetricKind::kRqTime), d);
            break;
          case SchedState::kSleep:
            Add(r, key(MetricKind::kSleepTime), d);
            break;
          case SchedState::kBlock:
            Add(r, key(MetricKind::kBlockTime), d);
            if (segs[i].iowait) Add(r, key(MetricKind::kIowaitTime), d);
            break;
        }
      }
    }
  }

  // --- waits: pair every exit with the closest earlier same-class event.
  for (size_t j = 0; j < events.size(); ++j) {
    const KernelEvent& exit = events[j];
    Role role = RoleOf(exit.kind);
    if (role.cls == Cls::kNone || role.enter || !is_monitored(exit.thread.tgid)) continue;
    std::optional<size_t> enter_idx;
    for (size_t i = j; i-- > 0;) {
      if (events[i].thread.tid != exit.thread.tid) continue;
      Role r2 = RoleOf(events[i].kind);
      if (r2.cls != role.cls) continue;
      if (r2.enter) enter_idx = i;
      break;
    }
    if (!enter_idx) continue;
    const KernelEvent& enter = events[*enter_idx];
    const int32_t tid = exit.thread.tid;
    const DurationNs d = exit.ts - enter.ts;
    const TimestampNs w = WindowOf(exit.ts, window_ns);
    auto key = [&](MetricKind m, const Bri& b) { return OracleKey{w, tid, m, b.Key(), ""}; };

    switch (role.cls) {
      case Cls::kFutex: {
        const auto& fe = std::get<FutexEnter>(enter.kind);
        Bri f = FutexAddr{fe.shared ? 0 : enter.thread.tgid, fe.uaddr, fe.shared};
        if (fe.op == FutexOp::kWait) {
          Add(r, key(MetricKind::kFutexWaitTime, f), d);
          Add(r, key(MetricKind::kFutexWaitCount, f), 1);
        } else if (std::get<FutexExit>(exit.kind).result > 0) {
          Add(r, key(MetricKind::kFutexWakeCount, f), 1);
        }
        break;
      }
      case Cls::kVfs: {
        const auto& ve = std::get<VfsAccess>(enter.kind);
        uint8_t acc = ve.dir == VfsDir::kRead ? kAccessRead : kAccessWrite;
        Add(r, key(MetricKind::kPipeWaitTime, Bri(ve.bri)), d, acc);
        Add(r, key(MetricKind::kPipeWaitCount, Bri(ve.bri)), 1, acc);
        break;
      }
      case Cls::kSock: {
        const auto& se = std::get<SockAccess>(enter.kind);
        uint8_t acc = se.dir == SockDir::kRecv ? kAccessRead : kAccessWrite;
        Add(r, key(MetricKind::kSocketWaitTime, Bri(se.bri)), d, acc);
        Add(r, key(MetricKind::kSocketWaitCount, Bri(se.bri)), 1, acc);
        break;
      }
      case Cls::kPoll: {
        const auto& px = std::get<PollExit>(exit.kind);
        std::set<Bri> set(px.bris.begin(), px.bris.end());
        if (set.empty()) {
          const auto& pe = std::get<PollEnter>(enter.kind);
          set.insert(pe.bris.begin(), pe.bris.end());
        }
        for (const Bri& b : set) {
          if (b.kind() == BriKind::kVfs) {
            Add(r, key(MetricKind::kPipeWaitTime, b), d);
            Add(r, key(MetricKind::kPipeWaitCount, b), 1);
          } else if (b.kind() == BriKind::kSocket) {
            Add(r, key(MetricKind::kSocketWaitTime, b), d);
            Add(r, key(MetricKind::kSocketWaitCount, b), 1);
          }
        }
        break;
      }
      case Cls::kEpoll: {
        const auto& ee = std::get<EpollWaitEnter>(enter.kind);
        Bri ep = ee.epoll;
        Add(r, key(MetricKind::kEpollWaitTime, ep), d);
        Add(r, key(MetricKind::kEpollWaitCount, ep), 1);
        for (const Bri& b : EverRegistered(events, ee.epoll.kaddr)) {
          DurationNs total = 0;
          for (Interval m : Membership(events, ee.epoll.kaddr, b, stream_end)) {
            total += Overlap({enter.ts, exit.ts}, m);
          }
          if (total > 0) Add(r, OracleKey{w, 0, MetricKind::kEpollFileWait, b.Key(), ep.Key()}, total);
        }
        break;
      }
      case Cls::kNone:
        break;
    }
  }

  // --- block requests.
  for (const auto& e : events) {
    const auto* rq = std::get_if<BlockRq>(&e.kind);
    if (rq == nullptr || rq->sectors <= 0) continue;
    int32_t tid = is_monitored(e.thread.tgid) ? e.thread.tid : 0;
    Add(r, OracleKey{WindowOf(e.ts, window_ns), tid, MetricKind::kSectorCount, Bri(rq->dev).Key(), ""},
        rq->sectors);
  }

  // Zero-valued entries are not reported.
  for (auto it = r.values.begin(); it != r.values.end();) {
    if (it->second == 0) {
      r.access.erase(it->first);
      it = r.values.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = r.access.begin(); it != r.access.end();) {
    it = it->second == kAccessNone ? r.access.erase(it) : std::next(it);
  }
  return r;
}

OracleResult FlattenSamples(const std::vector<MetricSample>& samples) {
  OracleResult r;
  for (const auto& s : samples) {
    OracleKey key{s.window.start_ns, s.thread ? s.thread->tid : 0, s.metric,
                  s.resource ? s.resource->Key() : "", s.subject ? s.subject->Key() : ""};
    r.values[key] += s.value;
    if (s.access != kAccessNone) r.access[key] |= s.access;
    r.windows.insert(s.window.start_ns);
  }
  return r;
}

std::string DescribeKey(const OracleKey& key) {
  const auto& [w, tid, metric, res, subj] = key;
  return StrCat("w=", w, " tid=", tid, " ", MetricName(metric), " res=", res,
                subj.empty() ? "" : " subj=", subj);
}

std::string DiffResults(const OracleResult& expected, const OracleResult& actual,
                        size_t max_lines) {
  std::string out;
  size_t lines = 0;
  auto note = [&](std::string line) {
    if (lines++ < max_lines) out += line + "\n";
  };
  for (const auto& [k, v] : expected.values) {
    auto it = actual.values.find(k);
    if (it == actual.values.end()) {
      note(StrCat("missing ", DescribeKey(k), " expected=", v));
    } else if (it->second != v) {
      note(StrCat("mismatch ", DescribeKey(k), " expected=", v, " actual=", it->second));
    }
  }
  for (const auto& [k, v] : actual.values) {
    if (!expected.values.contains(k)) note(StrCat("extra ", DescribeKey(k), " actual=", v));
  }
  for (const auto& [k, a] : expected.access) {
    auto it = actual.access.find(k);
    uint8_t got = it == actual.access.end() ? 0 : it->second;
    if (got != a) note(StrCat("access ", DescribeKey(k), " expected=", a, " actual=", got));
  }
  if (lines > max_lines) out += StrCat("... ", lines - max_lines, " more\n");
  return out;
}

}  // namespace prismlike::testing
