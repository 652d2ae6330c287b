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

#include "prismlike/engine/metric_engine.h"

#include <algorithm>

#include <absl/strings/str_cat.h>

namespace prismlike {

namespace {

constexpr size_t kRuntimeSlot = 0;
constexpr size_t kRqSlot = 1;
constexpr size_t kBlockSlot = 2;
constexpr size_t kIowaitSlot = 3;
constexpr size_t kSleepSlot = 4;

constexpr std::array<MetricKind, 5> kSchedMetrics = {
    MetricKind::kRuntime, MetricKind::kRqTime, MetricKind::kBlockTime, MetricKind::kIowaitTime,
    MetricKind::kSleepTime};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

MetricEngine::MetricEngine(DurationNs window_ns) : window_ns_(window_ns) {}

MetricEngine::ThreadState& MetricEngine::ThreadFor(const ThreadRef& ref) {
  auto [it, inserted] = threads_.try_emplace(ref.tid);
  if (inserted) {
    // comm is fixed at first sight.
    it->second.ref = ref;
    if (it->second.ref.comm.size() > kMaxCommLen) it->second.ref.comm.resize(kMaxCommLen);
  }
  return it->second;
}

void MetricEngine::AccrueSched(ThreadState& t, TimestampNs until) {
  if (!t.sched.has_value() || until <= t.since) return;
  DurationNs d = until - t.since;
  switch (*t.sched) {
    case SchedState::kRunning:
      t.sched_acc[kRuntimeSlot] += d;
      break;
    case SchedState::kRunnable:
      t.sched_acc[kRqSlot] += d;
      break;
    case SchedState::kBlock:
      t.sched_acc[kBlockSlot] += d;
      if (t.iowait) t.sched_acc[kIowaitSlot] += d;
      break;
    case SchedState::kSleep:
      t.sched_acc[kSleepSlot] += d;
      break;
  }
  t.since = until;
}

void MetricEngine::OnSchedSwitchOut(ThreadState& t, TimestampNs ts, const SchedSwitchOut& e) {
  if (t.dead) {
    ++diag_.orphans;
    return;
  }
  AccrueSched(t, ts);
  if (e.exiting) {
    t.dead = true;
    t.sched.reset();
    return;
  }
  // A task switched out while still TASK_RUNNING was preempted.
  SchedState next = e.next_state == SchedState::kRunning ? SchedState::kRunnable : e.next_state;
  t.sched = next;
  t.iowait = next == SchedState::kBlock && e.in_iowait;
  t.since = ts;
}

void MetricEngine::OnSchedSwitchIn(ThreadState& t, TimestampNs ts) {
  if (t.dead || !t.sched.has_value() || *t.sched == SchedState::kRunning) {
    ++diag_.orphans;
    return;
  }
  AccrueSched(t, ts);
  t.sched = SchedState::kRunning;
  t.iowait = false;
  t.since = ts;
}

void MetricEngine::OnSchedWakeup(ThreadState& t, TimestampNs ts) {
  if (t.dead) return;
  if (t.sched.has_value() && *t.sched != SchedState::kSleep && *t.sched != SchedState::kBlock) {
    return;
  }
  AccrueSched(t, ts);
  t.sched = SchedState::kRunnable;
  t.iowait = false;
  t.since = ts;
}

void MetricEngine::Open(std::optional<OpenWait>& slot, OpenWait wait) {
  if (slot.has_value()) ++diag_.replaced_enters;
  slot = std::move(wait);
}

void MetricEngine::CompleteWait(ThreadState& t, WaitClass cls, const Bri& bri, DurationNs d,
                                uint8_t access) {
  WaitAcc& acc = waits_[{t.ref.tid, cls, bri}];
  acc.time += d;
  acc.count += 1;
  acc.access |= access;
  acc.last = last_ts_.value_or(0);
}

void MetricEngine::OnEpollCtl(TimestampNs ts, const EpollCtl& e) {
  auto& members = interest_[e.epoll];
  if (e.action == EpollAction::kInsert) {
    members.try_emplace(e.target, ts);
    return;
  }
  auto it = members.find(e.target);
  if (it == members.end()) return;
  // Waiters in flight keep the time the BRI was registered during their wait.
  for (int32_t tid : epoll_waiters_[e.epoll]) {
    auto& wait = threads_.at(tid).epoll;
    TimestampNs from = std::max(wait->started, it->second);
    if (ts > from) wait->epoll_partial[e.target] += ts - from;
  }
  members.erase(it);
}

void MetricEngine::OnEpollWaitExit(ThreadState& t, TimestampNs ts) {
  OpenWait wait = std::move(*t.epoll);
  t.epoll.reset();
  const Bri& epoll_bri = *wait.resource;
  const EpollObj epoll = *epoll_bri.get_if<EpollObj>();

  auto& waiters = epoll_waiters_[epoll];
  waiters.erase(std::remove(waiters.begin(), waiters.end(), t.ref.tid), waiters.end());

  CompleteWait(t, WaitClass::kEpoll, epoll_bri, ts - wait.started, kAccessNone);

  std::map<Bri, DurationNs> file_wait = std::move(wait.epoll_partial);
  for (const auto& [bri, inserted] : interest_[epoll]) {
    TimestampNs from = std::max(wait.started, inserted);
    if (ts > from) file_wait[bri] += ts - from;
  }
  for (const auto& [bri, d] : file_wait) {
    if (d > 0) epoll_file_[{epoll_bri, bri}] += d;
  }
}

absl::Status MetricEngine::AdvanceTo(TimestampNs ts) {
  if (last_ts_.has_value() && ts < *last_ts_) {
    return absl::FailedPreconditionError(
        absl::StrCat("OrderViolation: ts ", ts, " precedes previous ts ", *last_ts_));
  }
  last_ts_ = ts;
  if (!current_.has_value()) {
    current_ = WindowContaining(ts, window_ns_);
    return absl::OkStatus();
  }
  while (ts >= current_->end_ns) {
    CloseWindow(current_->end_ns);
    current_ = TimeWindow{current_->end_ns, current_->end_ns + window_ns_};
  }
  return absl::OkStatus();
}

absl::Status MetricEngine::Observe(const KernelEvent& event) {
  if (event.thread.tid <= 0 || event.thread.tgid <= 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("event with invalid thread tid=", event.thread.tid,
                     " tgid=", event.thread.tgid));
  }
  if (auto s = AdvanceTo(event.ts); !s.ok()) return s;
  ++diag_.events;

  const TimestampNs ts = event.ts;
  const bool monitored = !monitor_filter_ || monitor_filter_(event.thread.tgid);

  // Interest lists and device totals are global kernel state.
  if (const auto* ctl = std::get_if<EpollCtl>(&event.kind)) {
    OnEpollCtl(ts, *ctl);
    if (!monitored) ++diag_.filtered;
    return absl::OkStatus();
  }
  if (const auto* rq = std::get_if<BlockRq>(&event.kind)) {
    if (rq->sectors <= 0) return absl::OkStatus();
    if (monitored) {
      ThreadState& t = ThreadFor(event.thread);
      CountAcc& acc = sectors_[{t.ref.tid, Bri(rq->dev)}];
      acc.value += rq->sectors;
      acc.last = ts;
    } else {
      ++diag_.filtered;
      unattributed_sectors_[Bri(rq->dev)] += rq->sectors;
    }
    return absl::OkStatus();
  }
  if (!monitored) {
    ++diag_.filtered;
    return absl::OkStatus();
  }

  ThreadState& t = ThreadFor(event.thread);
  std::visit(
      Overloaded{
          [&](const SchedSwitchOut& e) { OnSchedSwitchOut(t, ts, e); },
          [&](const SchedSwitchIn&) { OnSchedSwitchIn(t, ts); },
          [&](const SchedWakeup&) { OnSchedWakeup(t, ts); },
          [&](const FutexEnter& e) {
            OpenWait w;
            w.started = ts;
            w.resource = Bri(FutexAddr{e.shared ? 0 : t.ref.tgid, e.uaddr, e.shared});
            w.futex_op = e.op;
            Open(t.futex, std::move(w));
          },
          [&](const FutexExit& e) {
            if (!t.futex.has_value()) {
              ++diag_.orphans;
              return;
            }
            OpenWait w = std::move(*t.futex);
            t.futex.reset();
            if (w.futex_op == FutexOp::kWait) {
              CompleteWait(t, WaitClass::kFutex, *w.resource, ts - w.started, kAccessNone);
            } else if (e.result > 0) {
              // Only wakes that released at least one waiter count.
              CountAcc& acc = futex_wakes_[{t.ref.tid, *w.resource}];
              acc.value += 1;
              acc.last = ts;
            }
          },
          [&](const VfsAccess& e) {
            if (e.file_kind != FileKind::kFifo || !e.blocking) return;
            if (e.enter) {
              OpenWait w;
              w.started = ts;
              w.resource = Bri(e.bri);
              w.access = e.dir == VfsDir::kRead ? kAccessRead : kAccessWrite;
              Open(t.vfs, std::move(w));
              return;
            }
            if (!t.vfs.has_value()) {
              ++diag_.orphans;
              return;
            }
            OpenWait w = std::move(*t.vfs);
            t.vfs.reset();
            CompleteWait(t, WaitClass::kPipe, *w.resource, ts - w.started, w.access);
          },
          [&](const SockAccess& e) {
            if (e.enter) {
              OpenWait w;
              w.started = ts;
              w.resource = Bri(e.bri);
              w.access = e.dir == SockDir::kRecv ? kAccessRead : kAccessWrite;
              Open(t.sock, std::move(w));
              return;
            }
            if (!t.sock.has_value()) {
              ++diag_.orphans;
              return;
            }
            OpenWait w = std::move(*t.sock);
            t.sock.reset();
            CompleteWait(t, WaitClass::kSocket, *w.resource, ts - w.started, w.access);
          },
          [&](const PollEnter& e) {
            OpenWait w;
            w.started = ts;
            w.poll_set = e.bris;
            Open(t.poll, std::move(w));
          },
          [&](const PollExit& e) {
            if (!t.poll.has_value()) {
              ++diag_.orphans;
              return;
            }
            OpenWait w = std::move(*t.poll);
            t.poll.reset();
            std::vector<Bri> set = e.bris.empty() ? std::move(w.poll_set) : e.bris;
            std::sort(set.begin(), set.end());
            set.erase(std::unique(set.begin(), set.end()), set.end());
            // One select/poll call waits on every registered BRI at once.
            for (const Bri& bri : set) {
              if (bri.kind() == BriKind::kVfs) {
                CompleteWait(t, WaitClass::kPipe, bri, ts - w.started, kAccessNone);
              } else if (bri.kind() == BriKind::kSocket) {
                CompleteWait(t, WaitClass::kSocket, bri, ts - w.started, kAccessNone);
              }
            }
          },
          [&](const EpollWaitEnter& e) {
            if (t.epoll.has_value()) {
              auto& waiters = epoll_waiters_[*t.epoll->resource->get_if<EpollObj>()];
              waiters.erase(std::remove(waiters.begin(), waiters.end(), t.ref.tid),
                            waiters.end());
            }
            OpenWait w;
            w.started = ts;
            w.resource = Bri(e.epoll);
            Open(t.epoll, std::move(w));
            epoll_waiters_[e.epoll].push_back(t.ref.tid);
          },
          [&](const EpollWaitExit&) {
            if (!t.epoll.has_value()) {
              ++diag_.orphans;
              return;
            }
            OnEpollWaitExit(t, ts);
          },
          [](const EpollCtl&) {},
          [](const BlockRq&) {},
      },
      event.kind);
  return absl::OkStatus();
}

void MetricEngine::CloseWindow(TimestampNs accrue_until) {
  const TimeWindow window = *current_;
  WindowSamples out;
  out.window = window;

  std::vector<int32_t> tids;
  tids.reserve(threads_.size());
  for (auto& [tid, t] : threads_) {
    AccrueSched(t, std::min(accrue_until, window.end_ns));
    tids.push_back(tid);
  }
  std::sort(tids.begin(), tids.end());
  EnforceBriBound();

  auto push = [&](std::optional<ThreadRef> thread, MetricKind metric, std::optional<Bri> resource,
                  int64_t value, uint8_t access = kAccessNone,
                  std::optional<Bri> subject = std::nullopt) {
    if (value == 0) return;
    MetricSample s;
    s.window = window;
    s.thread = std::move(thread);
    s.metric = metric;
    s.resource = std::move(resource);
    s.subject = std::move(subject);
    s.access = access;
    s.value = value;
    out.samples.push_back(std::move(s));
  };

  for (int32_t tid : tids) {
    ThreadState& t = threads_.at(tid);
    for (size_t i = 0; i < kSchedMetrics.size(); ++i) {
      push(t.ref, kSchedMetrics[i], std::nullopt, t.sched_acc[i]);
    }
    t.sched_acc.fill(0);
  }

  for (const auto& [key, acc] : waits_) {
    const auto& [tid, cls, bri] = key;
    const ThreadRef& ref = threads_.at(tid).ref;
    switch (cls) {
      case WaitClass::kPipe:
        push(ref, MetricKind::kPipeWaitTime, bri, acc.time, acc.access);
        push(ref, MetricKind::kPipeWaitCount, bri, acc.count, acc.access);
        break;
      case WaitClass::kSocket:
        push(ref, MetricKind::kSocketWaitTime, bri, acc.time, acc.access);
        push(ref, MetricKind::kSocketWaitCount, bri, acc.count, acc.access);
        break;
      case WaitClass::kFutex:
        push(ref, MetricKind::kFutexWaitTime, bri, acc.time);
        push(ref, MetricKind::kFutexWaitCount, bri, acc.count);
        break;
      case WaitClass::kEpoll:
        push(ref, MetricKind::kEpollWaitTime, bri, acc.time);
        push(ref, MetricKind::kEpollWaitCount, bri, acc.count);
        break;
    }
  }
  for (const auto& [key, acc] : futex_wakes_) {
    push(threads_.at(key.first).ref, MetricKind::kFutexWakeCount, key.second, acc.value);
  }
  for (const auto& [key, acc] : sectors_) {
    push(threads_.at(key.first).ref, MetricKind::kSectorCount, key.second, acc.value);
  }
  for (const auto& [dev, sectors] : unattributed_sectors_) {
    push(std::nullopt, MetricKind::kSectorCount, dev, sectors);
  }
  for (const auto& [key, d] : epoll_file_) {
    push(std::nullopt, MetricKind::kEpollFileWait, key.second, d, kAccessNone, key.first);
  }

  waits_.clear();
  futex_wakes_.clear();
  sectors_.clear();
  unattributed_sectors_.clear();
  epoll_file_.clear();
  closed_.push_back(std::move(out));
}

void MetricEngine::EnforceBriBound() {
  std::map<int32_t, std::map<Bri, TimestampNs>> recency;
  auto touch = [&](int32_t tid, const Bri& bri, TimestampNs last) {
    TimestampNs& slot = recency[tid][bri];
    slot = std::max(slot, last);
  };
  for (const auto& [key, acc] : waits_) touch(std::get<0>(key), std::get<2>(key), acc.last);
  for (const auto& [key, acc] : futex_wakes_) touch(key.first, key.second, acc.last);
  for (const auto& [key, acc] : sectors_) touch(key.first, key.second, acc.last);

  for (const auto& [tid, bris] : recency) {
    if (bris.size() <= max_bris_) continue;
    std::vector<std::pair<TimestampNs, Bri>> order;
    for (const auto& [bri, last] : bris) order.emplace_back(last, bri);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (size_t i = max_bris_; i < order.size(); ++i) {
      const Bri& bri = order[i].second;
      for (WaitClass cls : {WaitClass::kPipe, WaitClass::kSocket, WaitClass::kFutex,
                            WaitClass::kEpoll}) {
        waits_.erase({tid, cls, bri});
      }
      futex_wakes_.erase({tid, bri});
      sectors_.erase({tid, bri});
      ++diag_.evicted_bris;
    }
  }
}

void MetricEngine::Finish(TimestampNs end_ts) {
  if (!current_.has_value()) return;
  end_ts = std::max(end_ts, last_ts_.value_or(end_ts));
  while (end_ts > current_->end_ns) {
    CloseWindow(current_->end_ns);
    current_ = TimeWindow{current_->end_ns, current_->end_ns + window_ns_};
  }
  CloseWindow(end_ts);
  current_.reset();
  last_ts_ = end_ts;
}

std::vector<WindowSamples> MetricEngine::TakeClosedWindows() {
  std::vector<WindowSamples> out;
  out.swap(closed_);
  return out;
}

}  // namespace prismlike
