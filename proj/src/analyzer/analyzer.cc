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


#include "prismlike/analyzer/analyzer.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <fmt/format.h>

#include "prismlike/core/status_macros.h"

namespace prismlike {

namespace {

constexpr MetricKind kSchedMetrics[] = {MetricKind::kRuntime, MetricKind::kRqTime,
                                        MetricKind::kBlockTime, MetricKind::kIowaitTime,
                                        MetricKind::kSleepTime};

bool ThreadScoped(MetricKind metric) { return InfoOf(metric).granularity == Granularity::kThread; }

std::vector<TimestampNs> WindowsIn(const std::vector<TimestampNs>& all, const TimeRange& r) {
  std::vector<TimestampNs> out;
  for (TimestampNs ts : all) {
    if (r.Contains(ts)) out.push_back(ts);
  }
  return out;
}

bool OptionalLess(const std::optional<Bri>& a, const std::optional<Bri>& b) { return a < b; }

bool ChainLess(const FlaggedMetric& a, const FlaggedMetric& b) {
  const auto ka = std::tuple(a.iteration, a.thread.tid, StageRank(a.key.metric), a.key.metric);
  const auto kb = std::tuple(b.iteration, b.thread.tid, StageRank(b.key.metric), b.key.metric);
  if (ka != kb) return ka < kb;
  if (a.key.resource != b.key.resource) return OptionalLess(a.key.resource, b.key.resource);
  return OptionalLess(a.key.subject, b.key.subject);
}

nlohmann::ordered_json ThreadJson(const ThreadRef& t) {
  return {{"tid", t.tid}, {"tgid", t.tgid}, {"comm", t.comm}};
}

nlohmann::ordered_json ThreadsJson(const std::vector<ThreadRef>& threads) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const ThreadRef& t : threads) out.push_back(ThreadJson(t));
  return out;
}

nlohmann::ordered_json OptionalKey(const std::optional<Bri>& bri) {
  return bri ? nlohmann::ordered_json(bri->Key()) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json RangeJson(const TimeRange& r) {
  return {{"start", r.start_ns}, {"end", r.end_ns}};
}

}  // namespace

int StageRank(MetricKind metric) {
  switch (metric) {
    case MetricKind::kEpollWaitTime:
    case MetricKind::kEpollWaitCount:
    case MetricKind::kEpollFileWait:
      return 0;
    case MetricKind::kBlockTime:
    case MetricKind::kIowaitTime:
    case MetricKind::kSectorCount:
      return 2;
    case MetricKind::kRuntime:
    case MetricKind::kRqTime:
    case MetricKind::kSleepTime:
      return 3;
    default:
      return 1;
  }
}

absl::StatusOr<SampleIndex> SampleIndex::Load(const MetricStore& store, const TimeRange& baseline,
                                              const TimeRange& compare) {
  SampleIndex index;
  PL_ASSIGN_OR_RETURN(std::vector<TimestampNs> windows, store.Windows());
  index.baseline_windows_ = WindowsIn(windows, baseline);
  index.compare_windows_ = WindowsIn(windows, compare);
  for (const bool is_compare : {false, true}) {
    const TimeRange& range = is_compare ? compare : baseline;
    if (range.empty()) continue;
    PL_ASSIGN_OR_RETURN(std::vector<MetricSample> samples, store.LoadSamples(range));
    for (const MetricSample& s : samples) {
      MetricKey key;
      key.metric = s.metric;
      if (!s.thread.has_value()) {
        if (s.metric != MetricKind::kEpollFileWait) continue;
        key.resource = s.resource;
        key.subject = s.subject;
        auto& keys = index.epoll_files_[*s.subject];
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
      } else {
        key.tid = s.thread->tid;
        index.threads_.try_emplace(s.thread->tid, *s.thread);
        if (!ThreadScoped(s.metric)) key.resource = s.resource;
        if (s.resource) index.touching_[*s.resource].insert(s.thread->tid);
        if (s.metric == MetricKind::kEpollWaitTime || s.metric == MetricKind::kEpollWaitCount) {
          index.epolls_of_[s.thread->tid].insert(*s.resource);
        }
      }
      Ranged& r = index.series_[key];
      (is_compare ? r.compare : r.baseline)[s.window.start_ns] += static_cast<double>(s.value);
    }
  }
  for (auto& [epoll, keys] : index.epoll_files_) std::sort(keys.begin(), keys.end());
  return index;
}

std::vector<MetricKey> SampleIndex::KeysFor(int32_t tid) const {
  std::vector<MetricKey> keys;
  for (MetricKind m : kSchedMetrics) keys.push_back(MetricKey{tid, m, std::nullopt, std::nullopt});
  for (auto it = series_.lower_bound(MetricKey{tid, MetricKind::kRuntime, {}, {}});
       it != series_.end() && it->first.tid == tid; ++it) {
    if (!ThreadScoped(it->first.metric)) keys.push_back(it->first);
  }
  if (auto it = epolls_of_.find(tid); it != epolls_of_.end()) {
    for (const Bri& epoll : it->second) {
      if (auto files = epoll_files_.find(epoll); files != epoll_files_.end()) {
        keys.insert(keys.end(), files->second.begin(), files->second.end());
      }
    }
  }
  return keys;
}

std::vector<double> SampleIndex::Series(const MetricKey& key, bool compare) const {
  auto it = series_.find(key);
  std::vector<double> out;
  if (ThreadScoped(key.metric)) {
    for (TimestampNs ts : compare ? compare_windows_ : baseline_windows_) {
      double v = 0;
      if (it != series_.end()) {
        const auto& m = compare ? it->second.compare : it->second.baseline;
        if (auto w = m.find(ts); w != m.end()) v = w->second;
      }
      out.push_back(v);
    }
    return out;
  }
  if (it == series_.end()) return out;
  for (const auto& [ts, v] : compare ? it->second.compare : it->second.baseline) out.push_back(v);
  return out;
}

std::set<int32_t> SampleIndex::EntryThreads(const std::set<int32_t>& tgids) const {
  std::set<int32_t> out;
  for (const auto& [key, ranged] : series_) {
    if (key.metric != MetricKind::kSocketWaitTime && key.metric != MetricKind::kSocketWaitCount) {
      continue;
    }
    if (!key.resource || !IsInetSocket(*key.resource)) continue;
    const ThreadRef& t = threads_.at(key.tid);
    if (!tgids.empty() && !tgids.count(t.tgid)) continue;
    auto nonzero = [](const std::map<TimestampNs, double>& m) {
      return std::any_of(m.begin(), m.end(), [](const auto& kv) { return kv.second != 0; });
    };
    if (nonzero(ranged.baseline) || nonzero(ranged.compare)) out.insert(key.tid);
  }
  return out;
}

std::set<int32_t> SampleIndex::ThreadsTouching(const Bri& bri) const {
  auto it = touching_.find(bri);
  return it == touching_.end() ? std::set<int32_t>{} : it->second;
}

absl::StatusOr<std::set<ThreadRef>> DetectEntryThreads(const MetricStore& store,
                                                       const TimeRange& range,
                                                       const std::set<int32_t>& tgids) {
  PL_ASSIGN_OR_RETURN(SampleIndex index, SampleIndex::Load(store, range, TimeRange{}));
  std::set<ThreadRef> out;
  for (int32_t tid : index.EntryThreads(tgids)) out.insert(index.threads().at(tid));
  return out;
}

absl::StatusOr<std::set<ThreadRef>> Counterparts(const MetricStore& store, const TimeRange& range,
                                                 const Bri& resource,
                                                 const std::set<int32_t>& excluding) {
  if (!IsIpcResource(resource)) {
    return absl::InvalidArgumentError(
        fmt::format("NotAnIpcResource: {} is a {} resource", resource.Key(),
                    BriKindName(resource.kind())));
  }
  PL_ASSIGN_OR_RETURN(SampleIndex index, SampleIndex::Load(store, range, TimeRange{}));
  std::set<ThreadRef> out;
  for (int32_t tid : index.ThreadsTouching(resource)) {
    if (!excluding.count(tid)) out.insert(index.threads().at(tid));
  }
  return out;
}

absl::Status ValidateDiagnosisRequest(const DiagnosisRequest& request) {
  if (request.baseline.empty()) {
    return absl::InvalidArgumentError("baseline range is empty or inverted");
  }
  if (request.compare.empty()) {
    return absl::InvalidArgumentError("compare range is empty or inverted");
  }
  if (!(request.alpha > 0 && request.alpha < 1)) {
    return absl::InvalidArgumentError("alpha must lie in (0, 1)");
  }
  return absl::OkStatus();
}

absl::StatusOr<DiagnosisReport> SelectiveThreadTracking(const MetricStore& store,
                                                        const DiagnosisRequest& request) {
  PL_RETURN_IF_ERROR(ValidateDiagnosisRequest(request));
  PL_ASSIGN_OR_RETURN(SampleIndex index,
                      SampleIndex::Load(store, request.baseline, request.compare));
  DiagnosisReport report;
  report.request = request;
  TrackingState& st = report.tracked;

  const std::set<int32_t> entry = index.EntryThreads(request.tgids);
  std::set<int32_t> tracked = entry;
  std::set<int32_t> seen;
  for (int32_t tid : entry) st.entry.push_back(index.threads().at(tid));

  while (true) {
    std::vector<int32_t> pending;
    std::set_difference(tracked.begin(), tracked.end(), seen.begin(), seen.end(),
                        std::back_inserter(pending));
    if (pending.empty()) break;
    std::set<int32_t> added;
    for (int32_t tid : pending) {
      seen.insert(tid);
      ++st.scans[tid];
      for (const MetricKey& key : index.KeysFor(tid)) {
        ++st.metric_tests;
        ShiftOutcome o =
            DistributionShift(index.Series(key, false), index.Series(key, true), request.alpha);
        if (o.verdict != ShiftVerdict::kShift) continue;
        FlaggedMetric flag{st.iterations, index.threads().at(tid), key, *o.report, {}};
        if (IsIpcMetric(key.metric) && key.resource && IsIpcResource(*key.resource)) {
          for (int32_t other : index.ThreadsTouching(*key.resource)) {
            if (other == tid) continue;
            flag.counterparts.push_back(other);
            if (!tracked.count(other)) added.insert(other);
          }
        }
        report.flagged_chain.push_back(std::move(flag));
      }
    }
    tracked.insert(added.begin(), added.end());
    ++st.iterations;
  }

  for (int32_t tid : tracked) st.tracked.push_back(index.threads().at(tid));
  for (int32_t tid : seen) st.seen.push_back(index.threads().at(tid));
  std::sort(report.flagged_chain.begin(), report.flagged_chain.end(), ChainLess);

  const bool beyond_entry =
      std::any_of(report.flagged_chain.begin(), report.flagged_chain.end(),
                  [&](const FlaggedMetric& f) { return !entry.count(f.thread.tid); });
  report.exhausted = !beyond_entry;
  if (entry.empty()) {
    report.hint = "no entry threads with inet socket activity; run full search";
  } else if (!beyond_entry) {
    report.hint = "no shift beyond the entry threads; consider full search";
  }
  return report;
}

absl::StatusOr<std::vector<FlaggedMetric>> FullSearch(const MetricStore& store,
                                                      const DiagnosisRequest& request) {
  PL_RETURN_IF_ERROR(ValidateDiagnosisRequest(request));
  PL_ASSIGN_OR_RETURN(SampleIndex index,
                      SampleIndex::Load(store, request.baseline, request.compare));
  std::vector<FlaggedMetric> flags;
  for (const auto& [tid, thread] : index.threads()) {
    if (!request.tgids.empty() && !request.tgids.count(thread.tgid)) continue;
    for (const MetricKey& key : index.KeysFor(tid)) {
      ShiftOutcome o =
          DistributionShift(index.Series(key, false), index.Series(key, true), request.alpha);
      if (o.verdict == ShiftVerdict::kShift) flags.push_back({0, thread, key, *o.report, {}});
    }
  }
  std::stable_sort(flags.begin(), flags.end(), [](const FlaggedMetric& a, const FlaggedMetric& b) {
    return std::abs(a.shift.cohens_d) > std::abs(b.shift.cohens_d);
  });
  return flags;
}

nlohmann::ordered_json ToJson(const ShiftReport& s) {
  return {{"test", s.test},
          {"p_value", s.p_value},
          {"mwu_p", s.mwu_p},
          {"ks_p", s.ks_p},
          {"wasserstein", s.wasserstein},
          {"cohens_d", s.cohens_d},
          {"direction", s.direction},
          {"n_baseline", s.n_baseline},
          {"n_compare", s.n_compare},
          {"mean_baseline", s.mean_baseline},
          {"mean_compare", s.mean_compare}};
}

nlohmann::ordered_json ToJson(const FlaggedMetric& f) {
  return {{"iteration", f.iteration},
          {"thread", ThreadJson(f.thread)},
          {"metric", MetricName(f.key.metric)},
          {"resource", OptionalKey(f.key.resource)},
          {"subject", OptionalKey(f.key.subject)},
          {"stage", StageRank(f.key.metric)},
          {"counterparts", f.counterparts},
          {"shift", ToJson(f.shift)}};
}

nlohmann::ordered_json ToJson(const DiagnosisReport& r) {
  nlohmann::ordered_json chain = nlohmann::ordered_json::array();
  nlohmann::ordered_json flagged = nlohmann::ordered_json::array();
  for (const FlaggedMetric& f : r.flagged_chain) {
    chain.push_back(ToJson(f));
    flagged.push_back({{"tid", f.thread.tid},
                       {"metric", MetricName(f.key.metric)},
                       {"resource", OptionalKey(f.key.resource)}});
  }
  return {{"request",
           {{"baseline", RangeJson(r.request.baseline)},
            {"compare", RangeJson(r.request.compare)},
            {"tgids", r.request.tgids},
            {"alpha", r.request.alpha}}},
          {"tracked",
           {{"T_entry", ThreadsJson(r.tracked.entry)},
            {"T_track", ThreadsJson(r.tracked.tracked)},
            {"T_seen", ThreadsJson(r.tracked.seen)},
            {"M_flagged", std::move(flagged)},
            {"iterations", r.tracked.iterations},
            {"metric_tests", r.tracked.metric_tests}}},
          {"flagged_chain", std::move(chain)},
          {"exhausted", r.exhausted},
          {"hint", r.hint}};
}

}  // namespace prismlike
