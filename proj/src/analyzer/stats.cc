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


#include "prismlike/analyzer/stats.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace prismlike {

namespace {

constexpr size_t kExactMwuMax = 50;
constexpr int64_t kExactKsMaxProduct = 10000;

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased variance.
double Variance(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<double> Sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Ways to pick `n` of ranks 1..N with each rank sum, indexed by U = sum - n(n+1)/2.
std::vector<double> ExactUDistribution(size_t n, size_t m) {
  const size_t N = n + m;
  const size_t max_sum = n * N;
  std::vector<std::vector<double>> ways(n + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1;
  for (size_t rank = 1; rank <= N; ++rank) {
    for (size_t c = std::min(rank, n); c >= 1; --c) {
      for (size_t s = max_sum; s >= rank; --s) ways[c][s] += ways[c - 1][s - rank];
    }
  }
  const size_t offset = n * (n + 1) / 2;
  return std::vector<double>(ways[n].begin() + static_cast<std::ptrdiff_t>(offset),
                             ways[n].begin() + static_cast<std::ptrdiff_t>(offset + n * m + 1));
}

}  // namespace

TestResult MannWhitneyU(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n1 = a.size(), n2 = b.size();
  TestResult r;
  if (n1 == 0 || n2 == 0) return r;

  // Midranks over the pooled sample.
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n1 + n2);
  for (double x : a) pooled.emplace_back(x, 0);
  for (double x : b) pooled.emplace_back(x, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum_a = 0;
  double tie_term = 0;
  bool ties = false;
  for (size_t i = 0; i < pooled.size();) {
    size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const double t = static_cast<double>(j - i);
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    for (size_t k = i; k < j; ++k) {
      if (pooled[k].second == 0) rank_sum_a += midrank;
    }
    i = j;
  }
  const double d1 = static_cast<double>(n1), d2 = static_cast<double>(n2);
  const double u = rank_sum_a - d1 * (d1 + 1) / 2;
  r.statistic = u;

  if (!ties && n1 <= kExactMwuMax && n2 <= kExactMwuMax) {
    const std::vector<double> dist = ExactUDistribution(n1, n2);
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto ui = static_cast<size_t>(std::llround(u));
    double lower = 0, upper = 0;
    for (size_t k = 0; k < dist.size(); ++k) {
      if (k <= ui) lower += dist[k];
      if (k >= ui) upper += dist[k];
    }
    r.p_value = std::min(1.0, 2 * std::min(lower, upper) / total);
    r.exact = true;
    return r;
  }

  const double n = d1 + d2;
  const double var = d1 * d2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
  if (var <= 0) return r;
  const double dev = std::max(0.0, std::abs(u - d1 * d2 / 2) - 0.5);
  r.p_value = std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
  return r;
}

double KolmogorovSurvival(double x) {
  if (x <= 0) return 1;
  if (x < 1.18) {
    // Small-x form of the CDF, which converges quickly there.
    const double w = std::log(x);
    const double f = -M_PI * M_PI / (8 * x * x);
    double cdf = 0;
    for (int k = 1; k <= 7; k += 2) cdf += std::exp(f * k * k);
    cdf *= std::sqrt(2 * M_PI) * std::exp(-w);
    return std::clamp(1 - cdf, 0.0, 1.0);
  }
  double sum = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2 * sum, 0.0, 1.0);
}

TestResult KolmogorovSmirnov(const std::vector<double>& a, const std::vector<double>& b) {
  TestResult r;
  const auto n = static_cast<int64_t>(a.size()), m = static_cast<int64_t>(b.size());
  if (n == 0 || m == 0) return r;
  const std::vector<double> sa = Sorted(a), sb = Sorted(b);

  // D scaled by n*m so the lattice test below is exact integer arithmetic.
  int64_t i = 0, j = 0, d_scaled = 0;
  while (i < n && j < m) {
    const double x = std::min(sa[i], sb[j]);
    while (i < n && sa[i] == x) ++i;
    while (j < m && sb[j] == x) ++j;
    d_scaled = std::max(d_scaled, std::abs(i * m - j * n));
  }
  const double d = static_cast<double>(d_scaled) / static_cast<double>(n * m);
  r.statistic = d;
  if (d_scaled == 0) return r;

  if (n * m <= kExactKsMaxProduct) {
    // Probability that a uniformly random merge stays strictly inside the band.
    std::vector<double> row(m + 1, 0.0);
    for (int64_t jj = 0; jj <= m; ++jj) {
      row[jj] = (std::abs(jj * n) < d_scaled && (jj == 0 || row[jj - 1] > 0)) ? 1.0 : 0.0;
    }
    for (int64_t ii = 1; ii <= n; ++ii) {
      for (int64_t jj = 0; jj <= m; ++jj) {
        if (std::abs(ii * m - jj * n) >= d_scaled) {
          row[jj] = 0;
        } else if (jj > 0) {
          row[jj] += row[jj - 1];
        }
      }
    }
    double total = 1;
    for (int64_t k = 1; k <= n; ++k) {
      total = total * static_cast<double>(m + k) / static_cast<double>(k);
    }
    r.p_value = std::clamp(1 - row[m] / total, 0.0, 1.0);
    r.exact = true;
    return r;
  }
  const double en = std::sqrt(static_cast<double>(n * m) / static_cast<double>(n + m));
  r.p_value = KolmogorovSurvival((en + 0.12 + 0.11 / en) * d);
  return r;
}

double Wasserstein1(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return 0;
  const std::vector<double> sa = Sorted(a), sb = Sorted(b);
  const double n = static_cast<double>(sa.size()), m = static_cast<double>(sb.size());
  size_t i = 0, j = 0;
  double prev = std::min(sa[0], sb[0]);
  double area = 0;
  while (i < sa.size() || j < sb.size()) {
    const double x = j >= sb.size() || (i < sa.size() && sa[i] <= sb[j]) ? sa[i] : sb[j];
    area += std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m) * (x - prev);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    prev = x;
  }
  return area;
}

double CohensD(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return 0;
  const double ma = Mean(a), mb = Mean(b);
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double dof = n1 + n2 - 2;
  const double pooled =
      dof > 0 ? std::sqrt(((n1 - 1) * Variance(a, ma) + (n2 - 1) * Variance(b, mb)) / dof) : 0;
  if (pooled == 0) {
    if (ma == mb) return 0;
    return mb > ma ? kSaturatedEffect : -kSaturatedEffect;
  }
  return std::clamp((mb - ma) / pooled, -kSaturatedEffect, kSaturatedEffect);
}

std::string_view ShiftVerdictName(ShiftVerdict v) {
  switch (v) {
    case ShiftVerdict::kShift:
      return "shift";
    case ShiftVerdict::kNoShift:
      return "no_shift";
    case ShiftVerdict::kNotEnoughData:
      return "not_enough_data";
  }
  return "?";
}

ShiftOutcome DistributionShift(const std::vector<double>& baseline,
                               const std::vector<double>& compare, double alpha) {
  ShiftOutcome out;
  if (baseline.size() < kMinSamples || compare.size() < kMinSamples) return out;
  ShiftReport rep;
  rep.n_baseline = baseline.size();
  rep.n_compare = compare.size();
  rep.mean_baseline = Mean(baseline);
  rep.mean_compare = Mean(compare);
  rep.mwu_p = MannWhitneyU(baseline, compare).p_value;
  rep.ks_p = KolmogorovSmirnov(baseline, compare).p_value;
  rep.test = rep.ks_p < rep.mwu_p ? "ks" : "mwu";
  rep.p_value = std::min(rep.mwu_p, rep.ks_p);
  rep.wasserstein = Wasserstein1(baseline, compare);
  rep.cohens_d = CohensD(baseline, compare);
  rep.direction = rep.mean_compare > rep.mean_baseline   ? "increase"
                  : rep.mean_compare < rep.mean_baseline ? "decrease"
                                                         : "none";
  const bool flagged = rep.p_value < alpha && std::abs(rep.cohens_d) >= kMinEffect;
  out.verdict = flagged ? ShiftVerdict::kShift : ShiftVerdict::kNoShift;
  out.report = rep;
  return out;
}

std::optional<ChangePoint> FindChangePoint(const std::vector<double>& series,
                                           size_t min_segment) {
  min_segment = std::max<size_t>(min_segment, 2);
  const size_t n = series.size();
  if (n < 2 * min_segment) return std::nullopt;
  std::vector<double> sum(n + 1, 0), sq(n + 1, 0);
  for (size_t i = 0; i < n; ++i) {
    sum[i + 1] = sum[i] + series[i];
    sq[i + 1] = sq[i] + series[i] * series[i];
  }
  auto stats = [&](size_t from, size_t to) {
    const double k = static_cast<double>(to - from);
    const double mean = (sum[to] - sum[from]) / k;
    const double var = std::max(0.0, (sq[to] - sq[from] - k * mean * mean) / (k - 1));
    return std::pair(mean, var / k);
  };
  std::optional<ChangePoint> best;
  for (size_t k = min_segment; k + min_segment <= n; ++k) {
    const auto [m1, v1] = stats(0, k);
    const auto [m2, v2] = stats(k, n);
    const double denom = std::sqrt(v1 + v2);
    double t = 0;
    if (denom > 0) {
      t = (m2 - m1) / denom;
    } else if (m1 != m2) {
      t = m2 > m1 ? kSaturatedEffect : -kSaturatedEffect;
    }
    if (!best || std::abs(t) > std::abs(best->t_statistic)) best = ChangePoint{k, t};
  }
  return best;
}

}  // namespace prismlike
