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


#include "tests/support/stats_oracle.h"

#include <algorithm>
#include <cmath>

namespace prismlike::testing {

std::vector<double> Normals(std::mt19937_64& rng, size_t n, double mean, double sd) {
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  std::vector<double> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back(mean + sd * std::sqrt(-2 * std::log(uniform())) * std::cos(2 * M_PI * uniform()));
  }
  return out;
}

// U for `a` by counting pairs.
double BruteU(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

// Rank-sum oracle: midranks over the pooled sample, then the tie-corrected
// normal approximation with continuity correction.
double RankSumNormalP(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  auto midrank = [&](double x) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    return (static_cast<double>(lo + 1) + static_cast<double>(hi)) / 2;
  };
  double w = 0;
  for (double x : a) w += midrank(x);
  const double n1 = a.size(), n2 = b.size(), n = n1 + n2;
  double ties = 0;
  for (size_t i = 0; i < sorted.size();) {
    size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = j - i;
    ties += t * t * t - t;
    i = j;
  }
  const double u = w - n1 * (n1 + 1) / 2;
  const double sd = std::sqrt(n1 * n2 / 12 * ((n + 1) - ties / (n * (n - 1))));
  const double z = std::max(0.0, std::abs(u - n1 * n2 / 2) - 0.5) / sd;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

namespace {

// Calls fn(mask) for every way to assign n1 of the n1+n2 pooled positions to
// the first sample.
template <typename Fn>
void ForEachSplit(size_t n1, size_t n2, Fn fn) {
  std::vector<bool> mask(n1 + n2, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n1), true);
  std::sort(mask.begin(), mask.end());
  do {
    fn(mask);
  } while (std::next_permutation(mask.begin(), mask.end()));
}

}  // namespace

// Exact two-sided permutation p-value of U on tie-free data.
double PermutationMwuP(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double mu = a.size() * b.size() / 2.0;
  const double observed = std::abs(BruteU(a, b) - mu);
  int64_t extreme = 0, total = 0;
  ForEachSplit(a.size(), b.size(), [&](const std::vector<bool>& mask) {
    std::vector<double> x, y;
    for (size_t i = 0; i < pooled.size(); ++i) (mask[i] ? x : y).push_back(pooled[i]);
    if (std::abs(BruteU(x, y) - mu) >= observed - 1e-9) ++extreme;
    ++total;
  });
  return static_cast<double>(extreme) / static_cast<double>(total);
}

double BruteKsD(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double d = 0;
  for (double x : pts) {
    const double fa = std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; });
    const double fb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; });
    d = std::max(d, std::abs(fa / a.size() - fb / b.size()));
  }
  return d;
}

double PermutationKsP(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double observed = BruteKsD(a, b);
  int64_t extreme = 0, total = 0;
  ForEachSplit(a.size(), b.size(), [&](const std::vector<bool>& mask) {
    std::vector<double> x, y;
    for (size_t i = 0; i < pooled.size(); ++i) (mask[i] ? x : y).push_back(pooled[i]);
    if (BruteKsD(x, y) >= observed - 1e-12) ++extreme;
    ++total;
  });
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace prismlike::testing
