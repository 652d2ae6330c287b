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

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace prismlike {

struct TestResult {
  double statistic = 0;
  double p_value = 1;
  bool exact = false;
};

// Two-sided Mann-Whitney U. The statistic is U for the first sample. Exact
// null distribution for small tie-free samples, otherwise the normal
// approximation with tie and continuity corrections.
TestResult MannWhitneyU(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided two-sample Kolmogorov-Smirnov on the sup distance D. Exact
// lattice-path probability for small samples, otherwise the asymptotic
// Kolmogorov distribution.
TestResult KolmogorovSmirnov(const std::vector<double>& a, const std::vector<double>& b);

// First Wasserstein distance between the two empirical distributions.
double Wasserstein1(const std::vector<double>& a, const std::vector<double>& b);

// (mean(b) - mean(a)) / pooled sd. Saturates at +/-kSaturatedEffect when both
// samples are constant and differ.
double CohensD(const std::vector<double>& a, const std::vector<double>& b);
inline constexpr double kSaturatedEffect = 1e6;

// P(K > x) for the Kolmogorov distribution.
double KolmogorovSurvival(double x);

inline constexpr size_t kMinSamples = 5;
inline constexpr double kDefaultAlpha = 0.01;
inline constexpr double kMinEffect = 0.5;

enum class ShiftVerdict : uint8_t { kShift, kNoShift, kNotEnoughData };
std::string_view ShiftVerdictName(ShiftVerdict v);

struct ShiftReport {
  // The test that produced the smaller p-value: "mwu" or "ks".
  std::string_view test;
  double p_value = 1;
  double mwu_p = 1;
  double ks_p = 1;
  double wasserstein = 0;
  double cohens_d = 0;
  // "increase", "decrease" or "none".
  std::string_view direction;
  size_t n_baseline = 0;
  size_t n_compare = 0;
  double mean_baseline = 0;
  double mean_compare = 0;
};

struct ShiftOutcome {
  ShiftVerdict verdict = ShiftVerdict::kNotEnoughData;
  // Filled whenever both samples are large enough.
  std::optional<ShiftReport> report;
};

// Flags a shift when min(p_mwu, p_ks) < alpha and |cohens_d| >= kMinEffect.
ShiftOutcome DistributionShift(const std::vector<double>& baseline,
                               const std::vector<double>& compare, double alpha = kDefaultAlpha);

struct ChangePoint {
  // First index of the second segment.
  size_t index = 0;
  double t_statistic = 0;
};

// Single mean-shift change point maximizing Welch's t between the two
// segments, each at least `min_segment` long.
std::optional<ChangePoint> FindChangePoint(const std::vector<double>& series,
                                           size_t min_segment = kMinSamples);

}  // namespace prismlike
