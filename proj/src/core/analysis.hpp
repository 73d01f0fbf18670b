/* Copyright 2026 The ShiftBench Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SHIFTBENCH_CORE_ANALYSIS_HPP_
#define SHIFTBENCH_CORE_ANALYSIS_HPP_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tensor_store.hpp"

namespace shiftbench {

/// Exact Euclidean distance from each query row to its nearest reference row.
std::vector<double> nn_distances(const FeatureMatrix& query, const FeatureMatrix& reference);

struct DistanceBin {
  std::vector<std::size_t> members;  // indices into the shift dataset
  double mean_distance = 0.0;
  double auroc = 0.0;  // full ID pool (positive) vs this bin (negative)
};

struct DistanceBins {
  std::vector<DistanceBin> bins;  // nondecreasing distance order
};

/// Sorts the shift examples by distance (ties by index) and cuts them into B
/// contiguous bins whose sizes differ by at most one; the first N mod B bins
/// take the extra element.
DistanceBins bin_by_distance(std::span<const double> distances, std::span<const double> scores,
                             std::span<const double> id_scores, std::size_t bin_count);

struct RegressionFit {
  bool degenerate = true;
  double beta = 0.0;
  double alpha = 0.0;
  double se_beta = 0.0;
  double se_alpha = 0.0;
  std::size_t n = 0;
};

/// Closed-form OLS of y on x with classical standard errors (n - 2 degrees
/// of freedom). Fewer than three points or constant x yields a fit marked
/// degenerate.
RegressionFit ols_fit(std::span<const double> x, std::span<const double> y);

struct CiComparison {
  std::pair<double, double> interval_a;
  std::pair<double, double> interval_b;
  bool overlap = false;
};

/// Intercept intervals alpha +/- multiplier * se_alpha and whether they
/// intersect (closed intervals).
CiComparison intercept_ci_overlap(const RegressionFit& a, const RegressionFit& b,
                                  double multiplier = 2.0);

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_ANALYSIS_HPP_
