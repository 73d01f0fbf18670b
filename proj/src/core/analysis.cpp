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
#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "evaluation.hpp"

namespace shiftbench {

std::vector<double> nn_distances(const FeatureMatrix& query, const FeatureMatrix& reference) {
  if (reference.rows() == 0) fail(ErrorCode::kMissingInput, "nearest-neighbour search needs a nonempty reference");
  if (query.cols() != reference.cols())
    fail(ErrorCode::kShape, "query dimension " + std::to_string(query.cols()) +
                                " does not match reference dimension " +
                                std::to_string(reference.cols()));
  std::vector<double> out(query.rows());
  for (std::size_t i = 0; i < query.rows(); ++i) {
    auto q = query.row(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < reference.rows(); ++r) {
      auto ref = reference.row(r);
      double acc = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        double diff = static_cast<double>(q[j]) - ref[j];
        acc += diff * diff;
      }
      best = std::min(best, acc);
    }
    out[i] = std::sqrt(best);
  }
  return out;
}

DistanceBins bin_by_distance(std::span<const double> distances, std::span<const double> scores,
                             std::span<const double> id_scores, std::size_t bin_count) {
  if (bin_count == 0) fail(ErrorCode::kInvalidArgument, "bin count must be positive");
  if (distances.size() != scores.size())
    fail(ErrorCode::kShape, "distances and scores must be aligned");
  const std::size_t n = distances.size();
  if (bin_count > n)
    fail(ErrorCode::kInvalidArgument, "bin count " + std::to_string(bin_count) +
                                          " exceeds the " + std::to_string(n) + " examples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });

  DistanceBins out;
  out.bins.resize(bin_count);
  const std::size_t base = n / bin_count;
  const std::size_t extra = n % bin_count;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < bin_count; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    DistanceBin& bin = out.bins[b];
    bin.members.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                       order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
    double dist_sum = 0.0;
    std::vector<double> bin_scores;
    bin_scores.reserve(size);
    for (std::size_t idx : bin.members) {
      dist_sum += distances[idx];
      bin_scores.push_back(scores[idx]);
    }
    bin.mean_distance = dist_sum / static_cast<double>(size);
    bin.auroc = auroc(id_scores, bin_scores).auroc;
  }
  return out;
}

RegressionFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kShape, "regression inputs differ in length");
  RegressionFit fit;
  fit.n = x.size();
  if (fit.n <= 2) return fit;
  const double n = static_cast<double>(fit.n);
  double x_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    x_mean += x[i];
    y_mean += y[i];
  }
  x_mean /= n;
  y_mean /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    sxx += (x[i] - x_mean) * (x[i] - x_mean);
    sxy += (x[i] - x_mean) * (y[i] - y_mean);
  }
  if (!(sxx > 0.0)) return fit;

  fit.degenerate = false;
  fit.beta = sxy / sxx;
  fit.alpha = y_mean - fit.beta * x_mean;
  double ssr = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    double r = y[i] - (fit.alpha + fit.beta * x[i]);
    ssr += r * r;
  }
  const double s2 = ssr / (n - 2.0);
  fit.se_beta = std::sqrt(s2 / sxx);
  fit.se_alpha = std::sqrt(s2 * (1.0 / n + x_mean * x_mean / sxx));
  return fit;
}

CiComparison intercept_ci_overlap(const RegressionFit& a, const RegressionFit& b,
                                  double multiplier) {
  if (a.degenerate || b.degenerate)
    fail(ErrorCode::kNumerical, "confidence intervals need two nondegenerate fits");
  if (!(multiplier >= 0.0)) fail(ErrorCode::kInvalidArgument, "CI multiplier must be nonnegative");
  CiComparison c;
  c.interval_a = {a.alpha - multiplier * a.se_alpha, a.alpha + multiplier * a.se_alpha};
  c.interval_b = {b.alpha - multiplier * b.se_alpha, b.alpha + multiplier * b.se_alpha};
  c.overlap = c.interval_a.first <= c.interval_b.second && c.interval_b.first <= c.interval_a.second;
  return c;
}

}  // namespace shiftbench
