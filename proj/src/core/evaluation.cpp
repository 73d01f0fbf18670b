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
#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"

namespace shiftbench {

namespace {

void require_no_nan(std::span<const double> v, const char* what) {
  for (double x : v)
    if (std::isnan(x)) fail(ErrorCode::kValidation, std::string(what) + " contains NaN");
}

std::vector<double> select(std::span<const double> values, const std::vector<bool>& mask,
                           bool keep) {
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i] == keep) out.push_back(values[i]);
  return out;
}

}  // namespace

AurocResult auroc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty())
    fail(ErrorCode::kUndefinedMetric, "AUROC is undefined for an empty pool");
  require_no_nan(pos, "positive scores");
  require_no_nan(neg, "negative scores");

  struct Entry {
    double value;
    bool positive;
  };
  std::vector<Entry> all;
  all.reserve(pos.size() + neg.size());
  for (double v : pos) all.push_back({v, true});
  for (double v : neg) all.push_back({v, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  // Doubled ranks keep every quantity integral: a tie group occupying sorted
  // positions [i, j) has average 1-based rank (i + 1 + j) / 2.
  std::int64_t doubled_rank_sum = 0;
  std::int64_t tied_pairs = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::int64_t group_pos = 0;
    std::int64_t group_neg = 0;
    while (j < all.size() && all[j].value == all[i].value) {
      (all[j].positive ? group_pos : group_neg) += 1;
      ++j;
    }
    doubled_rank_sum += group_pos * static_cast<std::int64_t>(i + j + 1);
    tied_pairs += group_pos * group_neg;
    i = j;
  }
  const auto n = static_cast<std::int64_t>(pos.size());
  const auto m = static_cast<std::int64_t>(neg.size());
  AurocResult r;
  r.n_id = pos.size();
  r.n_ood = neg.size();
  r.doubled_wins = doubled_rank_sum - n * (n + 1);
  const double pairs = static_cast<double>(n) * static_cast<double>(m);
  r.auroc = static_cast<double>(r.doubled_wins) / (2.0 * pairs);
  r.tie_mass = static_cast<double>(tied_pairs) / pairs;
  return r;
}

double mean_auroc(std::span<const double> per_model) {
  if (per_model.empty()) fail(ErrorCode::kUndefinedMetric, "mean of zero AUROC values");
  double sum = 0.0;
  for (double v : per_model) sum += v;
  return sum / static_cast<double>(per_model.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    double rank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

const char* goal_name(Goal goal) noexcept {
  return goal == Goal::kNewClass ? "new_class" : "failure";
}

std::optional<Goal> parse_goal(std::string_view name) noexcept {
  if (name == "new_class") return Goal::kNewClass;
  if (name == "failure") return Goal::kFailure;
  return std::nullopt;
}

EvaluationFrame build_frame(Goal goal, std::span<const ScoredBundle> sources) {
  EvaluationFrame frame;
  frame.goal = goal;
  bool mask_available = true;
  std::vector<bool> mask;

  for (const ScoredBundle& src : sources) {
    if (src.bundle == nullptr || src.scores == nullptr)
      fail(ErrorCode::kInvalidArgument, "build_frame: null source");
    const DatasetBundle& b = *src.bundle;
    const auto& scores = src.scores->values;
    const std::string who = "bundle '" + b.name + "': ";
    if (scores.size() != b.rows())
      fail(ErrorCode::kShape, who + "score vector length " + std::to_string(scores.size()) +
                                  " does not match " + std::to_string(b.rows()) + " rows");

    if (b.role == Role::kReferenceEmbedding)
      fail(ErrorCode::kInvalidArgument, who + "reference embeddings cannot enter a frame");

    if (b.role == Role::kSemanticShift) {
      if (b.labels) {
        for (std::size_t i = 0; i < b.labels->size(); ++i)
          if ((*b.labels)[i] != kNoLabel)
            fail(ErrorCode::kContamination,
                 who + "semantic-shift example " + std::to_string(i) + " carries class label " +
                     std::to_string((*b.labels)[i]));
      }
      frame.ood_scores.insert(frame.ood_scores.end(), scores.begin(), scores.end());
      continue;
    }

    // ID side: train_id, test_id or covariate_shift.
    const bool labeled = b.labels && b.logits &&
                         std::none_of(b.labels->values().begin(), b.labels->values().end(),
                                      [](std::int32_t v) { return v == kNoLabel; });
    if (goal == Goal::kFailure) {
      if (!b.labels) fail(ErrorCode::kMissingInput, who + "labels required for failure detection");
      if (!b.logits) fail(ErrorCode::kMissingInput, who + "logits required for failure detection");
      if (!labeled)
        fail(ErrorCode::kMissingInput, who + "labels required for failure detection (unlabeled rows)");
    }
    std::vector<std::int32_t> pred;
    if (labeled) pred = predictions(*b.logits);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      bool correct = labeled && pred[i] == (*b.labels)[i];
      if (goal == Goal::kFailure) {
        (correct ? frame.id_scores : frame.ood_scores).push_back(scores[i]);
        if (correct) mask.push_back(true);
      } else {
        frame.id_scores.push_back(scores[i]);
        mask.push_back(correct);
      }
    }
    mask_available = mask_available && labeled;
  }
  if (goal == Goal::kFailure || mask_available) frame.correct_mask = std::move(mask);
  return frame;
}

EvaluationFrame build_frame(Goal goal, const ScoredBundle& id_side,
                            std::span<const ScoredBundle> shift_sets) {
  if (id_side.bundle && id_side.bundle->role == Role::kSemanticShift)
    fail(ErrorCode::kInvalidArgument, "the ID side of a frame cannot be a semantic-shift set");
  std::vector<ScoredBundle> all;
  all.reserve(shift_sets.size() + 1);
  all.push_back(id_side);
  all.insert(all.end(), shift_sets.begin(), shift_sets.end());
  return build_frame(goal, all);
}

AurocResult frame_auroc(const EvaluationFrame& frame) {
  return auroc(frame.id_scores, frame.ood_scores);
}

Decomposition decompose(std::span<const double> id_scores, const std::vector<bool>& correct_mask,
                        std::span<const double> ood_scores) {
  if (correct_mask.size() != id_scores.size())
    fail(ErrorCode::kShape, "correct mask length does not match the ID pool");
  Decomposition d;
  d.auroc_total = auroc(id_scores, ood_scores).auroc;
  auto correct = select(id_scores, correct_mask, true);
  auto incorrect = select(id_scores, correct_mask, false);
  d.n_correct = correct.size();
  d.n_incorrect = incorrect.size();
  d.n_ood = ood_scores.size();
  d.accuracy = static_cast<double>(d.n_correct) / static_cast<double>(id_scores.size());
  if (!correct.empty()) d.auroc_correct = auroc(correct, ood_scores).auroc;
  if (!incorrect.empty()) d.auroc_incorrect = auroc(incorrect, ood_scores).auroc;
  if (!correct.empty() && !incorrect.empty())
    d.auroc_correct_vs_incorrect = auroc(correct, incorrect).auroc;
  return d;
}

Decomposition decompose(const EvaluationFrame& frame) {
  if (frame.goal != Goal::kNewClass)
    fail(ErrorCode::kInvalidArgument, "decomposition splits a new-class frame by correctness");
  if (!frame.correct_mask)
    fail(ErrorCode::kMissingInput, "decomposition needs labels and logits on every ID source");
  return decompose(frame.id_scores, *frame.correct_mask, frame.ood_scores);
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) fail(ErrorCode::kUndefinedMetric, "quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::kInvalidArgument, "quantile outside [0,1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

RejectionTable rejection_table(std::span<const double> ood_scores,
                               std::span<const RejectionPool> pools, double reject_fraction) {
  if (!(reject_fraction > 0.0 && reject_fraction < 1.0))
    fail(ErrorCode::kInvalidArgument, "reject_fraction must lie in (0, 1)");
  RejectionTable table;
  table.reject_fraction = reject_fraction;
  table.tau = quantile(ood_scores, reject_fraction);
  for (const auto& pool : pools) {
    RejectionEntry e;
    e.name = pool.name;
    e.n = pool.correct_scores.size();
    if (e.n > 0) {
      auto below = std::count_if(pool.correct_scores.begin(), pool.correct_scores.end(),
                                 [&](double s) { return s < table.tau; });
      e.rejected_fraction = static_cast<double>(below) / static_cast<double>(e.n);
    }
    table.entries.push_back(std::move(e));
  }
  return table;
}

std::vector<double> rank_percentiles(std::span<const double> scores,
                                     std::span<const double> reference) {
  if (reference.empty()) fail(ErrorCode::kUndefinedMetric, "empty reference pool");
  std::vector<double> sorted(reference.begin(), reference.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto below = std::lower_bound(sorted.begin(), sorted.end(), scores[i]) - sorted.begin();
    out[i] = static_cast<double>(below) / static_cast<double>(sorted.size());
  }
  return out;
}

std::vector<RankDiscrepancy> rank_discrepancy(std::span<const double> a,
                                              std::span<const double> b, std::size_t top_n) {
  if (a.size() != b.size())
    fail(ErrorCode::kShape, "rank discrepancy needs two scorings of the same examples");
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  std::vector<RankDiscrepancy> all(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) all[i] = {i, ra[i], rb[i], ra[i] - rb[i]};
  std::stable_sort(all.begin(), all.end(), [](const RankDiscrepancy& x, const RankDiscrepancy& y) {
    return x.difference > y.difference;
  });
  all.resize(std::min(top_n, all.size()));
  return all;
}

Histogram score_histogram(std::span<const double> scores, std::size_t bins) {
  if (bins == 0) fail(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  if (scores.empty()) fail(ErrorCode::kUndefinedMetric, "histogram of an empty score vector");
  require_no_nan(scores, "scores");
  auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Histogram h;
  if (lo == hi) {
    h.edges = {lo, hi};
    h.counts = {scores.size()};
    return h;
  }
  const double width = hi - lo;
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    h.edges[k] = lo + width * static_cast<double>(k) / static_cast<double>(bins);
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double s : scores) {
    auto k = static_cast<std::size_t>((s - lo) * static_cast<double>(bins) / width);
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

}  // namespace shiftbench
