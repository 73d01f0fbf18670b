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
#ifndef SHIFTBENCH_CORE_EVALUATION_HPP_
#define SHIFTBENCH_CORE_EVALUATION_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detectors.hpp"
#include "tensor_store.hpp"

namespace shiftbench {

/// AUROC with ID as the positive class. Ties count one half per pair.
struct AurocResult {
  double auroc = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  double tie_mass = 0.0;
  /// 2 * (wins + ties / 2): the exact integer numerator, so that
  /// doubled_wins(A,B) + doubled_wins(B,A) == 2 * n_id * n_ood.
  std::int64_t doubled_wins = 0;
};

/// Rank-sum computation in O((n + m) log(n + m)). Empty pools raise
/// kUndefinedMetric.
AurocResult auroc(std::span<const double> pos, std::span<const double> neg);

/// Mean of per-model AUROC values (multi-model aggregation).
double mean_auroc(std::span<const double> per_model);

/// 1-based average ranks (ties share the mean of their positions).
std::vector<double> average_ranks(std::span<const double> values);

enum class Goal { kNewClass, kFailure };

const char* goal_name(Goal goal) noexcept;
std::optional<Goal> parse_goal(std::string_view name) noexcept;

struct EvaluationFrame {
  Goal goal = Goal::kNewClass;
  std::vector<double> id_scores;
  std::vector<double> ood_scores;
  /// Aligned with id_scores. Always set for failure frames (all true there);
  /// set for new-class frames whenever every ID-side source has labels and
  /// logits.
  std::optional<std::vector<bool>> correct_mask;
};

struct ScoredBundle {
  const DatasetBundle* bundle = nullptr;
  const ScoreVector* scores = nullptr;
};

/// Pools examples by role: train_id, test_id and covariate_shift sources are
/// the ID side, semantic_shift sources the OOD side. Under the failure goal
/// misclassified ID-side examples move to the OOD pool.
EvaluationFrame build_frame(Goal goal, std::span<const ScoredBundle> sources);

/// Convenience form: one ID-side bundle paired with any number of shift sets.
EvaluationFrame build_frame(Goal goal, const ScoredBundle& id_side,
                            std::span<const ScoredBundle> shift_sets);

AurocResult frame_auroc(const EvaluationFrame& frame);

/// Correctness-conditioned split of the new-class AUROC. Conditionals whose
/// pool is empty are left unset.
struct Decomposition {
  double auroc_total = 0.0;
  std::optional<double> auroc_correct;
  std::optional<double> auroc_incorrect;
  std::optional<double> auroc_correct_vs_incorrect;
  double accuracy = 0.0;  // w = p(correct)
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  std::size_t n_ood = 0;
};

Decomposition decompose(std::span<const double> id_scores, const std::vector<bool>& correct_mask,
                        std::span<const double> ood_scores);
Decomposition decompose(const EvaluationFrame& frame);

/// Quantile with linear interpolation between closest ranks, q in [0,1].
double quantile(std::span<const double> values, double q);

struct RejectionPool {
  std::string name;
  std::span<const double> correct_scores;
};

struct RejectionEntry {
  std::string name;
  std::size_t n = 0;
  std::optional<double> rejected_fraction;  // unset for empty pools
};

struct RejectionTable {
  double reject_fraction = 0.0;
  double tau = 0.0;
  std::vector<RejectionEntry> entries;
};

/// tau is the reject_fraction-quantile of the OOD scores; each pool reports
/// the fraction of its scores strictly below tau.
RejectionTable rejection_table(std::span<const double> ood_scores,
                               std::span<const RejectionPool> pools, double reject_fraction);

/// For each score, the fraction of `reference` strictly below it.
std::vector<double> rank_percentiles(std::span<const double> scores,
                                     std::span<const double> reference);

struct RankDiscrepancy {
  std::size_t index = 0;
  double rank_a = 0.0;
  double rank_b = 0.0;
  double difference = 0.0;  // rank_a - rank_b
};

/// Examples ranked most ID-like by `a` relative to `b`, i.e. the largest
/// rank_a - rank_b, ties by ascending index. top_n is truncated to N.
std::vector<RankDiscrepancy> rank_discrepancy(std::span<const double> a,
                                              std::span<const double> b, std::size_t top_n);

struct Histogram {
  std::vector<double> edges;  // counts.size() + 1 entries
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max], last bin closed. All-equal input yields
/// one degenerate bin.
Histogram score_histogram(std::span<const double> scores, std::size_t bins);

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_EVALUATION_HPP_
