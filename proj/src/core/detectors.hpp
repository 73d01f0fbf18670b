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
#ifndef SHIFTBENCH_CORE_DETECTORS_HPP_
#define SHIFTBENCH_CORE_DETECTORS_HPP_

// Post-hoc OOD scoring functions. Every score follows the same convention:
// larger means more in-distribution, and an example is flagged OOD when its
// score falls below the threshold.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "error.hpp"
#include "tensor_store.hpp"

namespace shiftbench {

enum class DetectorKind {
  kMsp,
  kMaxLogit,
  kEnergy,
  kMaxCosine,
  kOdinTemp,
  kMahalanobis,
  kKnn,
  kVim,
  kReact,
  kAshB,
};

const char* kind_name(DetectorKind kind) noexcept;
std::optional<DetectorKind> parse_kind(std::string_view name) noexcept;
/// True for kinds scored from penultimate features rather than stored logits.
bool needs_features(DetectorKind kind) noexcept;
/// True for kinds that recompute logits (or use class weights) from a head.
bool needs_head(DetectorKind kind) noexcept;

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kMsp;
  std::string name;  // empty -> kind name

  std::optional<double> temperature;        // energy, odin_temp
  std::optional<std::size_t> k;             // knn
  std::optional<std::size_t> principal_dim;  // vim
  std::optional<double> clip_percentile;    // react
  std::optional<double> keep_percent;       // ash_b
  std::optional<double> ridge_scale;        // mahalanobis

  std::string label() const { return name.empty() ? kind_name(kind) : name; }

  /// Rejects parameters that do not belong to `kind` and out-of-range values.
  void validate() const;
};

/// Parses "kind" or "kind:key=value,..." where key is one of name,
/// temperature, k, principal_dim, clip_percentile, keep_percent, ridge_scale.
/// The result is validated.
DetectorConfig parse_detector_spec(std::string_view spec);
/// Inverse of parse_detector_spec; only set parameters are written.
std::string detector_spec(const DetectorConfig& config);

inline constexpr double kDefaultEnergyTemperature = 1.0;
inline constexpr double kDefaultOdinTemperature = 1000.0;
inline constexpr double kDefaultClipPercentile = 90.0;
inline constexpr double kDefaultKeepPercent = 65.0;
inline constexpr double kDefaultRidgeScale = 1e-6;

struct ScoreVector {
  DetectorKind kind = DetectorKind::kMsp;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace scoring {

/// max(x) + log(sum(exp(x - max(x)))).
double logsumexp(std::span<const double> x);
/// T * logsumexp(x / T).
double energy(std::span<const double> logits, double temperature);
/// max softmax(x / T); MSP is the T = 1 case.
double max_softmax(std::span<const double> logits, double temperature);
double max_logit(std::span<const double> logits);
/// max over classes of cos(z, W_c); zero-norm vectors contribute 0.
double max_cosine(std::span<const double> z, const LinearHead& head);

/// Percentile with linear interpolation between closest ranks; p in [0,100].
/// Sorts `values` in place.
double percentile(std::vector<double>& values, double p);

/// ASH-B shaping: the top ceil(D * keep_percent / 100) activations (ties to
/// the lower index) are set to S / k where S is the full pre-shaping sum;
/// every other entry becomes 0.
std::vector<double> ash_b_shape(std::span<const double> z, double keep_percent);
std::size_t ash_b_keep_count(std::size_t dim, double keep_percent);

}  // namespace scoring

struct MahalanobisState {
  std::vector<std::int32_t> class_ids;  // classes seen in training, ascending
  RowMatrix means;                      // one row per entry of class_ids
  Eigen::MatrixXd precision;            // D x D, symmetric positive definite
  double ridge = 0.0;                   // epsilon actually added to the covariance
  // Derived on construction: P = L L^T and the means mapped through L^T.
  Eigen::MatrixXd factor;
  RowMatrix transformed_means;
};

struct KnnState {
  RowMatrix bank;  // M x D, unit-norm rows
  std::size_t k = 1;
};

struct VimState {
  LinearHead head;
  Eigen::VectorXd offset;          // o = -pinv(W) b
  Eigen::MatrixXd residual_basis;  // D x (D - principal_dim)
  double alpha = 1.0;
  std::size_t principal_dim = 0;
};

struct ReactState {
  LinearHead head;
  double clip_value = 0.0;
};

struct AshState {
  LinearHead head;
  double keep_percent = kDefaultKeepPercent;
};

struct CosineState {
  LinearHead head;
};

/// Logit-only kinds carry no fitted statistics beyond the temperature.
struct LogitState {
  double temperature = 1.0;
};

/// Immutable fitted detector. Scoring is const and thread-safe.
class FittedDetector {
 public:
  using State =
      std::variant<LogitState, MahalanobisState, KnnState, VimState, ReactState, AshState,
                   CosineState>;

  FittedDetector(DetectorConfig config, State state);

  DetectorKind kind() const noexcept { return config_.kind; }
  const DetectorConfig& config() const noexcept { return config_; }
  const State& state() const noexcept { return state_; }
  template <typename T>
  const T* state_as() const noexcept {
    return std::get_if<T>(&state_);
  }

  ScoreVector score(const DatasetBundle& data) const;
  /// Scores a single example. `features` or `logits` may be empty when the
  /// kind does not use them.
  double score_row(std::span<const double> features, std::span<const double> logits) const;

  /// Direct constructors for fitted states, used by loaders and by callers
  /// that need a specific fitted value (e.g. an unbounded ReAct clip).
  static FittedDetector logit_only(DetectorKind kind, double temperature = 1.0);
  static FittedDetector mahalanobis(std::vector<std::int32_t> class_ids, RowMatrix means,
                                    Eigen::MatrixXd precision, double ridge,
                                    double ridge_scale = kDefaultRidgeScale);
  static FittedDetector knn(RowMatrix bank, std::size_t k);
  static FittedDetector vim(LinearHead head, Eigen::VectorXd offset,
                            Eigen::MatrixXd residual_basis, double alpha,
                            std::size_t principal_dim);
  static FittedDetector react(LinearHead head, double clip_value,
                              double clip_percentile = kDefaultClipPercentile);
  static FittedDetector ash_b(LinearHead head, double keep_percent);
  static FittedDetector max_cosine(LinearHead head);

 private:
  DetectorConfig config_;
  State state_;
};

/// Estimates per-detector statistics on an ID training bundle.
FittedDetector fit(const DetectorConfig& config, const DatasetBundle& train);

/// s >= tau is in-distribution.
std::vector<bool> threshold(const ScoreVector& scores, double tau);

/// Directory layout: descriptor.json plus one NPY per fitted array.
void save_detector(const FittedDetector& detector, const std::filesystem::path& dir);
FittedDetector load_detector(const std::filesystem::path& dir);

struct ScoreCell {
  std::string detector;
  std::string dataset;
  std::optional<ScoreVector> scores;
  std::optional<ErrorCode> error_code;
  std::string error;
};

struct ScoreTable {
  std::vector<ScoreCell> cells;  // detector-major, then dataset order

  const ScoreCell* find(std::string_view detector, std::string_view dataset) const noexcept;
};

/// Fits every config once on `train` and scores every dataset. Failures are
/// recorded per cell; `jobs` bounds the worker count without affecting results.
ScoreTable score_all(std::span<const DetectorConfig> configs, const DatasetBundle& train,
                     std::span<const DatasetBundle> datasets, unsigned jobs = 1);

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_DETECTORS_HPP_
