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
#ifndef SHIFTBENCH_CORE_TENSOR_STORE_HPP_
#define SHIFTBENCH_CORE_TENSOR_STORE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shiftbench {

/// Dense row-major float32 matrix. Storage is 32-bit; all arithmetic on the
/// values elsewhere in the toolkit is carried out in double.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data,
         std::string source_tag = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(data_).subspan(i * cols_, cols_);
  }
  float operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }
  float& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  const std::string& source_tag() const noexcept { return source_tag_; }
  void set_source_tag(std::string tag) { source_tag_ = std::move(tag); }

  /// Throws Error(kValidation) naming the first non-finite entry.
  void validate_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
  std::string source_tag_;
};

/// N x D penultimate-layer activations.
class FeatureMatrix : public Matrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(Matrix m) : Matrix(std::move(m)) {}
  using Matrix::Matrix;
};

/// N x C classifier logits.
class LogitMatrix : public Matrix {
 public:
  LogitMatrix() = default;
  explicit LogitMatrix(Matrix m) : Matrix(std::move(m)) {}
  using Matrix::Matrix;
};

inline constexpr std::int32_t kNoLabel = -1;

class LabelVector {
 public:
  LabelVector() = default;
  explicit LabelVector(std::vector<std::int32_t> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  std::int32_t operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const std::int32_t> values() const noexcept { return values_; }
  bool all_unlabeled() const noexcept;

 private:
  std::vector<std::int32_t> values_;
};

/// Final linear classifier: logits = W z + b with W of shape C x D.
struct LinearHead {
  Matrix weights;
  std::vector<float> bias;

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }

  /// Evaluates W z + b in double precision into `out` (length C).
  void apply(std::span<const double> z, std::span<double> out) const;
  void validate() const;
};

enum class Role { kTrainId, kTestId, kCovariateShift, kSemanticShift, kReferenceEmbedding };

const char* role_name(Role role) noexcept;
std::optional<Role> parse_role(std::string_view name) noexcept;

struct DatasetBundle {
  std::string name;
  Role role = Role::kTestId;
  std::optional<FeatureMatrix> features;
  std::optional<LogitMatrix> logits;
  std::optional<LabelVector> labels;
  std::optional<LinearHead> head;

  /// Row count taken from whichever per-example payload is present.
  std::size_t rows() const noexcept;
  /// Class count from logits or head, if either is present.
  std::optional<std::size_t> classes() const noexcept;

  /// Enforces the bundle invariants; never repairs. Role problems raise
  /// kManifest, shape disagreements raise kConsistency.
  void validate() const;
};

Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const Matrix& m, const std::filesystem::path& path);

LabelVector load_labels(const std::filesystem::path& path);
void save_labels(const LabelVector& labels, const std::filesystem::path& path);

std::vector<float> load_vector(const std::filesystem::path& path);
void save_vector(std::span<const float> values, const std::filesystem::path& path);

/// Loads a JSON manifest; relative paths resolve against the manifest's
/// directory. Unknown keys are rejected.
DatasetBundle load_bundle(const std::filesystem::path& manifest_path);

/// Writes every present payload next to `manifest_path` (creating its
/// directory) and a manifest referencing them by relative name.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& manifest_path);

/// Largest absolute difference between W z + b and the stored logits.
double head_reconstruction_error(const LinearHead& head, const FeatureMatrix& features,
                                 const LogitMatrix& logits);

/// Row-wise argmax; ties resolve to the lowest class index.
std::vector<std::int32_t> predictions(const LogitMatrix& logits);

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_TENSOR_STORE_HPP_
