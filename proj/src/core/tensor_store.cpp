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
#include "tensor_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <system_error>
#include <json.hpp>

#include "error.hpp"
#include "npy.hpp"

namespace shiftbench {

namespace fs = std::filesystem;
using nlohmann::json;

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data,
               std::string source_tag)
    : rows_(rows), cols_(cols), data_(std::move(data)), source_tag_(std::move(source_tag)) {
  if (rows_ * cols_ != data_.size())
    fail(ErrorCode::kShape, "matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                " cannot hold " + std::to_string(data_.size()) + " values");
}

void Matrix::validate_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      std::size_t r = cols_ == 0 ? 0 : i / cols_;
      std::size_t c = cols_ == 0 ? 0 : i % cols_;
      fail(ErrorCode::kValidation, "non-finite value at row " + std::to_string(r) +
                                       ", col " + std::to_string(c) +
                                       (source_tag_.empty() ? "" : " in " + source_tag_));
    }
  }
}

bool LabelVector::all_unlabeled() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](std::int32_t v) { return v == kNoLabel; });
}

void LinearHead::apply(std::span<const double> z, std::span<double> out) const {
  const std::size_t c_count = weights.rows();
  const std::size_t d_count = weights.cols();
  for (std::size_t c = 0; c < c_count; ++c) {
    auto w = weights.row(c);
    double acc = bias[c];
    for (std::size_t d = 0; d < d_count; ++d) acc += static_cast<double>(w[d]) * z[d];
    out[c] = acc;
  }
}

void LinearHead::validate() const {
  if (bias.size() != weights.rows())
    fail(ErrorCode::kConsistency, "head bias length " + std::to_string(bias.size()) +
                                      " does not match weight rows " +
                                      std::to_string(weights.rows()));
  weights.validate_finite();
  for (float b : bias)
    if (!std::isfinite(b)) fail(ErrorCode::kValidation, "non-finite value in head bias");
}

const char* role_name(Role role) noexcept {
  switch (role) {
    case Role::kTrainId:
      return "train_id";
    case Role::kTestId:
      return "test_id";
    case Role::kCovariateShift:
      return "covariate_shift";
    case Role::kSemanticShift:
      return "semantic_shift";
    case Role::kReferenceEmbedding:
      return "reference_embedding";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view name) noexcept {
  for (Role r : {Role::kTrainId, Role::kTestId, Role::kCovariateShift, Role::kSemanticShift,
                 Role::kReferenceEmbedding}) {
    if (name == role_name(r)) return r;
  }
  return std::nullopt;
}

std::size_t DatasetBundle::rows() const noexcept {
  if (features) return features->rows();
  if (logits) return logits->rows();
  if (labels) return labels->size();
  return 0;
}

std::optional<std::size_t> DatasetBundle::classes() const noexcept {
  if (logits) return logits->cols();
  if (head) return head->classes();
  return std::nullopt;
}

void DatasetBundle::validate() const {
  const std::string where = "bundle '" + name + "': ";
  if ((role == Role::kTrainId || role == Role::kTestId) && !labels)
    fail(ErrorCode::kManifest, where + "role " + role_name(role) + " requires labels");
  if (role == Role::kSemanticShift && labels && !labels->all_unlabeled())
    fail(ErrorCode::kManifest,
         where + "semantic_shift bundles may only carry NO_LABEL (-1) labels");
  if (role == Role::kReferenceEmbedding && !features)
    fail(ErrorCode::kManifest, where + "reference_embedding requires features");
  if (!features && !logits)
    fail(ErrorCode::kManifest, where + "bundle needs features or logits");

  if (features && logits && features->rows() != logits->rows())
    fail(ErrorCode::kConsistency, where + "features have " + std::to_string(features->rows()) +
                                      " rows but logits have " +
                                      std::to_string(logits->rows()));
  if (labels && labels->size() != rows())
    fail(ErrorCode::kConsistency, where + "labels length " + std::to_string(labels->size()) +
                                      " does not match row count " + std::to_string(rows()));
  if (head) {
    head->validate();
    if (features && head->dim() != features->cols())
      fail(ErrorCode::kConsistency, where + "head expects dimension " +
                                        std::to_string(head->dim()) + " but features have " +
                                        std::to_string(features->cols()));
    if (logits && head->classes() != logits->cols())
      fail(ErrorCode::kConsistency, where + "head has " + std::to_string(head->classes()) +
                                        " classes but logits have " +
                                        std::to_string(logits->cols()));
  }
  if (labels) {
    auto c = classes();
    for (std::size_t i = 0; i < labels->size(); ++i) {
      std::int32_t v = (*labels)[i];
      if (v == kNoLabel) continue;
      if (v < 0 || (c && static_cast<std::size_t>(v) >= *c))
        fail(ErrorCode::kConsistency, where + "label " + std::to_string(v) + " at row " +
                                          std::to_string(i) + " is outside the class range");
    }
  }
}

Matrix load_matrix(const fs::path& path) {
  auto array = npy::read(path);
  if (array.dtype != npy::DType::kFloat32 || array.shape.size() != 2)
    fail(ErrorCode::kFormat, path.string() + ": matrix files must be 2-D '<f4'");
  Matrix m(array.shape[0], array.shape[1], npy::to_f32(array), path.filename().string());
  m.validate_finite();
  return m;
}

void save_matrix(const Matrix& m, const fs::path& path) {
  npy::write(path, npy::from_f32({m.rows(), m.cols()}, m.data()));
}

LabelVector load_labels(const fs::path& path) {
  auto array = npy::read(path);
  if (array.dtype != npy::DType::kInt32 || array.shape.size() != 1)
    fail(ErrorCode::kFormat, path.string() + ": label files must be 1-D '<i4'");
  return LabelVector(npy::to_i32(array));
}

void save_labels(const LabelVector& labels, const fs::path& path) {
  npy::write(path, npy::from_i32({labels.size()}, labels.values()));
}

std::vector<float> load_vector(const fs::path& path) {
  auto array = npy::read(path);
  if (array.dtype != npy::DType::kFloat32 || array.shape.size() != 1)
    fail(ErrorCode::kFormat, path.string() + ": vector files must be 1-D '<f4'");
  auto values = npy::to_f32(array);
  for (float v : values)
    if (!std::isfinite(v)) fail(ErrorCode::kValidation, path.string() + ": non-finite value");
  return values;
}

void save_vector(std::span<const float> values, const fs::path& path) {
  npy::write(path, npy::from_f32({values.size()}, values));
}

namespace {

void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& item : object.items()) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return item.key() == k; });
    if (!known) fail(ErrorCode::kManifest, where + "unknown key '" + item.key() + "'");
  }
}

std::string require_string(const json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) fail(ErrorCode::kManifest, where + "missing key '" + key + "'");
  if (!it->is_string()) fail(ErrorCode::kManifest, where + "'" + key + "' must be a string");
  return it->get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

DatasetBundle load_bundle(const fs::path& manifest_path) {
  auto bytes = npy::read_file(manifest_path);
  json doc;
  try {
    doc = json::parse(reinterpret_cast<const char*>(bytes.data()),
                      reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const json::exception& e) {
    fail(ErrorCode::kManifest, manifest_path.string() + ": invalid JSON: " + e.what());
  }
  const std::string where = manifest_path.string() + ": ";
  if (!doc.is_object()) fail(ErrorCode::kManifest, where + "manifest must be a JSON object");
  reject_unknown_keys(doc, {"name", "role", "features", "logits", "labels", "head"}, where);

  DatasetBundle bundle;
  bundle.name = require_string(doc, "name", where);
  auto role_text = require_string(doc, "role", where);
  auto role = parse_role(role_text);
  if (!role) fail(ErrorCode::kManifest, where + "unknown role '" + role_text + "'");
  bundle.role = *role;

  const fs::path base = manifest_path.parent_path();
  if (doc.contains("features"))
    bundle.features = FeatureMatrix(load_matrix(resolve(base, require_string(doc, "features", where))));
  if (doc.contains("logits"))
    bundle.logits = LogitMatrix(load_matrix(resolve(base, require_string(doc, "logits", where))));
  if (doc.contains("labels"))
    bundle.labels = load_labels(resolve(base, require_string(doc, "labels", where)));
  if (doc.contains("head")) {
    const json& head = doc["head"];
    if (!head.is_object()) fail(ErrorCode::kManifest, where + "'head' must be an object");
    reject_unknown_keys(head, {"weights", "bias"}, where + "head: ");
    LinearHead h;
    h.weights = load_matrix(resolve(base, require_string(head, "weights", where + "head: ")));
    h.bias = load_vector(resolve(base, require_string(head, "bias", where + "head: ")));
    bundle.head = std::move(h);
  }
  bundle.validate();
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const fs::path& manifest_path) {
  bundle.validate();
  const fs::path dir = manifest_path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  }
  const std::string stem = manifest_path.stem().string();
  json doc;
  doc["name"] = bundle.name;
  doc["role"] = role_name(bundle.role);
  auto put = [&](const char* key, const std::string& suffix) {
    std::string file = stem + "." + suffix + ".npy";
    doc[key] = file;
    return dir / file;
  };
  if (bundle.features) save_matrix(*bundle.features, put("features", "features"));
  if (bundle.logits) save_matrix(*bundle.logits, put("logits", "logits"));
  if (bundle.labels) save_labels(*bundle.labels, put("labels", "labels"));
  if (bundle.head) {
    std::string w = stem + ".head_weights.npy";
    std::string b = stem + ".head_bias.npy";
    save_matrix(bundle.head->weights, dir / w);
    save_vector(bundle.head->bias, dir / b);
    doc["head"] = {{"weights", w}, {"bias", b}};
  }
  std::string text = doc.dump(2) + "\n";
  npy::write_file_atomic(manifest_path, std::as_bytes(std::span<const char>(text)));
}

double head_reconstruction_error(const LinearHead& head, const FeatureMatrix& features,
                                 const LogitMatrix& logits) {
  if (features.rows() != logits.rows() || features.cols() != head.dim() ||
      logits.cols() != head.classes())
    fail(ErrorCode::kShape, "head, features and logits disagree in shape");
  std::vector<double> z(head.dim());
  std::vector<double> out(head.classes());
  double worst = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto row = features.row(i);
    std::copy(row.begin(), row.end(), z.begin());
    head.apply(z, out);
    for (std::size_t c = 0; c < out.size(); ++c)
      worst = std::max(worst, std::abs(out[c] - static_cast<double>(logits(i, c))));
  }
  return worst;
}

std::vector<std::int32_t> predictions(const LogitMatrix& logits) {
  if (logits.cols() == 0) fail(ErrorCode::kShape, "predictions need at least one class");
  std::vector<std::int32_t> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    out[i] = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace shiftbench
