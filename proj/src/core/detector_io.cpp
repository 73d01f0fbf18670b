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
// Fitted detectors on disk: <dir>/descriptor.json holds the kind, resolved
// parameters and fitted scalars; arrays live next to it as NPY files
// (float64 for fitted statistics, float32 for the copied head).

#include <cmath>
#include <json.hpp>
#include <limits>

#include "detectors.hpp"
#include "npy.hpp"

namespace shiftbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDescriptorFormat = 1;

template <typename Derived>
void save_f64(const Eigen::MatrixBase<Derived>& m, const fs::path& path) {
  RowMatrix rows = m;
  npy::write(path, npy::from_f64({static_cast<std::size_t>(rows.rows()),
                                  static_cast<std::size_t>(rows.cols())},
                                 std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size()))));
}

RowMatrix load_f64(const fs::path& path) {
  auto array = npy::read(path);
  if (array.dtype != npy::DType::kFloat64 || array.shape.size() != 2)
    fail(ErrorCode::kFormat, path.string() + ": fitted arrays must be 2-D '<f8'");
  auto values = npy::to_f64(array);
  RowMatrix m(static_cast<Eigen::Index>(array.shape[0]), static_cast<Eigen::Index>(array.shape[1]));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

void save_head(const LinearHead& head, const fs::path& dir) {
  save_matrix(head.weights, dir / "head_weights.npy");
  save_vector(head.bias, dir / "head_bias.npy");
}

LinearHead load_head(const fs::path& dir) {
  LinearHead h;
  h.weights = load_matrix(dir / "head_weights.npy");
  h.bias = load_vector(dir / "head_bias.npy");
  return h;
}

json number_or_tag(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::kFormat, std::string("descriptor missing '") + key + "'");
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    fail(ErrorCode::kFormat, std::string("descriptor '") + key + "' is not a number");
  }
  if (!it->is_number()) fail(ErrorCode::kFormat, std::string("descriptor '") + key + "' is not a number");
  return it->get<double>();
}

}  // namespace

void save_detector(const FittedDetector& detector, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + dir.string() + "'");
  const DetectorConfig& c = detector.config();
  json d;
  d["format"] = kDescriptorFormat;
  d["kind"] = kind_name(c.kind);
  d["name"] = c.label();
  json params = json::object();
  if (c.temperature) params["temperature"] = *c.temperature;
  if (c.k) params["k"] = *c.k;
  if (c.principal_dim) params["principal_dim"] = *c.principal_dim;
  if (c.clip_percentile) params["clip_percentile"] = *c.clip_percentile;
  if (c.keep_percent) params["keep_percent"] = *c.keep_percent;
  if (c.ridge_scale) params["ridge_scale"] = *c.ridge_scale;
  d["params"] = params;

  const auto& state = detector.state();
  if (auto* m = std::get_if<MahalanobisState>(&state)) {
    d["class_ids"] = m->class_ids;
    d["ridge"] = m->ridge;
    save_f64(m->means, dir / "means.npy");
    save_f64(m->precision, dir / "precision.npy");
  } else if (auto* k = std::get_if<KnnState>(&state)) {
    save_f64(k->bank, dir / "bank.npy");
  } else if (auto* v = std::get_if<VimState>(&state)) {
    d["alpha"] = v->alpha;
    save_head(v->head, dir);
    save_f64(v->offset.transpose(), dir / "offset.npy");
    save_f64(v->residual_basis, dir / "residual_basis.npy");
  } else if (auto* r = std::get_if<ReactState>(&state)) {
    d["clip_value"] = number_or_tag(r->clip_value);
    save_head(r->head, dir);
  } else if (auto* a = std::get_if<AshState>(&state)) {
    save_head(a->head, dir);
  } else if (auto* cs = std::get_if<CosineState>(&state)) {
    save_head(cs->head, dir);
  }
  std::string text = d.dump(2) + "\n";
  npy::write_file_atomic(dir / "descriptor.json", std::as_bytes(std::span<const char>(text)));
}

FittedDetector load_detector(const fs::path& dir) {
  auto bytes = npy::read_file(dir / "descriptor.json");
  json d;
  try {
    d = json::parse(reinterpret_cast<const char*>(bytes.data()),
                    reinterpret_cast<const char*>(bytes.data()) + bytes.size());
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, dir.string() + ": invalid descriptor: " + e.what());
  }
  if (!d.is_object() || d.value("format", 0) != kDescriptorFormat)
    fail(ErrorCode::kFormat, dir.string() + ": unsupported descriptor format");
  auto kind = parse_kind(d.value("kind", std::string{}));
  if (!kind) fail(ErrorCode::kFormat, dir.string() + ": unknown detector kind");

  DetectorConfig c;
  c.kind = *kind;
  c.name = d.value("name", std::string{});
  if (c.name == kind_name(c.kind)) c.name.clear();
  const json params = d.value("params", json::object());
  for (const auto& item : params.items()) {
    const auto& key = item.key();
    if (key == "temperature") c.temperature = item.value().get<double>();
    else if (key == "k") c.k = item.value().get<std::size_t>();
    else if (key == "principal_dim") c.principal_dim = item.value().get<std::size_t>();
    else if (key == "clip_percentile") c.clip_percentile = item.value().get<double>();
    else if (key == "keep_percent") c.keep_percent = item.value().get<double>();
    else if (key == "ridge_scale") c.ridge_scale = item.value().get<double>();
    else fail(ErrorCode::kFormat, dir.string() + ": unknown parameter '" + key + "'");
  }

  switch (c.kind) {
    case DetectorKind::kMsp:
    case DetectorKind::kMaxLogit:
      return FittedDetector(c, LogitState{1.0});
    case DetectorKind::kEnergy:
    case DetectorKind::kOdinTemp:
      if (!c.temperature) fail(ErrorCode::kFormat, dir.string() + ": temperature missing");
      return FittedDetector(c, LogitState{*c.temperature});
    case DetectorKind::kMahalanobis: {
      MahalanobisState s;
      s.class_ids = d.at("class_ids").get<std::vector<std::int32_t>>();
      s.ridge = number_from(d, "ridge");
      s.means = load_f64(dir / "means.npy");
      s.precision = load_f64(dir / "precision.npy");
      return FittedDetector(c, std::move(s));
    }
    case DetectorKind::kKnn: {
      if (!c.k) fail(ErrorCode::kFormat, dir.string() + ": k missing");
      return FittedDetector(c, KnnState{load_f64(dir / "bank.npy"), *c.k});
    }
    case DetectorKind::kVim: {
      if (!c.principal_dim) fail(ErrorCode::kFormat, dir.string() + ": principal_dim missing");
      RowMatrix offset = load_f64(dir / "offset.npy");
      Eigen::VectorXd o = offset.transpose();
      Eigen::MatrixXd basis = load_f64(dir / "residual_basis.npy");
      return FittedDetector(c, VimState{load_head(dir), std::move(o), std::move(basis),
                                        number_from(d, "alpha"), *c.principal_dim});
    }
    case DetectorKind::kReact:
      return FittedDetector(c, ReactState{load_head(dir), number_from(d, "clip_value")});
    case DetectorKind::kAshB:
      if (!c.keep_percent) fail(ErrorCode::kFormat, dir.string() + ": keep_percent missing");
      return FittedDetector(c, AshState{load_head(dir), *c.keep_percent});
    case DetectorKind::kMaxCosine:
      return FittedDetector(c, CosineState{load_head(dir)});
  }
  fail(ErrorCode::kInternal, "unknown detector kind");
}

}  // namespace shiftbench
