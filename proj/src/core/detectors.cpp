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
#include "detectors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "parallel.hpp"

namespace shiftbench {

namespace {

constexpr DetectorKind kAllKinds[] = {
    DetectorKind::kMsp,   DetectorKind::kMaxLogit,    DetectorKind::kEnergy,
    DetectorKind::kMaxCosine, DetectorKind::kOdinTemp, DetectorKind::kMahalanobis,
    DetectorKind::kKnn,   DetectorKind::kVim,         DetectorKind::kReact,
    DetectorKind::kAshB,
};

std::vector<double> to_double(std::span<const float> row) {
  return std::vector<double>(row.begin(), row.end());
}

void require_positive_finite(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    fail(ErrorCode::kConfig, std::string(what) + " must be a positive finite number");
}

void require_percent(double value, const char* what) {
  if (!(value > 0.0 && value <= 100.0))
    fail(ErrorCode::kConfig, std::string(what) + " must lie in (0, 100]");
}

// out = L^T v for lower-triangular L. Written out explicitly so that the
// class means and the scored features go through identical arithmetic.
void lower_transpose_times(const Eigen::MatrixXd& lower, const double* v, double* out) {
  const Eigen::Index d = lower.rows();
  for (Eigen::Index j = 0; j < d; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = j; i < d; ++i) acc += lower(i, j) * v[i];
    out[j] = acc;
  }
}

void finalize(MahalanobisState& s) {
  const Eigen::Index d = s.precision.rows();
  if (s.precision.cols() != d || s.means.cols() != d)
    fail(ErrorCode::kShape, "mahalanobis: precision and means disagree in dimension");
  if (static_cast<std::size_t>(s.means.rows()) != s.class_ids.size())
    fail(ErrorCode::kShape, "mahalanobis: one mean per class id is required");
  Eigen::LLT<Eigen::MatrixXd> llt(s.precision);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::kNumerical, "mahalanobis: precision matrix is not positive definite");
  s.factor = llt.matrixL();
  s.transformed_means.resize(s.means.rows(), d);
  for (Eigen::Index c = 0; c < s.means.rows(); ++c)
    lower_transpose_times(s.factor, s.means.row(c).data(), s.transformed_means.row(c).data());
}

const LinearHead* head_of(const FittedDetector::State& state) {
  if (auto* v = std::get_if<VimState>(&state)) return &v->head;
  if (auto* r = std::get_if<ReactState>(&state)) return &r->head;
  if (auto* a = std::get_if<AshState>(&state)) return &a->head;
  if (auto* c = std::get_if<CosineState>(&state)) return &c->head;
  return nullptr;
}

std::size_t feature_dim(const FittedDetector::State& state) {
  if (auto* m = std::get_if<MahalanobisState>(&state)) return m->means.cols();
  if (auto* k = std::get_if<KnnState>(&state)) return k->bank.cols();
  if (auto* h = head_of(state)) return h->dim();
  return 0;
}

DetectorConfig base_config(DetectorKind kind) {
  DetectorConfig c;
  c.kind = kind;
  return c;
}

}  // namespace

const char* kind_name(DetectorKind kind) noexcept {
  switch (kind) {
    case DetectorKind::kMsp:
      return "msp";
    case DetectorKind::kMaxLogit:
      return "max_logit";
    case DetectorKind::kEnergy:
      return "energy";
    case DetectorKind::kMaxCosine:
      return "max_cosine";
    case DetectorKind::kOdinTemp:
      return "odin_temp";
    case DetectorKind::kMahalanobis:
      return "mahalanobis";
    case DetectorKind::kKnn:
      return "knn";
    case DetectorKind::kVim:
      return "vim";
    case DetectorKind::kReact:
      return "react";
    case DetectorKind::kAshB:
      return "ash_b";
  }
  return "?";
}

std::optional<DetectorKind> parse_kind(std::string_view name) noexcept {
  for (DetectorKind k : kAllKinds)
    if (name == kind_name(k)) return k;
  return std::nullopt;
}

bool needs_features(DetectorKind kind) noexcept {
  switch (kind) {
    case DetectorKind::kMsp:
    case DetectorKind::kMaxLogit:
    case DetectorKind::kEnergy:
    case DetectorKind::kOdinTemp:
      return false;
    default:
      return true;
  }
}

bool needs_head(DetectorKind kind) noexcept {
  switch (kind) {
    case DetectorKind::kMaxCosine:
    case DetectorKind::kVim:
    case DetectorKind::kReact:
    case DetectorKind::kAshB:
      return true;
    default:
      return false;
  }
}

void DetectorConfig::validate() const {
  const std::string who = label() + ": ";
  auto reject = [&](bool present, bool allowed, const char* param) {
    if (present && !allowed)
      fail(ErrorCode::kConfig, who + "parameter '" + param + "' does not apply to kind " +
                                   kind_name(kind));
  };
  reject(temperature.has_value(),
         kind == DetectorKind::kEnergy || kind == DetectorKind::kOdinTemp, "temperature");
  reject(k.has_value(), kind == DetectorKind::kKnn, "k");
  reject(principal_dim.has_value(), kind == DetectorKind::kVim, "principal_dim");
  reject(clip_percentile.has_value(), kind == DetectorKind::kReact, "clip_percentile");
  reject(keep_percent.has_value(), kind == DetectorKind::kAshB, "keep_percent");
  reject(ridge_scale.has_value(), kind == DetectorKind::kMahalanobis, "ridge_scale");

  if (temperature) require_positive_finite(*temperature, "temperature");
  if (k && *k == 0) fail(ErrorCode::kConfig, who + "k must be a positive integer");
  if (principal_dim && *principal_dim == 0)
    fail(ErrorCode::kConfig, who + "principal_dim must be a positive integer");
  if (clip_percentile) require_percent(*clip_percentile, "clip_percentile");
  if (keep_percent) require_percent(*keep_percent, "keep_percent");
  if (ridge_scale && (!(*ridge_scale >= 0.0) || !std::isfinite(*ridge_scale)))
    fail(ErrorCode::kConfig, who + "ridge_scale must be a nonnegative finite number");
}

namespace {

double spec_number(std::string_view key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    fail(ErrorCode::kConfig, "detector parameter '" + std::string(key) + "' is not a number: '" +
                                 value + "'");
  return v;
}

std::size_t spec_count(std::string_view key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos)
    fail(ErrorCode::kConfig, "detector parameter '" + std::string(key) +
                                 "' is not a nonnegative integer: '" + value + "'");
  return static_cast<std::size_t>(std::stoull(value));
}

std::string spec_format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

DetectorConfig parse_detector_spec(std::string_view spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind_text(spec.substr(0, colon));
  auto kind = parse_kind(kind_text);
  if (!kind) fail(ErrorCode::kConfig, "unknown detector kind '" + kind_text + "'");
  DetectorConfig c;
  c.kind = *kind;
  if (colon != std::string_view::npos) {
    std::string_view rest = spec.substr(colon + 1);
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      const std::size_t eq = item.find('=');
      if (eq == std::string_view::npos)
        fail(ErrorCode::kConfig, "detector parameter '" + std::string(item) + "' lacks '='");
      const std::string_view key = item.substr(0, eq);
      const std::string value(item.substr(eq + 1));
      if (key == "name") c.name = value;
      else if (key == "temperature") c.temperature = spec_number(key, value);
      else if (key == "k") c.k = spec_count(key, value);
      else if (key == "principal_dim") c.principal_dim = spec_count(key, value);
      else if (key == "clip_percentile") c.clip_percentile = spec_number(key, value);
      else if (key == "keep_percent") c.keep_percent = spec_number(key, value);
      else if (key == "ridge_scale") c.ridge_scale = spec_number(key, value);
      else fail(ErrorCode::kConfig, "unknown detector parameter '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

std::string detector_spec(const DetectorConfig& c) {
  std::vector<std::string> items;
  if (!c.name.empty()) items.push_back("name=" + c.name);
  if (c.temperature) items.push_back("temperature=" + spec_format(*c.temperature));
  if (c.k) items.push_back("k=" + std::to_string(*c.k));
  if (c.principal_dim) items.push_back("principal_dim=" + std::to_string(*c.principal_dim));
  if (c.clip_percentile) items.push_back("clip_percentile=" + spec_format(*c.clip_percentile));
  if (c.keep_percent) items.push_back("keep_percent=" + spec_format(*c.keep_percent));
  if (c.ridge_scale) items.push_back("ridge_scale=" + spec_format(*c.ridge_scale));
  std::string out = kind_name(c.kind);
  for (std::size_t i = 0; i < items.size(); ++i) out += (i == 0 ? ":" : ",") + items[i];
  return out;
}

// ---------------------------------------------------------------------------
// Scoring primitives

namespace scoring {

double logsumexp(std::span<const double> x) {
  if (x.empty()) fail(ErrorCode::kShape, "logsumexp of an empty vector");
  double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

double energy(std::span<const double> logits, double temperature) {
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  return temperature * logsumexp(scaled);
}

double max_softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) fail(ErrorCode::kShape, "softmax of an empty vector");
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  double m = *std::max_element(scaled.begin(), scaled.end());
  double sum = 0.0;
  for (double v : scaled) sum += std::exp(v - m);
  return 1.0 / sum;
}

double max_logit(std::span<const double> logits) {
  if (logits.empty()) fail(ErrorCode::kShape, "max of an empty vector");
  return *std::max_element(logits.begin(), logits.end());
}

double max_cosine(std::span<const double> z, const LinearHead& head) {
  double z_norm = 0.0;
  for (double v : z) z_norm += v * v;
  z_norm = std::sqrt(z_norm);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < head.classes(); ++c) {
    auto w = head.weights.row(c);
    double dot = 0.0;
    double w_norm = 0.0;
    for (std::size_t d = 0; d < w.size(); ++d) {
      dot += static_cast<double>(w[d]) * z[d];
      w_norm += static_cast<double>(w[d]) * w[d];
    }
    w_norm = std::sqrt(w_norm);
    double cosine = (z_norm > 0.0 && w_norm > 0.0) ? dot / (z_norm * w_norm) : 0.0;
    best = std::max(best, cosine);
  }
  return best;
}

double percentile(std::vector<double>& values, double p) {
  if (values.empty()) fail(ErrorCode::kUndefinedMetric, "percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) fail(ErrorCode::kInvalidArgument, "percentile outside [0,100]");
  std::sort(values.begin(), values.end());
  double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= values.size()) return values.back();
  double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::size_t ash_b_keep_count(std::size_t dim, double keep_percent) {
  // The small slack keeps e.g. 7 * 100 / 100 from rounding up to 8.
  double raw = static_cast<double>(dim) * keep_percent / 100.0;
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, dim == 0 ? 0 : 1, dim);
}

std::vector<double> ash_b_shape(std::span<const double> z, double keep_percent) {
  const std::size_t dim = z.size();
  std::vector<double> out(dim, 0.0);
  if (dim == 0) return out;
  const std::size_t k = ash_b_keep_count(dim, keep_percent);
  double total = 0.0;
  for (double v : z) total += v;
  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return z[a] > z[b] || (z[a] == z[b] && a < b);
                    });
  const double fill = total / static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = fill;
  return out;
}

}  // namespace scoring

// ---------------------------------------------------------------------------
// FittedDetector

FittedDetector::FittedDetector(DetectorConfig config, State state)
    : config_(std::move(config)), state_(std::move(state)) {
  config_.validate();
  bool ok = false;
  switch (config_.kind) {
    case DetectorKind::kMsp:
    case DetectorKind::kMaxLogit:
    case DetectorKind::kEnergy:
    case DetectorKind::kOdinTemp:
      ok = std::holds_alternative<LogitState>(state_);
      break;
    case DetectorKind::kMahalanobis:
      ok = std::holds_alternative<MahalanobisState>(state_);
      if (ok) finalize(std::get<MahalanobisState>(state_));
      break;
    case DetectorKind::kKnn:
      ok = std::holds_alternative<KnnState>(state_);
      break;
    case DetectorKind::kVim:
      ok = std::holds_alternative<VimState>(state_);
      break;
    case DetectorKind::kReact:
      ok = std::holds_alternative<ReactState>(state_);
      break;
    case DetectorKind::kAshB:
      ok = std::holds_alternative<AshState>(state_);
      break;
    case DetectorKind::kMaxCosine:
      ok = std::holds_alternative<CosineState>(state_);
      break;
  }
  if (!ok)
    fail(ErrorCode::kInternal,
         std::string("fitted state does not match detector kind ") + kind_name(config_.kind));
  if (auto* h = head_of(state_)) h->validate();
  if (auto* v = std::get_if<VimState>(&state_)) {
    if (v->offset.size() != static_cast<Eigen::Index>(v->head.dim()) ||
        v->residual_basis.rows() != static_cast<Eigen::Index>(v->head.dim()))
      fail(ErrorCode::kShape, "vim: offset/residual basis do not match the head dimension");
  }
  if (auto* kn = std::get_if<KnnState>(&state_)) {
    if (kn->k == 0 || kn->k > static_cast<std::size_t>(kn->bank.rows()))
      fail(ErrorCode::kConfig, "knn: k must lie in [1, bank size]");
  }
}

FittedDetector FittedDetector::logit_only(DetectorKind kind, double temperature) {
  DetectorConfig c = base_config(kind);
  if (kind == DetectorKind::kEnergy || kind == DetectorKind::kOdinTemp) c.temperature = temperature;
  return FittedDetector(c, LogitState{temperature});
}

FittedDetector FittedDetector::mahalanobis(std::vector<std::int32_t> class_ids, RowMatrix means,
                                           Eigen::MatrixXd precision, double ridge,
                                           double ridge_scale) {
  DetectorConfig c = base_config(DetectorKind::kMahalanobis);
  c.ridge_scale = ridge_scale;
  MahalanobisState s;
  s.class_ids = std::move(class_ids);
  s.means = std::move(means);
  s.precision = std::move(precision);
  s.ridge = ridge;
  return FittedDetector(c, std::move(s));
}

FittedDetector FittedDetector::knn(RowMatrix bank, std::size_t k) {
  DetectorConfig c = base_config(DetectorKind::kKnn);
  c.k = k;
  return FittedDetector(c, KnnState{std::move(bank), k});
}

FittedDetector FittedDetector::vim(LinearHead head, Eigen::VectorXd offset,
                                   Eigen::MatrixXd residual_basis, double alpha,
                                   std::size_t principal_dim) {
  DetectorConfig c = base_config(DetectorKind::kVim);
  c.principal_dim = principal_dim;
  return FittedDetector(c, VimState{std::move(head), std::move(offset), std::move(residual_basis),
                                    alpha, principal_dim});
}

FittedDetector FittedDetector::react(LinearHead head, double clip_value, double clip_percentile) {
  DetectorConfig c = base_config(DetectorKind::kReact);
  c.clip_percentile = clip_percentile;
  return FittedDetector(c, ReactState{std::move(head), clip_value});
}

FittedDetector FittedDetector::ash_b(LinearHead head, double keep_percent) {
  DetectorConfig c = base_config(DetectorKind::kAshB);
  c.keep_percent = keep_percent;
  return FittedDetector(c, AshState{std::move(head), keep_percent});
}

FittedDetector FittedDetector::max_cosine(LinearHead head) {
  return FittedDetector(base_config(DetectorKind::kMaxCosine), CosineState{std::move(head)});
}

double FittedDetector::score_row(std::span<const double> z, std::span<const double> logits) const {
  switch (config_.kind) {
    case DetectorKind::kMsp:
      return scoring::max_softmax(logits, 1.0);
    case DetectorKind::kOdinTemp:
      return scoring::max_softmax(logits, std::get<LogitState>(state_).temperature);
    case DetectorKind::kMaxLogit:
      return scoring::max_logit(logits);
    case DetectorKind::kEnergy:
      return scoring::energy(logits, std::get<LogitState>(state_).temperature);
    case DetectorKind::kMaxCosine:
      return scoring::max_cosine(z, std::get<CosineState>(state_).head);
    case DetectorKind::kMahalanobis: {
      const auto& s = std::get<MahalanobisState>(state_);
      const auto d = static_cast<std::size_t>(s.factor.rows());
      std::vector<double> mapped(d);
      lower_transpose_times(s.factor, z.data(), mapped.data());
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < s.transformed_means.rows(); ++c) {
        const double* m = s.transformed_means.row(c).data();
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double diff = mapped[j] - m[j];
          q += diff * diff;
        }
        best = std::min(best, q);
      }
      return -best;
    }
    case DetectorKind::kKnn: {
      const auto& s = std::get<KnnState>(state_);
      double norm = 0.0;
      for (double v : z) norm += v * v;
      norm = std::sqrt(norm);
      std::vector<double> q(z.begin(), z.end());
      if (norm > 0.0)
        for (double& v : q) v /= norm;
      std::vector<double> dist2(static_cast<std::size_t>(s.bank.rows()));
      for (Eigen::Index r = 0; r < s.bank.rows(); ++r) {
        const double* ref = s.bank.row(r).data();
        double acc = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) {
          double diff = q[j] - ref[j];
          acc += diff * diff;
        }
        dist2[static_cast<std::size_t>(r)] = acc;
      }
      auto kth = dist2.begin() + static_cast<std::ptrdiff_t>(s.k - 1);
      std::nth_element(dist2.begin(), kth, dist2.end());
      return -std::sqrt(*kth);
    }
    case DetectorKind::kVim: {
      const auto& s = std::get<VimState>(state_);
      std::vector<double> l(s.head.classes());
      s.head.apply(z, l);
      double residual = 0.0;
      if (s.residual_basis.cols() > 0) {
        Eigen::VectorXd centered =
            Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())) -
            s.offset;
        residual = (s.residual_basis.transpose() * centered).norm();
      }
      return scoring::logsumexp(l) - s.alpha * residual;
    }
    case DetectorKind::kReact: {
      const auto& s = std::get<ReactState>(state_);
      std::vector<double> clipped(z.size());
      for (std::size_t j = 0; j < z.size(); ++j) clipped[j] = std::min(z[j], s.clip_value);
      std::vector<double> l(s.head.classes());
      s.head.apply(clipped, l);
      return scoring::energy(l, 1.0);
    }
    case DetectorKind::kAshB: {
      const auto& s = std::get<AshState>(state_);
      auto shaped = scoring::ash_b_shape(z, s.keep_percent);
      std::vector<double> l(s.head.classes());
      s.head.apply(shaped, l);
      return scoring::energy(l, 1.0);
    }
  }
  fail(ErrorCode::kInternal, "unknown detector kind");
}

ScoreVector FittedDetector::score(const DatasetBundle& data) const {
  const std::string who = config_.label() + " on '" + data.name + "': ";
  ScoreVector out;
  out.kind = config_.kind;
  const bool use_features = needs_features(config_.kind);
  if (use_features) {
    if (!data.features) fail(ErrorCode::kMissingInput, who + "missing features");
    std::size_t d = feature_dim(state_);
    if (data.features->cols() != d)
      fail(ErrorCode::kShape, who + "feature dimension " + std::to_string(data.features->cols()) +
                                  " does not match fitted dimension " + std::to_string(d));
  } else {
    if (!data.logits) fail(ErrorCode::kMissingInput, who + "missing logits");
    if (data.logits->cols() == 0) fail(ErrorCode::kShape, who + "logits have no classes");
  }
  const std::size_t n = data.rows();
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s;
    if (use_features) {
      auto z = to_double(data.features->row(i));
      s = score_row(z, {});
    } else {
      auto l = to_double(data.logits->row(i));
      s = score_row({}, l);
    }
    if (!std::isfinite(s))
      fail(ErrorCode::kNumerical, who + "non-finite score at row " + std::to_string(i));
    out.values[i] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

const FeatureMatrix& require_features(const DatasetBundle& train, const std::string& who) {
  if (!train.features) fail(ErrorCode::kMissingInput, who + "missing features");
  if (train.features->rows() == 0)
    fail(ErrorCode::kMissingInput, who + "training features are empty");
  return *train.features;
}

const LinearHead& require_head(const DatasetBundle& train, const std::string& who) {
  if (!train.head) fail(ErrorCode::kMissingInput, who + "missing head");
  if (train.features && train.head->dim() != train.features->cols())
    fail(ErrorCode::kShape, who + "head dimension does not match features");
  return *train.head;
}

FittedDetector fit_mahalanobis(DetectorConfig config, const DatasetBundle& train,
                               const std::string& who) {
  const auto& feats = require_features(train, who);
  if (!train.labels) fail(ErrorCode::kMissingInput, who + "missing labels");
  const auto d = static_cast<Eigen::Index>(feats.cols());
  const double ridge_scale = *config.ridge_scale;

  std::map<std::int32_t, std::pair<Eigen::VectorXd, std::size_t>> sums;
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    std::int32_t y = (*train.labels)[i];
    if (y == kNoLabel) continue;
    auto [it, inserted] = sums.try_emplace(y, Eigen::VectorXd::Zero(d), 0);
    auto row = feats.row(i);
    for (Eigen::Index j = 0; j < d; ++j) it->second.first[j] += row[static_cast<std::size_t>(j)];
    ++it->second.second;
  }
  if (sums.empty()) fail(ErrorCode::kMissingInput, who + "no labeled training rows");

  std::vector<std::int32_t> ids;
  RowMatrix means(static_cast<Eigen::Index>(sums.size()), d);
  std::map<std::int32_t, Eigen::Index> slot;
  for (const auto& [y, acc] : sums) {
    slot[y] = static_cast<Eigen::Index>(ids.size());
    means.row(static_cast<Eigen::Index>(ids.size())) =
        (acc.first / static_cast<double>(acc.second)).transpose();
    ids.push_back(y);
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  std::size_t used = 0;
  Eigen::VectorXd centered(d);
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    std::int32_t y = (*train.labels)[i];
    if (y == kNoLabel) continue;
    auto row = feats.row(i);
    auto m = means.row(slot[y]);
    for (Eigen::Index j = 0; j < d; ++j) centered[j] = row[static_cast<std::size_t>(j)] - m[j];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
    ++used;
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(used);

  const double trace = cov.trace();
  const double ridge =
      trace > 0.0 ? ridge_scale * trace / static_cast<double>(d) : ridge_scale;
  Eigen::MatrixXd regularized = cov;
  regularized.diagonal().array() += ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  bool singular = llt.info() != Eigen::Success;
  if (!singular) {
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal().cwiseAbs2();
    singular = !(diag.minCoeff() > 1e-12 * diag.maxCoeff());
  }
  if (singular)
    fail(ErrorCode::kNumerical,
         who + "class-conditional covariance is singular; use a positive ridge_scale");
  Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
  precision = 0.5 * (precision + precision.transpose()).eval();

  MahalanobisState s;
  s.class_ids = std::move(ids);
  s.means = std::move(means);
  s.precision = std::move(precision);
  s.ridge = ridge;
  return FittedDetector(std::move(config), std::move(s));
}

FittedDetector fit_knn(DetectorConfig config, const DatasetBundle& train, const std::string& who) {
  const auto& feats = require_features(train, who);
  const std::size_t m = feats.rows();
  if (!config.k) config.k = std::max<std::size_t>(1, std::min<std::size_t>(1000, m / 10));
  if (*config.k > m)
    fail(ErrorCode::kConfig, who + "k = " + std::to_string(*config.k) +
                                 " exceeds the reference bank size " + std::to_string(m));
  RowMatrix bank(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(feats.cols()));
  for (std::size_t i = 0; i < m; ++i) {
    auto row = feats.row(i);
    double norm = 0.0;
    for (float v : row) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < row.size(); ++j)
      bank(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          norm > 0.0 ? row[j] / norm : 0.0;
  }
  std::size_t k = *config.k;
  return FittedDetector(std::move(config), KnnState{std::move(bank), k});
}

FittedDetector fit_vim(DetectorConfig config, const DatasetBundle& train, const std::string& who) {
  const auto& feats = require_features(train, who);
  const auto& head = require_head(train, who);
  const std::size_t dim = feats.cols();
  if (!config.principal_dim) config.principal_dim = std::max<std::size_t>(1, std::min<std::size_t>(512, dim / 2));
  const std::size_t principal = *config.principal_dim;
  if (principal > dim)
    fail(ErrorCode::kConfig, who + "principal_dim " + std::to_string(principal) +
                                 " exceeds the feature dimension " + std::to_string(dim));
  const auto d = static_cast<Eigen::Index>(dim);

  Eigen::MatrixXd w(static_cast<Eigen::Index>(head.classes()), d);
  for (std::size_t c = 0; c < head.classes(); ++c)
    for (std::size_t j = 0; j < dim; ++j)
      w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = head.weights(c, j);
  Eigen::VectorXd b(static_cast<Eigen::Index>(head.classes()));
  for (std::size_t c = 0; c < head.classes(); ++c) b[static_cast<Eigen::Index>(c)] = head.bias[c];
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(w);
  Eigen::VectorXd offset = -(cod.pseudoInverse() * b);

  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd centered(d);
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    auto row = feats.row(i);
    for (Eigen::Index j = 0; j < d; ++j) centered[j] = row[static_cast<std::size_t>(j)] - offset[j];
    moment.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  moment = moment.selfadjointView<Eigen::Lower>();
  moment /= static_cast<double>(feats.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment);
  if (eig.info() != Eigen::Success)
    fail(ErrorCode::kNumerical, who + "eigendecomposition of the feature moment failed");
  // Eigenvalues come back ascending, so the residual space is the leading block.
  Eigen::MatrixXd residual_basis = eig.eigenvectors().leftCols(d - static_cast<Eigen::Index>(principal));

  double logit_sum = 0.0;
  double residual_sum = 0.0;
  std::vector<double> l(head.classes());
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    auto z = to_double(feats.row(i));
    head.apply(z, l);
    logit_sum += scoring::max_logit(l);
    if (residual_basis.cols() > 0) {
      Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(z.data(), d) - offset;
      residual_sum += (residual_basis.transpose() * c).norm();
    }
  }
  double alpha = residual_sum > 0.0 ? logit_sum / residual_sum : 1.0;
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    fail(ErrorCode::kNumerical,
         who + "virtual-logit scale is not positive (mean training max logit <= 0)");
  return FittedDetector(std::move(config),
                        VimState{head, std::move(offset), std::move(residual_basis), alpha, principal});
}

FittedDetector fit_react(DetectorConfig config, const DatasetBundle& train, const std::string& who) {
  const auto& feats = require_features(train, who);
  const auto& head = require_head(train, who);
  std::vector<double> values(feats.data().begin(), feats.data().end());
  double clip = scoring::percentile(values, *config.clip_percentile);
  return FittedDetector(std::move(config), ReactState{head, clip});
}

}  // namespace

FittedDetector fit(const DetectorConfig& config_in, const DatasetBundle& train) {
  config_in.validate();
  const std::string who = config_in.label() + ": ";
  if (train.role != Role::kTrainId)
    fail(ErrorCode::kInvalidArgument,
         who + "fit requires a train_id bundle, got " + role_name(train.role));
  DetectorConfig config = config_in;
  switch (config.kind) {
    case DetectorKind::kMsp:
    case DetectorKind::kMaxLogit:
      return FittedDetector(config, LogitState{1.0});
    case DetectorKind::kEnergy:
      if (!config.temperature) config.temperature = kDefaultEnergyTemperature;
      return FittedDetector(config, LogitState{*config.temperature});
    case DetectorKind::kOdinTemp:
      if (!config.temperature) config.temperature = kDefaultOdinTemperature;
      return FittedDetector(config, LogitState{*config.temperature});
    case DetectorKind::kMahalanobis:
      if (!config.ridge_scale) config.ridge_scale = kDefaultRidgeScale;
      return fit_mahalanobis(std::move(config), train, who);
    case DetectorKind::kKnn:
      return fit_knn(std::move(config), train, who);
    case DetectorKind::kVim:
      return fit_vim(std::move(config), train, who);
    case DetectorKind::kReact:
      if (!config.clip_percentile) config.clip_percentile = kDefaultClipPercentile;
      return fit_react(std::move(config), train, who);
    case DetectorKind::kAshB: {
      if (!config.keep_percent) config.keep_percent = kDefaultKeepPercent;
      require_features(train, who);
      const auto& head = require_head(train, who);
      double keep = *config.keep_percent;
      return FittedDetector(std::move(config), AshState{head, keep});
    }
    case DetectorKind::kMaxCosine: {
      require_features(train, who);
      const auto& head = require_head(train, who);
      return FittedDetector(std::move(config), CosineState{head});
    }
  }
  fail(ErrorCode::kInternal, "unknown detector kind");
}

std::vector<bool> threshold(const ScoreVector& scores, double tau) {
  std::vector<bool> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores.values[i] >= tau;
  return out;
}

const ScoreCell* ScoreTable::find(std::string_view detector, std::string_view dataset) const noexcept {
  for (const auto& cell : cells)
    if (cell.detector == detector && cell.dataset == dataset) return &cell;
  return nullptr;
}

ScoreTable score_all(std::span<const DetectorConfig> configs, const DatasetBundle& train,
                     std::span<const DatasetBundle> datasets, unsigned jobs) {
  struct FitOutcome {
    std::optional<FittedDetector> detector;
    ErrorCode code = ErrorCode::kInternal;
    std::string error;
  };
  std::vector<FitOutcome> fits(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    try {
      fits[i].detector = fit(configs[i], train);
    } catch (const Error& e) {
      fits[i].code = e.code();
      fits[i].error = std::string("fit failed: ") + e.what();
    } catch (const std::exception& e) {
      fits[i].error = std::string("fit failed: ") + e.what();
    }
  });

  ScoreTable table;
  table.cells.resize(configs.size() * datasets.size());
  parallel_for(table.cells.size(), jobs, [&](std::size_t idx) {
    const std::size_t ci = idx / datasets.size();
    const std::size_t di = idx % datasets.size();
    ScoreCell& cell = table.cells[idx];
    cell.detector = configs[ci].label();
    cell.dataset = datasets[di].name;
    if (!fits[ci].detector) {
      cell.error_code = fits[ci].code;
      cell.error = fits[ci].error;
      return;
    }
    try {
      cell.scores = fits[ci].detector->score(datasets[di]);
    } catch (const Error& e) {
      cell.error_code = e.code();
      cell.error = e.what();
    } catch (const std::exception& e) {
      cell.error_code = ErrorCode::kInternal;
      cell.error = e.what();
    }
  });
  return table;
}

}  // namespace shiftbench
