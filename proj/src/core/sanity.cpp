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
#include "sanity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"
#include "evaluation.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace shiftbench {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = ((i % period) + period) % period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

// One separable pass along rows (horizontal) or columns (vertical). Each
// output is written as centre + sum w_i (neighbour - centre), which equals the
// plain weighted sum when the weights add to one and leaves constant regions
// bit-exact.
ImageTensor blur_pass(const ImageTensor& in, const std::vector<double>& kernel, bool horizontal) {
  ImageTensor out = in;
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t extent = horizontal ? in.width : in.height;
  for (std::size_t y = 0; y < in.height; ++y) {
    for (std::size_t x = 0; x < in.width; ++x) {
      for (std::size_t c = 0; c < in.channels; ++c) {
        const double centre = in.at(y, x, c);
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          if (k == 0) continue;
          const auto pos = static_cast<std::ptrdiff_t>(horizontal ? x : y) + k;
          const std::size_t r = reflect_index(pos, extent);
          const double v = horizontal ? in.at(y, r, c) : in.at(r, x, c);
          acc += kernel[static_cast<std::size_t>(k + radius)] * (v - centre);
        }
        out.at(y, x, c) = centre + acc;
      }
    }
  }
  return out;
}

void check_image(const ImageTensor& img) {
  if (img.height == 0 || img.width == 0 || img.channels == 0 ||
      img.values.size() != img.height * img.width * img.channels)
    fail(ErrorCode::kShape, "image tensor has an invalid shape");
}

}  // namespace

ImageTensor::ImageTensor(std::size_t h, std::size_t w, std::size_t c, double fill)
    : height(h), width(w), channels(c), values(h * w * c, fill) {}

RandomExtractor::RandomExtractor(std::vector<std::size_t> layer_dims, std::uint64_t seed)
    : dims_(std::move(layer_dims)), seed_(seed) {
  if (dims_.size() < 3)
    fail(ErrorCode::kConfig, "extractor needs at least [input, hidden, classes] dimensions");
  for (std::size_t d : dims_)
    if (d == 0) fail(ErrorCode::kConfig, "extractor layer dimensions must be positive");
  Xoshiro256 rng(seed_);
  const std::size_t layers = dims_.size() - 1;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(dims_[l]));
    std::vector<double> w(dims_[l + 1] * dims_[l]);
    for (double& v : w) v = sd * rng.normal();
    hidden_.push_back(std::move(w));
  }
  const std::size_t fan_in = dims_[layers - 1];
  const std::size_t classes = dims_[layers];
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<float> w(classes * fan_in);
  for (float& v : w) v = static_cast<float>(sd * rng.normal());
  head_.weights = Matrix(classes, fan_in, std::move(w), "random_head");
  head_.bias.assign(classes, 0.0f);
}

RandomExtractor::Output RandomExtractor::extract(std::span<const ImageTensor> images) const {
  const std::size_t n = images.size();
  const std::size_t feat_dim = dims_[dims_.size() - 2];
  const std::size_t classes = dims_.back();
  std::vector<float> feats(n * feat_dim);
  std::vector<float> logits(n * classes);
  std::vector<double> z(feat_dim);
  std::vector<double> l(classes);
  for (std::size_t i = 0; i < n; ++i) {
    if (images[i].size() != dims_.front())
      fail(ErrorCode::kShape, "image " + std::to_string(i) + " flattens to " +
                                  std::to_string(images[i].size()) + " values, extractor expects " +
                                  std::to_string(dims_.front()));
    std::vector<double> x = images[i].values;
    for (std::size_t layer = 0; layer < hidden_.size(); ++layer) {
      const std::size_t in = dims_[layer];
      const std::size_t out = dims_[layer + 1];
      std::vector<double> next(out);
      const auto& w = hidden_[layer];
      for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (std::size_t k = 0; k < in; ++k) acc += w[o * in + k] * x[k];
        next[o] = std::max(acc, 0.0);
      }
      x = std::move(next);
    }
    for (std::size_t j = 0; j < feat_dim; ++j) {
      feats[i * feat_dim + j] = static_cast<float>(x[j]);
      z[j] = feats[i * feat_dim + j];
    }
    head_.apply(z, l);
    for (std::size_t c = 0; c < classes; ++c) logits[i * classes + c] = static_cast<float>(l[c]);
  }
  return {FeatureMatrix(n, feat_dim, std::move(feats), "random_features"),
          LogitMatrix(n, classes, std::move(logits), "random_logits")};
}

ImageTensor corrupt_noise(const ImageTensor& img, double sigma, std::uint64_t seed) {
  check_image(img);
  if (!(sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "noise sigma must be nonnegative");
  if (sigma == 0.0) return img;
  ImageTensor out = img;
  Xoshiro256 rng(seed);
  for (double& v : out.values) v = clamp01(v + sigma * rng.normal());
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

ImageTensor corrupt_blur(const ImageTensor& img, double sigma) {
  check_image(img);
  if (!(sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "blur sigma must be nonnegative");
  if (sigma == 0.0) return img;
  auto kernel = gaussian_kernel(sigma);
  ImageTensor out = blur_pass(blur_pass(img, kernel, true), kernel, false);
  for (double& v : out.values) v = clamp01(v);
  return out;
}

ImageTensor corrupt_zoom(const ImageTensor& img, double factor) {
  check_image(img);
  if (!(factor >= 1.0) || !std::isfinite(factor))
    fail(ErrorCode::kInvalidArgument, "zoom factor must be >= 1");
  const auto crop_h = static_cast<std::size_t>(std::floor(static_cast<double>(img.height) / factor));
  const auto crop_w = static_cast<std::size_t>(std::floor(static_cast<double>(img.width) / factor));
  if (crop_h < 1 || crop_w < 1)
    fail(ErrorCode::kInvalidArgument, "zoom crop is smaller than one pixel");
  const std::size_t oy = (img.height - crop_h) / 2;
  const std::size_t ox = (img.width - crop_w) / 2;
  const double scale_y = static_cast<double>(crop_h) / static_cast<double>(img.height);
  const double scale_x = static_cast<double>(crop_w) / static_cast<double>(img.width);

  // Half-pixel-centre bilinear sampling of the crop, clamped at its border.
  auto source = [](std::size_t dst, double scale, std::size_t extent, std::size_t& i0,
                   std::size_t& i1, double& t) {
    double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(extent - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, extent - 1);
    t = s - static_cast<double>(i0);
  };

  ImageTensor out(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    std::size_t y0, y1;
    double ty;
    source(y, scale_y, crop_h, y0, y1, ty);
    for (std::size_t x = 0; x < img.width; ++x) {
      std::size_t x0, x1;
      double tx;
      source(x, scale_x, crop_w, x0, x1, tx);
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double a = img.at(oy + y0, ox + x0, c);
        const double b = img.at(oy + y0, ox + x1, c);
        const double d = img.at(oy + y1, ox + x0, c);
        const double e = img.at(oy + y1, ox + x1, c);
        const double top = a + tx * (b - a);
        const double bottom = d + tx * (e - d);
        out.at(y, x, c) = clamp01(top + ty * (bottom - top));
      }
    }
  }
  return out;
}

const char* corruption_kind_name(CorruptionKind kind) noexcept {
  switch (kind) {
    case CorruptionKind::kIdentity:
      return "identity";
    case CorruptionKind::kNoise:
      return "noise";
    case CorruptionKind::kBlur:
      return "blur";
    case CorruptionKind::kZoom:
      return "zoom";
  }
  return "?";
}

ImageTensor Corruption::apply(const ImageTensor& img, std::uint64_t stream_seed) const {
  switch (kind) {
    case CorruptionKind::kIdentity:
      return img;
    case CorruptionKind::kNoise:
      return corrupt_noise(img, severity, stream_seed);
    case CorruptionKind::kBlur:
      return corrupt_blur(img, severity);
    case CorruptionKind::kZoom:
      return corrupt_zoom(img, severity);
  }
  fail(ErrorCode::kInternal, "unknown corruption kind");
}

std::vector<Corruption> default_corruptions() {
  std::vector<Corruption> out;
  for (double s : {0.05, 0.1, 0.2}) out.push_back({CorruptionKind::kNoise, s});
  for (double s : {1.0, 2.0, 4.0}) out.push_back({CorruptionKind::kBlur, s});
  for (double s : {1.3, 1.6, 2.0}) out.push_back({CorruptionKind::kZoom, s});
  return out;
}

std::vector<ImageTensor> synthetic_images(std::size_t count, std::size_t height, std::size_t width,
                                          std::size_t channels, std::uint64_t seed) {
  std::vector<ImageTensor> out;
  out.reserve(count);
  constexpr int kWaves = 3;
  for (std::size_t i = 0; i < count; ++i) {
    Xoshiro256 rng(derive_seed(seed, {i}));
    ImageTensor img(height, width, channels);
    for (std::size_t c = 0; c < channels; ++c) {
      double amp[kWaves], fy[kWaves], fx[kWaves], phase[kWaves];
      for (int k = 0; k < kWaves; ++k) {
        amp[k] = 0.15 * rng.uniform();
        fy[k] = 2.0 * rng.uniform();
        fx[k] = 2.0 * rng.uniform();
        phase[k] = 2.0 * std::numbers::pi * rng.uniform();
      }
      const double base = 0.3 + 0.4 * rng.uniform();
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          double v = base;
          for (int k = 0; k < kWaves; ++k)
            v += amp[k] * std::sin(2.0 * std::numbers::pi *
                                       (fy[k] * static_cast<double>(y) / static_cast<double>(height) +
                                        fx[k] * static_cast<double>(x) / static_cast<double>(width)) +
                                   phase[k]);
          img.at(y, x, c) = clamp01(v);
        }
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<SanityCell> sanity_run(const SanityConfig& config, std::span<const ImageTensor> clean,
                                   std::span<const Corruption> corruptions,
                                   std::span<const DetectorConfig> detectors) {
  if (clean.empty()) fail(ErrorCode::kMissingInput, "sanity run needs a clean image batch");
  if (config.extractor_seeds.empty()) fail(ErrorCode::kConfig, "sanity run needs extractor seeds");
  for (const auto& img : clean) check_image(img);
  if (config.layer_dims.empty() || config.layer_dims.front() != clean.front().size())
    fail(ErrorCode::kShape, "extractor input dimension does not match the flattened image size");

  struct SeedState {
    DatasetBundle train;
    std::vector<std::optional<FittedDetector>> fits;
    std::vector<std::optional<ScoreVector>> clean_scores;
    std::vector<std::string> errors;
    std::optional<RandomExtractor> extractor;
  };
  const std::size_t seeds = config.extractor_seeds.size();
  std::vector<SeedState> states(seeds);
  parallel_for(seeds, config.jobs, [&](std::size_t s) {
    SeedState& st = states[s];
    st.extractor.emplace(config.layer_dims, config.extractor_seeds[s]);
    auto out = st.extractor->extract(clean);
    st.train.name = "clean";
    st.train.role = Role::kTrainId;
    st.train.labels = LabelVector(predictions(out.logits));
    st.train.features = std::move(out.features);
    st.train.logits = std::move(out.logits);
    st.train.head = st.extractor->head();
    st.fits.resize(detectors.size());
    st.clean_scores.resize(detectors.size());
    st.errors.resize(detectors.size());
    for (std::size_t d = 0; d < detectors.size(); ++d) {
      try {
        st.fits[d] = fit(detectors[d], st.train);
        st.clean_scores[d] = st.fits[d]->score(st.train);
      } catch (const std::exception& e) {
        st.errors[d] = e.what();
      }
    }
  });

  const std::size_t k_count = corruptions.size();
  const std::size_t d_count = detectors.size();
  std::vector<SanityCell> cells(seeds * k_count * d_count);
  parallel_for(seeds * k_count, config.jobs, [&](std::size_t idx) {
    const std::size_t s = idx / k_count;
    const std::size_t k = idx % k_count;
    const SeedState& st = states[s];
    std::vector<ImageTensor> corrupted;
    corrupted.reserve(clean.size());
    for (std::size_t j = 0; j < clean.size(); ++j)
      corrupted.push_back(corruptions[k].apply(clean[j], derive_seed(config.master_seed, {s, k, j})));
    DatasetBundle shifted;
    shifted.name = corruptions[k].name();
    shifted.role = Role::kCovariateShift;
    auto out = st.extractor->extract(corrupted);
    shifted.features = std::move(out.features);
    shifted.logits = std::move(out.logits);
    shifted.head = st.extractor->head();

    for (std::size_t d = 0; d < d_count; ++d) {
      SanityCell& cell = cells[idx * d_count + d];
      cell.seed = config.extractor_seeds[s];
      cell.corruption = corruptions[k].name();
      cell.severity = corruptions[k].severity;
      cell.detector = detectors[d].label();
      cell.n = clean.size();
      if (!st.fits[d] || !st.clean_scores[d]) {
        cell.error = st.errors[d];
        continue;
      }
      try {
        auto ood = st.fits[d]->score(shifted);
        cell.auroc = auroc(st.clean_scores[d]->values, ood.values).auroc;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  });
  return cells;
}

}  // namespace shiftbench
