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
#ifndef SHIFTBENCH_CORE_SANITY_HPP_
#define SHIFTBENCH_CORE_SANITY_HPP_

// Random-model sanity check. A randomly initialised network has no notion of
// in-distribution, so any detector built on it should score clean and
// corrupted inputs alike (AUROC near 0.5). The harness measures the deviation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detectors.hpp"
#include "tensor_store.hpp"

namespace shiftbench {

/// H x W x C image, values in [0, 1], stored HWC.
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  ImageTensor() = default;
  ImageTensor(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0);

  std::size_t size() const noexcept { return values.size(); }
  double& at(std::size_t y, std::size_t x, std::size_t c) noexcept {
    return values[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const noexcept {
    return values[(y * width + x) * channels + c];
  }
};

/// Rectifier MLP with zero biases and weights drawn from N(0, 2 / fan_in).
/// Features are the (rectified) output of layer L-1, logits the output of
/// the final linear layer.
class RandomExtractor {
 public:
  RandomExtractor(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Final layer as a linear head (zero bias).
  const LinearHead& head() const noexcept { return head_; }
  /// Weights of hidden layer l (0-based), row-major out x in.
  const std::vector<double>& hidden_weights(std::size_t l) const { return hidden_.at(l); }

  struct Output {
    FeatureMatrix features;
    LogitMatrix logits;
  };
  Output extract(std::span<const ImageTensor> images) const;

 private:
  std::vector<std::size_t> dims_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> hidden_;
  LinearHead head_;
};

/// Additive Gaussian noise per value, clamped to [0, 1].
ImageTensor corrupt_noise(const ImageTensor& img, double sigma, std::uint64_t seed);
/// Separable Gaussian blur, radius ceil(3 sigma), reflect padding.
ImageTensor corrupt_blur(const ImageTensor& img, double sigma);
/// Centre crop to 1/factor of each spatial side, bilinear resize back.
ImageTensor corrupt_zoom(const ImageTensor& img, double factor);

/// Normalised 1-D Gaussian kernel of radius ceil(3 sigma), index 0 = -radius.
std::vector<double> gaussian_kernel(double sigma);

enum class CorruptionKind { kIdentity, kNoise, kBlur, kZoom };

const char* corruption_kind_name(CorruptionKind kind) noexcept;

struct Corruption {
  CorruptionKind kind = CorruptionKind::kIdentity;
  double severity = 0.0;

  std::string name() const { return corruption_kind_name(kind); }
  ImageTensor apply(const ImageTensor& img, std::uint64_t stream_seed) const;
};

/// noise sigma {0.05, 0.1, 0.2}, blur sigma {1, 2, 4}, zoom {1.3, 1.6, 2}.
std::vector<Corruption> default_corruptions();

/// Smooth random images (sums of low-frequency sinusoids) for runs without
/// an image file.
std::vector<ImageTensor> synthetic_images(std::size_t count, std::size_t height, std::size_t width,
                                          std::size_t channels, std::uint64_t seed);

struct SanityConfig {
  std::vector<std::size_t> layer_dims;
  std::vector<std::uint64_t> extractor_seeds;
  std::uint64_t master_seed = 0;
  unsigned jobs = 1;
};

struct SanityCell {
  std::uint64_t seed = 0;
  std::string corruption;
  double severity = 0.0;
  std::string detector;
  std::optional<double> auroc;
  std::size_t n = 0;  // images per pool
  std::string error;
};

/// One cell per (seed, corruption, detector), seed-major. Each detector is
/// fitted on the clean batch, which is also the ID pool; the corrupted batch
/// is the OOD pool.
std::vector<SanityCell> sanity_run(const SanityConfig& config, std::span<const ImageTensor> clean,
                                   std::span<const Corruption> corruptions,
                                   std::span<const DetectorConfig> detectors);

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_SANITY_HPP_
