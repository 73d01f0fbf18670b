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
#ifndef SHIFTBENCH_TOOLS_CLI_RUN_CONFIG_HPP_
#define SHIFTBENCH_TOOLS_CLI_RUN_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curation.hpp"
#include "detectors.hpp"
#include "evaluation.hpp"

namespace shiftbench::cli {

inline constexpr const char* kDefaultOut = "shiftbench_out";
inline constexpr double kDefaultRejectFraction = 0.75;
inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kDefaultCiMultiplier = 2.0;
inline constexpr std::size_t kDefaultHistBins = 50;
inline constexpr std::size_t kDefaultTopN = 20;
inline constexpr std::size_t kDefaultSanitySeeds = 5;
inline constexpr std::size_t kDefaultImageCount = 200;

struct SanityParams {
  std::size_t seed_count = kDefaultSanitySeeds;
  std::vector<std::uint64_t> seeds;  // explicit list overrides seed_count
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 3;
  std::vector<std::size_t> dims;  // empty -> {H*W*C, 128, 64, 10}
  std::string images;             // NPY, N x (H*W*C); empty -> synthetic
  std::size_t image_count = kDefaultImageCount;
  std::optional<std::vector<double>> noise;
  std::optional<std::vector<double>> blur;
  std::optional<std::vector<double>> zoom;
};

struct CurationParams {
  std::string edges;
  std::string names;
  std::string ids;  // one id per line
  std::optional<std::string> organism_root;
  bool restrict_to_sisters = false;
  bool sisters_first = false;
  BoundaryPolicy policy = BoundaryPolicy::kDeepestPairwiseLca;
};

struct RunConfig {
  std::string out = kDefaultOut;
  unsigned jobs = 1;
  std::uint64_t seed = 0;

  std::string train;
  std::vector<std::string> id_sets;
  std::vector<std::string> ood_sets;
  std::vector<DetectorConfig> detectors;
  std::optional<std::vector<Goal>> goals;  // unset -> every goal the labels permit

  std::string detectors_dir;  // score: fitted detectors; empty -> <out>/detectors

  double reject_fraction = kDefaultRejectFraction;
  std::size_t bins = kDefaultBins;
  double ci_multiplier = kDefaultCiMultiplier;
  std::string reference;
  std::vector<std::string> bin_sets;
  std::vector<std::string> bin_embeddings;
  std::size_t hist_bins = kDefaultHistBins;
  std::string rank_dataset;
  std::string rank_a;
  std::string rank_b;
  std::size_t top_n = kDefaultTopN;

  SanityParams sanity;
  CurationParams curation;

  /// Canonical JSON of every setting that can change an artifact. The
  /// output directory and the job count are left out.
  nlohmann::json canonical() const;
  /// FNV-1a 64 of canonical().dump(), as 16 hex digits.
  std::string hash() const;
};

/// Reads a TOML config; relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

std::string fnv1a64_hex(std::string_view bytes);

}  // namespace shiftbench::cli

#endif  // SHIFTBENCH_TOOLS_CLI_RUN_CONFIG_HPP_
