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
#ifndef SHIFTBENCH_TOOLS_CLI_ARTIFACTS_HPP_
#define SHIFTBENCH_TOOLS_CLI_ARTIFACTS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "detectors.hpp"
#include "npy.hpp"
#include "run_config.hpp"

namespace shiftbench::cli {

/// "%.17g", or an empty string for an unset value.
std::string fmt(double v);
std::string fmt(const std::optional<double>& v);
/// RFC 4180 quoting when the field needs it.
std::string csv_field(const std::string& s);

/// Every file a command produces goes through this class: paths are kept
/// under the output root, writes are atomic, and each artifact carries the
/// config hash, master seed and toolkit version.
class OutputDir {
 public:
  OutputDir(const RunConfig& config, std::string command);

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Header comment for CSV files.
  std::string meta_line() const;
  nlohmann::json meta() const;

  void write_text(const std::string& rel, const std::string& text);
  /// Prepends meta_line(). `body` starts with the column header.
  void write_csv(const std::string& rel, const std::string& body);
  /// Adds a "meta" member to `doc`.
  void write_json(const std::string& rel, nlohmann::json doc);
  void write_npy(const std::string& rel, const npy::Array& array);
  void write_detector(const std::string& rel_dir, const FittedDetector& detector);

  void add_input(const std::filesystem::path& path);
  /// Writes manifests/<command>.json listing the inputs, outputs and `extra`.
  void finish(nlohmann::json extra = nlohmann::json::object());

 private:
  std::filesystem::path resolve(const std::string& rel) const;

  std::filesystem::path root_;
  std::string command_;
  std::string hash_;
  std::uint64_t seed_;
  nlohmann::json config_;
  std::vector<std::string> outputs_;
  nlohmann::json inputs_ = nlohmann::json::array();
};

}  // namespace shiftbench::cli

#endif  // SHIFTBENCH_TOOLS_CLI_ARTIFACTS_HPP_
