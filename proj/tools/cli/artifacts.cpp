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
#include "artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <system_error>

#include "error.hpp"
#include "version.hpp"

namespace shiftbench::cli {

namespace fs = std::filesystem;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

OutputDir::OutputDir(const RunConfig& config, std::string command)
    : root_(fs::path(config.out).lexically_normal()),
      command_(std::move(command)),
      hash_(config.hash()),
      seed_(config.seed),
      config_(config.canonical()) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_))
    fail(ErrorCode::kIo, "cannot create output directory " + root_.string());
}

std::string OutputDir::meta_line() const {
  return "# shiftbench " + std::string(kVersion) + " config_hash=" + hash_ +
         " seed=" + std::to_string(seed_) + "\n";
}

nlohmann::json OutputDir::meta() const {
  return {{"version", kVersion}, {"config_hash", hash_}, {"seed", seed_}, {"command", command_}};
}

fs::path OutputDir::resolve(const std::string& rel) const {
  fs::path p = fs::path(rel).lexically_normal();
  if (p.empty() || p.is_absolute() || *p.begin() == "..")
    fail(ErrorCode::kInternal, "artifact path escapes the output directory: " + rel);
  return root_ / p;
}

void OutputDir::write_text(const std::string& rel, const std::string& text) {
  fs::path p = resolve(rel);
  fs::create_directories(p.parent_path());
  npy::write_file_atomic(p, std::as_bytes(std::span<const char>(text.data(), text.size())));
  outputs_.push_back(fs::path(rel).lexically_normal().generic_string());
}

void OutputDir::write_csv(const std::string& rel, const std::string& body) {
  write_text(rel, meta_line() + body);
}

void OutputDir::write_json(const std::string& rel, nlohmann::json doc) {
  doc["meta"] = meta();
  write_text(rel, doc.dump(2) + "\n");
}

void OutputDir::write_npy(const std::string& rel, const npy::Array& array) {
  fs::path p = resolve(rel);
  fs::create_directories(p.parent_path());
  npy::write_file_atomic(p, npy::encode(array));
  outputs_.push_back(fs::path(rel).lexically_normal().generic_string());
}

void OutputDir::write_detector(const std::string& rel_dir, const FittedDetector& detector) {
  fs::path final_dir = resolve(rel_dir);
  fs::path tmp = final_dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  save_detector(detector, tmp);
  nlohmann::json stamp = meta();
  stamp["detector"] = detector_spec(detector.config());
  const std::string text = stamp.dump(2) + "\n";
  npy::write_file_atomic(tmp / "meta.json",
                         std::as_bytes(std::span<const char>(text.data(), text.size())));
  fs::remove_all(final_dir);
  fs::rename(tmp, final_dir);
  outputs_.push_back(fs::path(rel_dir).lexically_normal().generic_string() + "/");
}

void OutputDir::add_input(const fs::path& path) {
  std::string digest;
  std::uintmax_t size = 0;
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) {
    auto bytes = npy::read_file(path);
    size = bytes.size();
    digest = fnv1a64_hex(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  inputs_.push_back({{"path", path.generic_string()}, {"bytes", size}, {"fnv1a64", digest}});
}

void OutputDir::finish(nlohmann::json extra) {
  nlohmann::json doc = std::move(extra);
  doc["config"] = config_;
  doc["inputs"] = inputs_;
  doc["outputs"] = outputs_;
  write_json("manifests/" + command_ + ".json", std::move(doc));
}

}  // namespace shiftbench::cli
