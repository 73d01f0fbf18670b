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
#ifndef SHIFTBENCH_CORE_NPY_HPP_
#define SHIFTBENCH_CORE_NPY_HPP_

// Minimal NPY v1.0 codec. Only little-endian, C-order arrays of rank 1 or 2
// are supported, with element types float32, float64 and int32.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace shiftbench::npy {

enum class DType { kFloat32, kFloat64, kInt32 };

std::size_t dtype_size(DType dtype) noexcept;
const char* dtype_descr(DType dtype) noexcept;

struct Array {
  DType dtype = DType::kFloat32;
  std::vector<std::size_t> shape;
  std::vector<std::byte> payload;

  std::size_t element_count() const noexcept;
};

/// Parses a complete NPY image. Throws Error(kFormat) on any deviation from
/// the supported subset, including trailing or missing payload bytes.
Array decode(std::span<const std::byte> bytes);

/// Canonical encoding: the header dict is written exactly as numpy writes it
/// and padded with spaces so the payload starts on a 64-byte boundary.
std::vector<std::byte> encode(const Array& array);

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Array& array);

// Typed helpers. Element values are copied bit-for-bit.
Array from_f32(std::vector<std::size_t> shape, std::span<const float> values);
Array from_f64(std::vector<std::size_t> shape, std::span<const double> values);
Array from_i32(std::vector<std::size_t> shape,
               std::span<const std::int32_t> values);
std::vector<float> to_f32(const Array& array);
std::vector<double> to_f64(const Array& array);
std::vector<std::int32_t> to_i32(const Array& array);

std::vector<std::byte> read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::byte> bytes);

}  // namespace shiftbench::npy

#endif  // SHIFTBENCH_CORE_NPY_HPP_
