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
#include "npy.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <string_view>

#include "error.hpp"

namespace shiftbench::npy {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are copied verbatim; a little-endian host is required");

namespace {

constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreambleLen = kMagicLen + 2 + 2;
constexpr std::size_t kAlign = 64;
constexpr std::size_t kGrowthAxisMaxDigits = 21;
constexpr unsigned char kMagic[kMagicLen] = {0x93, 'N', 'U', 'M', 'P', 'Y'};

[[noreturn]] void format_error(const std::string& what) {
  fail(ErrorCode::kFormat, "npy: " + what);
}

// Recursive-descent reader for the python dict literal in an NPY header.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  void parse(std::optional<std::string>& descr, std::optional<bool>& fortran,
             std::optional<std::vector<std::size_t>>& shape) {
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        if (descr) format_error("duplicate key 'descr'");
        descr = parse_string();
      } else if (key == "fortran_order") {
        if (fortran) format_error("duplicate key 'fortran_order'");
        fortran = parse_bool();
      } else if (key == "shape") {
        if (shape) format_error("duplicate key 'shape'");
        shape = parse_tuple();
      } else {
        format_error("unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      expect('}');
      break;
    }
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t'))
      ++pos_;
    if (pos_ + 1 != text_.size() || text_[pos_] != '\n')
      format_error("header must end with a newline after the dict");
  }

 private:
  char peek() const {
    if (pos_ >= text_.size()) format_error("truncated header dict");
    return text_[pos_];
  }
  void expect(char c) {
    if (peek() != c) format_error(std::string("expected '") + c + "' in header");
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '\n')
      ++pos_;
  }
  std::string parse_string() {
    char quote = peek();
    if (quote != '\'' && quote != '"') format_error("expected quoted string in header");
    ++pos_;
    std::size_t end = text_.find(quote, pos_);
    if (end == std::string_view::npos) format_error("unterminated string in header");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }
  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    format_error("expected True or False for 'fortran_order'");
  }
  std::vector<std::size_t> parse_tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek())))
        format_error("malformed shape tuple");
      std::size_t value = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        std::size_t digit = static_cast<std::size_t>(text_[pos_] - '0');
        if (value > (std::numeric_limits<std::size_t>::max() - digit) / 10)
          format_error("shape dimension overflows");
        value = value * 10 + digit;
        ++pos_;
      }
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      expect(')');
      break;
    }
    return dims;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::optional<DType> dtype_from_descr(const std::string& descr) {
  if (descr == "<f4") return DType::kFloat32;
  if (descr == "<f8") return DType::kFloat64;
  if (descr == "<i4") return DType::kInt32;
  return std::nullopt;
}

std::string shape_repr(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  out += ")";
  return out;
}

void check_type(const Array& array, DType expected) {
  if (array.dtype != expected)
    format_error(std::string("expected dtype ") + dtype_descr(expected) + ", found " +
                 dtype_descr(array.dtype));
}

template <typename T>
Array make_array(DType dtype, std::vector<std::size_t> shape, std::span<const T> values) {
  Array array;
  array.dtype = dtype;
  array.shape = std::move(shape);
  if (array.element_count() != values.size())
    fail(ErrorCode::kShape, "npy: shape does not match value count");
  array.payload.resize(values.size_bytes());
  if (!values.empty()) std::memcpy(array.payload.data(), values.data(), values.size_bytes());
  return array;
}

template <typename T>
std::vector<T> copy_out(const Array& array) {
  std::vector<T> out(array.element_count());
  if (!out.empty()) std::memcpy(out.data(), array.payload.data(), out.size() * sizeof(T));
  return out;
}

}  // namespace

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::kFloat32:
      return 4;
    case DType::kFloat64:
      return 8;
    case DType::kInt32:
      return 4;
  }
  return 0;
}

const char* dtype_descr(DType dtype) noexcept {
  switch (dtype) {
    case DType::kFloat32:
      return "<f4";
    case DType::kFloat64:
      return "<f8";
    case DType::kInt32:
      return "<i4";
  }
  return "?";
}

std::size_t Array::element_count() const noexcept {
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  return count;
}

Array decode(std::span<const std::byte> bytes) {
  if (bytes.size() < kPreambleLen) format_error("file shorter than the NPY preamble");
  if (std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) format_error("bad magic string");
  auto major = static_cast<unsigned>(bytes[6]);
  auto minor = static_cast<unsigned>(bytes[7]);
  if (major != 1 || minor != 0)
    format_error("unsupported version " + std::to_string(major) + "." + std::to_string(minor));
  std::size_t header_len = static_cast<std::size_t>(bytes[8]) |
                           (static_cast<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < kPreambleLen + header_len) format_error("truncated header");
  std::string_view header(reinterpret_cast<const char*>(bytes.data() + kPreambleLen),
                          header_len);

  std::optional<std::string> descr;
  std::optional<bool> fortran;
  std::optional<std::vector<std::size_t>> shape;
  HeaderParser(header).parse(descr, fortran, shape);
  if (!descr || !fortran || !shape) format_error("header is missing a required key");
  if (*fortran) format_error("fortran_order arrays are not supported");
  auto dtype = dtype_from_descr(*descr);
  if (!dtype) format_error("unsupported descr '" + *descr + "'");
  if (shape->empty() || shape->size() > 2)
    format_error("only 1-D and 2-D arrays are supported, got rank " +
                 std::to_string(shape->size()));

  Array array;
  array.dtype = *dtype;
  array.shape = std::move(*shape);
  std::size_t count = 1;
  for (std::size_t d : array.shape) {
    if (d != 0 && count > std::numeric_limits<std::size_t>::max() / d)
      format_error("shape element count overflows");
    count *= d;
  }
  std::size_t elem = dtype_size(array.dtype);
  if (count > std::numeric_limits<std::size_t>::max() / elem)
    format_error("payload size overflows");
  std::size_t expected = count * elem;
  std::size_t available = bytes.size() - kPreambleLen - header_len;
  if (available != expected)
    format_error("header declares " + std::to_string(count) + " values (" +
                 std::to_string(expected) + " bytes) but payload has " +
                 std::to_string(available) + " bytes");
  auto payload = bytes.subspan(kPreambleLen + header_len);
  array.payload.assign(payload.begin(), payload.end());
  return array;
}

std::vector<std::byte> encode(const Array& array) {
  if (array.shape.empty() || array.shape.size() > 2)
    fail(ErrorCode::kShape, "npy: only 1-D and 2-D arrays can be written");
  if (array.payload.size() != array.element_count() * dtype_size(array.dtype))
    fail(ErrorCode::kShape, "npy: payload size does not match shape");

  std::string header = "{'descr': '";
  header += dtype_descr(array.dtype);
  header += "', 'fortran_order': False, 'shape': ";
  header += shape_repr(array.shape);
  header += ", }";
  header.append(kGrowthAxisMaxDigits - std::to_string(array.shape.front()).size(), ' ');
  std::size_t hlen = header.size() + 1;
  std::size_t pad = kAlign - ((kPreambleLen + hlen) % kAlign);
  header.append(pad, ' ');
  header += '\n';
  if (header.size() > 0xFFFF) fail(ErrorCode::kShape, "npy: header too large for v1.0");

  std::vector<std::byte> out;
  out.reserve(kPreambleLen + header.size() + array.payload.size());
  for (unsigned char c : kMagic) out.push_back(static_cast<std::byte>(c));
  out.push_back(std::byte{1});
  out.push_back(std::byte{0});
  out.push_back(static_cast<std::byte>(header.size() & 0xFF));
  out.push_back(static_cast<std::byte>((header.size() >> 8) & 0xFF));
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), array.payload.begin(), array.payload.end());
  return out;
}

Array read(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write(const std::filesystem::path& path, const Array& array) {
  auto bytes = encode(array);
  write_file_atomic(path, bytes);
}

Array from_f32(std::vector<std::size_t> shape, std::span<const float> values) {
  return make_array(DType::kFloat32, std::move(shape), values);
}
Array from_f64(std::vector<std::size_t> shape, std::span<const double> values) {
  return make_array(DType::kFloat64, std::move(shape), values);
}
Array from_i32(std::vector<std::size_t> shape, std::span<const std::int32_t> values) {
  return make_array(DType::kInt32, std::move(shape), values);
}

std::vector<float> to_f32(const Array& array) {
  check_type(array, DType::kFloat32);
  return copy_out<float>(array);
}
std::vector<double> to_f64(const Array& array) {
  check_type(array, DType::kFloat64);
  return copy_out<double>(array);
}
std::vector<std::int32_t> to_i32(const Array& array) {
  check_type(array, DType::kInt32);
  return copy_out<std::int32_t>(array);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  auto size = in.tellg();
  if (size < 0) fail(ErrorCode::kIo, "cannot size '" + path.string() + "'");
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  if (!bytes.empty() && !in.read(reinterpret_cast<char*>(bytes.data()), size))
    fail(ErrorCode::kIo, "short read on '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  auto tmp = path;
  static std::atomic<unsigned long> counter{0};
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "write failed on '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::kIo, "cannot move temporary file onto '" + path.string() + "'");
  }
}

}  // namespace shiftbench::npy
