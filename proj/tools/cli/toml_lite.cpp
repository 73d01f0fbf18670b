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
#include "toml_lite.hpp"

#include <cctype>
#include <cstdlib>
#include <limits>
#include <string>

#include "error.hpp"

namespace shiftbench::cli {

namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  json run() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kConfig, "config line " + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char take() {
    char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!at_end() && peek() != '\n') ++pos_;
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        take();
        continue;
      }
      break;
    }
  }

  // Whitespace, comments and newlines, for use inside arrays.
  void skip_any() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r' || peek() == '\n') {
        take();
        continue;
      }
      break;
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') error("unexpected text after value");
    take();
  }

  std::string bare_key() {
    std::string key;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                         peek() == '-'))
      key += take();
    if (key.empty()) error("expected a key");
    return key;
  }

  json* header(json& root) {
    take();
    bool array = peek() == '[';
    if (array) take();
    skip_spaces();
    std::string name = bare_key();
    skip_spaces();
    if (take() != ']' || (array && take() != ']')) error("malformed table header");
    if (array) {
      json& slot = root[name];
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) error("'" + name + "' is not an array of tables");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (root.contains(name)) error("table '" + name + "' defined twice");
    root[name] = json::object();
    return &root[name];
  }

  void key_value(json& table) {
    std::string key = bare_key();
    skip_spaces();
    if (peek() != '=') error("expected '=' after '" + key + "'");
    take();
    skip_spaces();
    if (table.contains(key)) error("duplicate key '" + key + "'");
    table[key] = value();
  }

  json value() {
    char c = peek();
    if (c == '"') return string_value();
    if (c == '[') return array_value();
    std::string token;
    while (!at_end() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' &&
           peek() != '\r' && peek() != ' ' && peek() != '\t')
      token += take();
    if (token == "true") return true;
    if (token == "false") return false;
    if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
    if (token.empty()) error("missing value");
    std::string digits;
    for (char ch : token)
      if (ch != '_') digits += ch;
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    char* end = nullptr;
    if (is_float) {
      double v = std::strtod(digits.c_str(), &end);
      if (*end != '\0') error("invalid number '" + token + "'");
      return v;
    }
    long long v = std::strtoll(digits.c_str(), &end, 10);
    if (*end != '\0' || digits == "+" || digits == "-") error("invalid value '" + token + "'");
    return v;
  }

  json string_value() {
    take();
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') error("unterminated string");
      char c = take();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (at_end()) error("unterminated escape");
      char e = take();
      switch (e) {
        case 'n':
          out += '\n';
          break;
        case 't':
          out += '\t';
          break;
        case '"':
          out += '"';
          break;
        case '\\':
          out += '\\';
          break;
        default:
          error(std::string("unsupported escape '\\") + e + "'");
      }
    }
    return out;
  }

  json array_value() {
    take();
    json arr = json::array();
    skip_any();
    while (peek() != ']') {
      if (at_end()) error("unterminated array");
      arr.push_back(value());
      skip_any();
      if (peek() == ',') {
        take();
        skip_any();
      } else if (peek() != ']') {
        error("expected ',' or ']' in array");
      }
    }
    take();
    return arr;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Parser(text).run(); }

}  // namespace shiftbench::cli
