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
#ifndef SHIFTBENCH_TOOLS_CLI_TOML_LITE_HPP_
#define SHIFTBENCH_TOOLS_CLI_TOML_LITE_HPP_

// Reader for the TOML subset used by run configs: [table] and [[array]]
// headers, bare keys, basic strings, integers, floats, booleans and arrays
// of those (arrays may span lines). Inline tables, dotted keys, literal and
// multi-line strings and dates are not supported.

#include <string_view>

#include <json.hpp>

namespace shiftbench::cli {

/// Throws Error(kConfig) with a line number on malformed input.
nlohmann::json parse_toml(std::string_view text);

}  // namespace shiftbench::cli

#endif  // SHIFTBENCH_TOOLS_CLI_TOML_LITE_HPP_
