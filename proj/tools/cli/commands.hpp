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
#ifndef SHIFTBENCH_TOOLS_CLI_COMMANDS_HPP_
#define SHIFTBENCH_TOOLS_CLI_COMMANDS_HPP_

#include "error.hpp"
#include "run_config.hpp"

namespace shiftbench::cli {

// Each command throws shiftbench::Error on failure and writes nothing
// partial: artifacts are only produced once every computation succeeded.
void cmd_fit(const RunConfig& config);
void cmd_score(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_decompose(const RunConfig& config);
void cmd_reject(const RunConfig& config);
void cmd_bins(const RunConfig& config);
void cmd_rankdiff(const RunConfig& config);
void cmd_hist(const RunConfig& config);
void cmd_sanity(const RunConfig& config);
void cmd_curate(const RunConfig& config);

/// 2 config error, 3 data error, 4 numerical error, 1 anything else.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace shiftbench::cli

#endif  // SHIFTBENCH_TOOLS_CLI_COMMANDS_HPP_
