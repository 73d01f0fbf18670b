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
#ifndef SHIFTBENCH_CORE_ERROR_HPP_
#define SHIFTBENCH_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace shiftbench {

/// Error categories shared by every module. The numeric values are mirrored
/// by the SB_ERR_* constants of the C API.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kValidation = 4,
  kManifest = 5,
  kConsistency = 6,
  kShape = 7,
  kConfig = 8,
  kNumerical = 9,
  kUndefinedMetric = 10,
  kContamination = 11,
  kHierarchy = 12,
  kMissingInput = 13,
  kInternal = 14,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace shiftbench

#endif  // SHIFTBENCH_CORE_ERROR_HPP_
