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
#include "error.hpp"

namespace shiftbench {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kFormat:
      return "format";
    case ErrorCode::kValidation:
      return "validation";
    case ErrorCode::kManifest:
      return "manifest";
    case ErrorCode::kConsistency:
      return "consistency";
    case ErrorCode::kShape:
      return "shape";
    case ErrorCode::kConfig:
      return "config";
    case ErrorCode::kNumerical:
      return "numerical";
    case ErrorCode::kUndefinedMetric:
      return "undefined_metric";
    case ErrorCode::kContamination:
      return "contamination";
    case ErrorCode::kHierarchy:
      return "hierarchy";
    case ErrorCode::kMissingInput:
      return "missing_input";
    case ErrorCode::kInternal:
      return "internal";
  }
  return "unknown";
}

}  // namespace shiftbench
