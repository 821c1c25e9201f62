// Copyright 2026 The Meadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MEADOW_ERRORS_H_
#define MEADOW_ERRORS_H_

#include <stdexcept>
#include <string>

namespace meadow {

enum class ErrorCode {
  kAllZero,
  kNegativeWeight,
  kNonPositiveEpsilon,
  kGridMismatch,
  kWrongDimensionality,
  kFlowInfeasible,
  kInfeasibleConstraint,
  kModelEvalFailure,
  kShapeMismatch,
  kNonFiniteInput,
  kTapeConsumed,
  kNonFiniteGradient,
  kSingleMember,
  kEmptyBuffer,
  kEmptyScanPlan,
  kUnsafeInitialDistribution,
  kDivergedObjective,
  kConfig,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

// all library failures are reported as meadow::Error
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace meadow

#endif  // MEADOW_ERRORS_H_
