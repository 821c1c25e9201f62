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

#include "meadow/errors.h"

namespace meadow {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAllZero: return "AllZero";
    case ErrorCode::kNegativeWeight: return "NegativeWeight";
    case ErrorCode::kNonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kWrongDimensionality: return "WrongDimensionality";
    case ErrorCode::kFlowInfeasible: return "FlowInfeasible";
    case ErrorCode::kInfeasibleConstraint: return "InfeasibleConstraint";
    case ErrorCode::kModelEvalFailure: return "ModelEvalFailure";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kTapeConsumed: return "TapeConsumed";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kSingleMember: return "SingleMember";
    case ErrorCode::kEmptyBuffer: return "EmptyBuffer";
    case ErrorCode::kEmptyScanPlan: return "EmptyScanPlan";
    case ErrorCode::kUnsafeInitialDistribution: return "UnsafeInitialDistribution";
    case ErrorCode::kDivergedObjective: return "DivergedObjective";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace meadow
