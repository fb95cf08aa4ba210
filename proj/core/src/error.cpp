// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/error.hpp"

namespace deap {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kInvalidAxis: return "invalid_axis";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kNonScalarLoss: return "non_scalar_loss";
    case ErrorCode::kNonDeterministic: return "non_deterministic";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kMalformedHeader: return "malformed_header";
    case ErrorCode::kPayloadMismatch: return "payload_mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kUnknownParameter: return "unknown_parameter";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace deap
