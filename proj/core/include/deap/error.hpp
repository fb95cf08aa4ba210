// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_ERROR_HPP_
#define DEAP_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace deap {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kInvalidAxis,
  kNonFinite,
  kNonScalarLoss,
  kNonDeterministic,
  kBadMagic,
  kMalformedHeader,
  kPayloadMismatch,
  kIo,
  kDuplicateId,
  kUnknownParameter,
  kConfig,
};

std::string_view error_code_name(ErrorCode code);

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

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace deap

#endif  // DEAP_ERROR_HPP_
