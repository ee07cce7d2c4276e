// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace grafiq {

enum class ErrorCode {
  Dimension = 1,
  Spec,
  CorruptModel,
  BadMagic,
  Truncated,
  Checksum,
  MalformedHeader,
  ShapeMismatch,
  NonFiniteStats,
  NumericOverflow,
  Consistency,
  Usage,
  Decode,
  Io,
  DegenerateEmbedding,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure in the library is reported through this type; the code is
// what the C API and the CLI translate into status values and exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace grafiq
