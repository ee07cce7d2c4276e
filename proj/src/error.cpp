// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/error.hpp"

namespace grafiq {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::Spec: return "spec";
    case ErrorCode::CorruptModel: return "corrupt-model";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::Checksum: return "checksum";
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::NonFiniteStats: return "non-finite-stats";
    case ErrorCode::NumericOverflow: return "numeric-overflow";
    case ErrorCode::Consistency: return "consistency";
    case ErrorCode::Usage: return "usage";
    case ErrorCode::Decode: return "decode";
    case ErrorCode::Io: return "io";
    case ErrorCode::DegenerateEmbedding: return "degenerate-embedding";
  }
  return "unknown";
}

}  // namespace grafiq
