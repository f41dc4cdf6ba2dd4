// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "refsd/errors.hpp"

namespace refsd {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kEmptyCrop: return "empty_crop";
    case ErrorKind::kVocabulary: return "vocabulary";
    case ErrorKind::kSpec: return "spec";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kForbidden: return "forbidden";
    case ErrorKind::kDegenerate: return "degenerate";
  }
  return "unknown";
}

ErrorKind parse_error_kind(std::string_view name) noexcept {
  for (int k = 0; k <= static_cast<int>(ErrorKind::kDegenerate); ++k) {
    if (name == to_string(static_cast<ErrorKind>(k))) return static_cast<ErrorKind>(k);
  }
  return ErrorKind::kProtocol;
}

}  // namespace refsd
