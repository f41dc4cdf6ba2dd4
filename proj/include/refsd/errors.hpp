// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refsd {

/// Broad failure classes. Every exception thrown by the engine carries one,
/// and the C API maps them one-to-one onto status codes.
enum class ErrorKind {
  kParameter,    // out-of-range scalar argument (sigma, thresholds, counts)
  kShape,        // dimension mismatch, degenerate box, wrong vector length
  kEmptyCrop,    // crop box entirely outside the image
  kVocabulary,   // attribute value not in any registered vocabulary
  kSpec,         // structurally invalid prompt / campaign spec
  kProtocol,     // malformed backend payload or contract violation
  kTransport,    // backend unreachable / timed out (retriable)
  kIo,           // filesystem or codec failure
  kNotFound,
  kConflict,
  kValidation,
  kForbidden,
  kDegenerate,   // statistic undefined for the given data
};

const char* to_string(ErrorKind kind) noexcept;

/// Inverse of to_string; unknown names map to kProtocol.
ErrorKind parse_error_kind(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Backend transport failure tagged with the pipeline stage that issued the
/// call ("estimate", "segment", "render", "generate", "detect_pii", "inpaint").
class TransportError : public Error {
 public:
  TransportError(std::string stage, const std::string& message)
      : Error(ErrorKind::kTransport, "[" + stage + "] " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace refsd
