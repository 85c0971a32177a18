// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cama {

enum class ErrorKind {
    MalformedRecord,
    DanglingFunction,
    DuplicateKey,
    CodeTooLong,
    MissingField,
    NoNumericScore,
    NothingFits,
    TransportError,
    ProtocolError,
    BudgetExceeded,
    CacheCorrupt,
    EmptyVector,
    LengthMismatch,
    UnsupportedSupport,
    CoverageMismatch,
    AccuracyGate,
    DegenerateData,
    ZeroConfidence,
    MissingReference,
    EmptyText,
    EmptyList,
    UnknownFormat,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every recoverable failure in the library is reported as a cama::Error
/// carrying a machine-readable kind.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

/// A per-item failure that was recorded instead of aborting a batch.
struct ErrorRecord {
    ErrorKind kind;
    std::string message;
};

} // namespace cama
