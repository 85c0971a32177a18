// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/error.hpp"

namespace cama {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::DanglingFunction: return "DanglingFunction";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::CodeTooLong: return "CodeTooLong";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::NoNumericScore: return "NoNumericScore";
    case ErrorKind::NothingFits: return "NothingFits";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::CacheCorrupt: return "CacheCorrupt";
    case ErrorKind::EmptyVector: return "EmptyVector";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnsupportedSupport: return "UnsupportedSupport";
    case ErrorKind::CoverageMismatch: return "CoverageMismatch";
    case ErrorKind::AccuracyGate: return "AccuracyGate";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::ZeroConfidence: return "ZeroConfidence";
    case ErrorKind::MissingReference: return "MissingReference";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::UnknownFormat: return "UnknownFormat";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace cama
