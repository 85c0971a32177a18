// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cama {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// First eight digest bytes of SHA-256, big-endian. Stable across platforms.
std::uint64_t stable_hash64(std::string_view data);

} // namespace cama
