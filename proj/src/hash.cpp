// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/hash.hpp"

#include <openssl/sha.h>

#include <array>

namespace cama {
namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> digest(std::string_view data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md.data());
    return md;
}

} // namespace

std::string sha256_hex(std::string_view data) {
    static constexpr char hex[] = "0123456789abcdef";
    const auto md = digest(data);
    std::string out;
    out.reserve(md.size() * 2);
    for (const auto b : md) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0x0F]);
    }
    return out;
}

std::uint64_t stable_hash64(std::string_view data) {
    const auto md = digest(data);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v = (v << 8) | md[static_cast<std::size_t>(i)];
    }
    return v;
}

} // namespace cama
