// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

// Synthetic planted corpus: each category owns class-unique identifiers that
// only appear in two high-scored functions per APK; every other function
// draws from a shared vocabulary with low planted scores.
namespace cama::fixture {

struct Options {
    std::size_t apks_per_category = 6;
    std::size_t functions_per_apk = 8;
    std::uint64_t seed = 7;
};

struct Texts {
    std::string manifest;  // JSON array
    std::string functions; // JSON Lines
};

Texts planted_corpus(const Options& options = {});

/// Writes manifest.json, functions.jsonl and config.json into `dir`.
/// The config uses one seeded mock backend "mock-a" and relative paths.
void write_workspace(const std::filesystem::path& dir, const Options& options = {},
                     const std::string& extra_config = "");

} // namespace cama::fixture
