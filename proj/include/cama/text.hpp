// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

/// Decodes UTF-8 into Unicode scalar values. Invalid sequences decode
/// byte-by-byte as U+FFFD so that every input has a well-defined length.
std::u32string decode_utf8(std::string_view text);

std::size_t codepoint_count(std::string_view text);

/// ceil(codepoints / chars_per_token); chars_per_token must be positive.
std::size_t estimate_tokens(std::string_view text, std::size_t chars_per_token = 4);

std::string_view trim(std::string_view text) noexcept;

std::string to_lower_ascii(std::string_view text);

bool is_identifier_char(char c) noexcept;

/// Lowercase word tokens split on every non-alphanumeric ASCII character.
/// Bytes outside ASCII are kept inside tokens so non-English words survive.
std::vector<std::string> tokenize_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace cama
