// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cama {

/// Identifies one decompiled function. function_id is only unique within
/// its APK, so the pair is the global key. Ordering is (apk_id, function_id).
struct FunctionKey {
    std::string apk_id;
    std::string function_id;

    auto operator<=>(const FunctionKey&) const = default;
};

struct ApkSample {
    std::string apk_id;
    std::string category;
    std::string family;
    std::uint64_t size_bytes = 0;
    std::uint64_t method_count = 0;
    std::vector<std::string> function_ids; // sorted
    std::optional<std::string> reference_description;
    std::optional<std::string> provenance;
};

struct FunctionRecord {
    std::string function_id;
    std::string apk_id;
    std::string class_name;
    std::string original_name;
    std::string signature;
    std::string code;
    std::size_t token_estimate = 0;

    [[nodiscard]] FunctionKey key() const { return {apk_id, function_id}; }
};

struct Provenance {
    std::string source;
    std::string loaded_at;
    std::optional<std::string> derived_from;
};

struct CorpusOptions {
    std::size_t chars_per_token = 4;
    /// Width of the size_bytes bucket used by dedupe; 0 means exact sizes.
    std::uint64_t size_bucket_bytes = 0;
};

/// Immutable after load. std::map keeps every iteration sorted by key.
struct Corpus {
    std::map<std::string, ApkSample> apks;
    std::map<FunctionKey, FunctionRecord> functions;
    Provenance provenance;
    std::vector<std::string> warnings;

    [[nodiscard]] const FunctionRecord& function(const FunctionKey& key) const;
    [[nodiscard]] std::vector<const FunctionRecord*> functions_of(const std::string& apk_id) const;
};

struct CorpusStats {
    std::size_t apk_count = 0;
    std::size_t category_count = 0;
    std::size_t family_count = 0;
    std::size_t total_functions = 0;

    bool operator==(const CorpusStats&) const = default;
};

/// Throws Error{MalformedRecord, DanglingFunction, DuplicateKey, IoError}.
Corpus load_corpus(const std::filesystem::path& manifest_path, const std::filesystem::path& functions_path,
                   const CorpusOptions& options = {});

/// Parses from in-memory text; `source` is only used in provenance and messages.
Corpus parse_corpus(const std::string& manifest_json, const std::string& functions_jsonl,
                    const CorpusOptions& options = {}, const std::string& source = "<memory>");

/// Within each category keep one APK per (size bucket, method_count); the
/// lexicographically smallest apk_id survives.
Corpus dedupe_category_wise(const Corpus& corpus, std::uint64_t size_bucket_bytes = 0);

CorpusStats corpus_stats(const Corpus& corpus);

/// Canonical serializations; load -> serialize reproduces canonical input byte for byte.
std::string serialize_manifest(const Corpus& corpus);
std::string serialize_functions(const Corpus& corpus);

void write_corpus(const Corpus& corpus, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& functions_path);

} // namespace cama
