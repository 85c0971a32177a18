// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/backend.hpp"
#include "cama/corpus.hpp"
#include "cama/prompt.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

struct AppDescription {
    std::string apk_id;
    std::string model_id;
    std::string text;
    std::optional<std::string> reference;
    std::size_t v_used = 0;
    std::vector<std::string> warnings;
};

/// Selects top-v outputs under the backend's prompt budget, asks for an
/// application purpose description and records how many blocks were used.
/// Throws Error{NothingFits, MissingReference} and backend errors.
AppDescription generate_app_description(Backend& backend, const ApkSample& apk,
                                        std::span<const StructuredOutput> outputs, const PromptBuilder& builder,
                                        const std::filesystem::path& cache_dir, bool require_reference = false);

struct BleuOptions {
    std::size_t max_n = 2;
    bool brevity_penalty = false;
};

/// token -> equivalents; lookups are symmetric.
using SynonymTable = std::map<std::string, std::set<std::string>>;

SynonymTable load_synonyms(const std::filesystem::path& path);

/// Warnings (e.g. empty inputs) are appended to `warnings` when given.
double bleu(std::string_view candidate, std::string_view reference, const BleuOptions& options = {},
            std::vector<std::string>* warnings = nullptr);

/// Exact, then stem, then optional synonym matching; fragmentation penalty
/// 0.5 * (chunks / matches)^3 on F = 10PR / (R + 9P).
double meteor_lite(std::string_view candidate, std::string_view reference, const SynonymTable* synonyms = nullptr,
                   std::vector<std::string>* warnings = nullptr);

/// Balanced F1 over the token LCS.
double rouge_l(std::string_view candidate, std::string_view reference, std::vector<std::string>* warnings = nullptr);

struct SemanticRecord {
    std::string apk_id;
    double bleu = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
    std::vector<std::string> warnings;
};

struct SemanticOptions {
    BleuOptions bleu;
    const SynonymTable* synonyms = nullptr;
};

/// Throws Error{MissingReference}.
SemanticRecord semantic_for_app(const AppDescription& description, const SemanticOptions& options = {});

} // namespace cama
