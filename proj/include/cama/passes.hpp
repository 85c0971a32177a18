// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/backend.hpp"
#include "cama/corpus.hpp"
#include "cama/error.hpp"
#include "cama/prompt.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Model passes over a corpus: structured annotation, descriptor re-scoring
// and name regeneration. Each pass fans out over the backend's parallelism
// and emits results in sorted key order.
namespace cama {

struct PassStats {
    std::size_t requests = 0;   // calls that reached the model
    std::size_t cache_hits = 0;
    std::size_t cache_repairs = 0;
};

struct AnnotationEntry {
    FunctionKey key;
    std::optional<StructuredOutput> output;
    std::optional<ErrorRecord> error;
    std::vector<std::string> warnings;
};

struct AnnotationResult {
    std::vector<AnnotationEntry> entries; // one per function, sorted
    PassStats stats;

    [[nodiscard]] std::vector<StructuredOutput> outputs() const;
    [[nodiscard]] std::size_t error_count() const;
};

/// One StructuredOutput or one recorded error per function. Only
/// configuration errors escape as exceptions.
AnnotationResult annotate_corpus(Backend& backend, const Corpus& corpus, const std::filesystem::path& cache_dir,
                                 const PromptBuilder& builder);
AnnotationResult annotate_corpus(const BackendConfig& cfg, const Corpus& corpus,
                                 const std::filesystem::path& cache_dir);

struct DescriptorScoreEntry {
    FunctionKey key;
    std::string model_id;   // model whose descriptor was scored
    std::string backend_id; // backend that produced the score
    std::optional<double> score;
    std::string raw_response;
    std::optional<ErrorRecord> error;
    std::vector<std::string> warnings;
};

struct RegenNameEntry {
    FunctionKey key;
    std::string model_id;
    std::string backend_id;
    std::optional<std::string> name;
    std::string raw_response;
    std::optional<ErrorRecord> error;
    std::vector<std::string> warnings;
};

template <typename Entry>
struct PassResult {
    std::vector<Entry> entries;
    PassStats stats;

    [[nodiscard]] std::size_t error_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) {
            n += e.error ? 1 : 0;
        }
        return n;
    }
};

PassResult<DescriptorScoreEntry> score_descriptors(Backend& backend, std::span<const StructuredOutput> outputs,
                                                   const std::filesystem::path& cache_dir,
                                                   const PromptBuilder& builder);

PassResult<RegenNameEntry> regen_names(Backend& backend, std::span<const StructuredOutput> outputs,
                                       const std::filesystem::path& cache_dir, const PromptBuilder& builder);

} // namespace cama
