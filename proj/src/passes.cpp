// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/passes.hpp"

#include <algorithm>
#include <atomic>

namespace cama {
namespace {

struct Counters {
    std::atomic<std::size_t> hits{0};
    std::atomic<std::size_t> repairs{0};

    void note(const CompletionRecord& rec) {
        if (rec.from_cache) {
            hits.fetch_add(1);
        }
        if (rec.cache_repaired) {
            repairs.fetch_add(1);
        }
    }

    PassStats finish(const Backend& backend, std::size_t requests_before) const {
        return {backend.requests() - requests_before, hits.load(), repairs.load()};
    }
};

std::vector<StructuredOutput> sorted_outputs(std::span<const StructuredOutput> outputs) {
    std::vector<StructuredOutput> v(outputs.begin(), outputs.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
    return v;
}

ErrorRecord record_of(const Error& e) { return {e.kind(), e.what()}; }

} // namespace

std::vector<StructuredOutput> AnnotationResult::outputs() const {
    std::vector<StructuredOutput> out;
    for (const auto& e : entries) {
        if (e.output) {
            out.push_back(*e.output);
        }
    }
    return out;
}

std::size_t AnnotationResult::error_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.error.has_value(); }));
}

AnnotationResult annotate_corpus(Backend& backend, const Corpus& corpus, const std::filesystem::path& cache_dir,
                                 const PromptBuilder& builder) {
    std::vector<const FunctionRecord*> functions;
    functions.reserve(corpus.functions.size());
    for (const auto& [key, f] : corpus.functions) {
        functions.push_back(&f);
    }

    AnnotationResult result;
    result.entries.resize(functions.size());
    Counters counters;
    const auto before = backend.requests();
    const auto& model_id = backend.config().backend_id;

    parallel_for(functions.size(), backend.config().parallelism, [&](std::size_t i) {
        const auto& f = *functions[i];
        auto& entry = result.entries[i];
        entry.key = f.key();
        try {
            const auto prompt = builder.function_prompt(f);
            entry.warnings = prompt.warnings;
            const auto rec = complete_cached(backend, prompt, cache_dir);
            counters.note(rec);
            entry.warnings.insert(entry.warnings.end(), rec.log.begin(), rec.log.end());
            entry.output = parse_structured_output(rec.response, entry.key, model_id);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ConfigError) {
                throw;
            }
            entry.error = record_of(e);
        }
    });
    result.stats = counters.finish(backend, before);
    return result;
}

AnnotationResult annotate_corpus(const BackendConfig& cfg, const Corpus& corpus,
                                 const std::filesystem::path& cache_dir) {
    auto backend = make_backend(cfg);
    return annotate_corpus(*backend, corpus, cache_dir, PromptBuilder{});
}

PassResult<DescriptorScoreEntry> score_descriptors(Backend& backend, std::span<const StructuredOutput> outputs,
                                                   const std::filesystem::path& cache_dir,
                                                   const PromptBuilder& builder) {
    const auto sorted = sorted_outputs(outputs);
    PassResult<DescriptorScoreEntry> result;
    result.entries.resize(sorted.size());
    Counters counters;
    const auto before = backend.requests();

    parallel_for(sorted.size(), backend.config().parallelism, [&](std::size_t i) {
        const auto& o = sorted[i];
        auto& entry = result.entries[i];
        entry.key = o.key();
        entry.model_id = o.model_id;
        entry.backend_id = backend.config().backend_id;
        try {
            const auto prompt = builder.descriptor_score_prompt(make_descriptor(o));
            entry.warnings = prompt.warnings;
            const auto rec = complete_cached(backend, prompt, cache_dir);
            counters.note(rec);
            entry.raw_response = rec.response;
            auto parsed = parse_score_response(rec.response);
            entry.score = parsed.score;
            entry.warnings.insert(entry.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ConfigError) {
                throw;
            }
            entry.error = record_of(e);
        }
    });
    result.stats = counters.finish(backend, before);
    return result;
}

PassResult<RegenNameEntry> regen_names(Backend& backend, std::span<const StructuredOutput> outputs,
                                       const std::filesystem::path& cache_dir, const PromptBuilder& builder) {
    const auto sorted = sorted_outputs(outputs);
    PassResult<RegenNameEntry> result;
    result.entries.resize(sorted.size());
    Counters counters;
    const auto before = backend.requests();

    parallel_for(sorted.size(), backend.config().parallelism, [&](std::size_t i) {
        const auto& o = sorted[i];
        auto& entry = result.entries[i];
        entry.key = o.key();
        entry.model_id = o.model_id;
        entry.backend_id = backend.config().backend_id;
        try {
            const auto prompt = builder.name_regen_prompt(o.summary);
            entry.warnings = prompt.warnings;
            const auto rec = complete_cached(backend, prompt, cache_dir);
            counters.note(rec);
            entry.raw_response = rec.response;
            auto parsed = parse_name_response(rec.response);
            entry.name = std::move(parsed.name);
            entry.warnings.insert(entry.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ConfigError) {
                throw;
            }
            entry.error = record_of(e);
        }
    });
    result.stats = counters.finish(backend, before);
    return result;
}

} // namespace cama
