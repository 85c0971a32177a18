// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/semantic.hpp"

#include "cama/error.hpp"
#include "cama/stemmer.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace cama {

AppDescription generate_app_description(Backend& backend, const ApkSample& apk,
                                        std::span<const StructuredOutput> outputs, const PromptBuilder& builder,
                                        const std::filesystem::path& cache_dir, bool require_reference) {
    if (require_reference && !apk.reference_description) {
        throw Error(ErrorKind::MissingReference, fmt::format("apk '{}' has no reference description", apk.apk_id));
    }
    std::vector<StructuredOutput> own;
    for (const auto& o : outputs) {
        if (o.apk_id == apk.apk_id) {
            own.push_back(o);
        }
    }
    if (own.empty()) {
        throw Error(ErrorKind::EmptyList, fmt::format("apk '{}' has no structured outputs", apk.apk_id));
    }
    const auto selected = select_top_v(own, backend.config().prompt_budget(), builder);
    const auto prompt = builder.app_purpose_prompt(selected);
    const auto rec = complete_cached(backend, prompt, cache_dir);

    AppDescription d;
    d.apk_id = apk.apk_id;
    d.model_id = backend.config().backend_id;
    d.text = std::string(trim(rec.response));
    d.reference = apk.reference_description;
    d.v_used = selected.size();
    d.warnings = prompt.warnings;
    d.warnings.insert(d.warnings.end(), rec.log.begin(), rec.log.end());
    auto prefix = std::string_view(builder.templates().description_prefix);
    while (prefix.ends_with('.')) {
        prefix.remove_suffix(1);
    }
    if (!prefix.empty() && !d.text.starts_with(prefix)) {
        d.warnings.push_back(fmt::format("description does not begin with \"{}\"", prefix));
    }
    return d;
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
    SynonymTable table;
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        for (const auto& [key, values] : j.items()) {
            auto& set = table[to_lower_ascii(key)];
            for (const auto& v : values) {
                set.insert(to_lower_ascii(v.get<std::string>()));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("synonym table {}: {}", path.string(), e.what()));
    }
    return table;
}

namespace {

bool empty_inputs(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                  std::vector<std::string>* warnings, std::string_view metric) {
    if (!cand.empty() && !ref.empty()) {
        return false;
    }
    if (warnings != nullptr) {
        warnings->push_back(fmt::format("{}: {}: {} text has no tokens", to_string(ErrorKind::EmptyText), metric,
                                        cand.empty() ? "candidate" : "reference"));
    }
    return true;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

} // namespace

double bleu(std::string_view candidate, std::string_view reference, const BleuOptions& options,
            std::vector<std::string>* warnings) {
    if (options.max_n == 0) {
        throw Error(ErrorKind::ConfigError, "BLEU max_n must be at least 1");
    }
    const auto cand = tokenize_words(candidate);
    const auto ref = tokenize_words(reference);
    if (empty_inputs(cand, ref, warnings, "bleu")) {
        return 0.0;
    }
    const double weight = 1.0 / static_cast<double>(options.max_n);
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= options.max_n; ++n) {
        const auto c = ngram_counts(cand, n);
        const auto r = ngram_counts(ref, n);
        std::size_t total = 0;
        std::size_t clipped = 0;
        for (const auto& [gram, count] : c) {
            total += count;
            const auto it = r.find(gram);
            clipped += std::min(count, it == r.end() ? std::size_t{0} : it->second);
        }
        if (total == 0 || clipped == 0) {
            return 0.0;
        }
        log_sum += weight * std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    double score = std::exp(log_sum);
    if (options.brevity_penalty && cand.size() < ref.size()) {
        score *= std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
    }
    return std::clamp(score, 0.0, 1.0);
}

double meteor_lite(std::string_view candidate, std::string_view reference, const SynonymTable* synonyms,
                   std::vector<std::string>* warnings) {
    const auto cand = tokenize_words(candidate);
    const auto ref = tokenize_words(reference);
    if (empty_inputs(cand, ref, warnings, "meteor")) {
        return 0.0;
    }

    std::vector<int> cand_to_ref(cand.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);
    // Each stage aligns every still-unmatched candidate token, left to right,
    // with the leftmost unused reference token it matches.
    const auto stage = [&](auto&& same) {
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (cand_to_ref[i] >= 0) {
                continue;
            }
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (!ref_used[j] && same(cand[i], ref[j])) {
                    cand_to_ref[i] = static_cast<int>(j);
                    ref_used[j] = true;
                    break;
                }
            }
        }
    };
    stage([](const std::string& a, const std::string& b) { return a == b; });
    stage([](const std::string& a, const std::string& b) { return porter_stem(a) == porter_stem(b); });
    if (synonyms != nullptr && !synonyms->empty()) {
        stage([&](const std::string& a, const std::string& b) {
            const auto has = [&](const std::string& x, const std::string& y) {
                const auto it = synonyms->find(x);
                return it != synonyms->end() && it->second.contains(y);
            };
            return has(a, b) || has(b, a);
        });
    }

    std::size_t matches = 0;
    std::size_t chunks = 0;
    int prev_ref = -2;
    bool prev_matched = false;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        const int r = cand_to_ref[i];
        if (r < 0) {
            prev_matched = false;
            continue;
        }
        ++matches;
        if (!prev_matched || r != prev_ref + 1) {
            ++chunks;
        }
        prev_ref = r;
        prev_matched = true;
    }
    if (matches == 0) {
        return 0.0;
    }
    const double m = static_cast<double>(matches);
    const double precision = m / static_cast<double>(cand.size());
    const double recall = m / static_cast<double>(ref.size());
    const double f = 10.0 * precision * recall / (recall + 9.0 * precision);
    const double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
    return std::clamp(f * (1.0 - penalty), 0.0, 1.0);
}

double rouge_l(std::string_view candidate, std::string_view reference, std::vector<std::string>* warnings) {
    const auto cand = tokenize_words(candidate);
    const auto ref = tokenize_words(reference);
    if (empty_inputs(cand, ref, warnings, "rouge_l")) {
        return 0.0;
    }
    std::vector<std::size_t> prev(ref.size() + 1, 0);
    std::vector<std::size_t> cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            cur[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const auto lcs = prev[ref.size()];
    if (lcs == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(lcs) / static_cast<double>(cand.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

SemanticRecord semantic_for_app(const AppDescription& description, const SemanticOptions& options) {
    if (!description.reference) {
        throw Error(ErrorKind::MissingReference,
                    fmt::format("apk '{}' has no reference description", description.apk_id));
    }
    SemanticRecord rec;
    rec.apk_id = description.apk_id;
    rec.bleu = bleu(description.text, *description.reference, options.bleu, &rec.warnings);
    rec.meteor = meteor_lite(description.text, *description.reference, options.synonyms, &rec.warnings);
    rec.rouge_l = rouge_l(description.text, *description.reference, &rec.warnings);
    return rec;
}

} // namespace cama
