// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/rename.hpp"

#include "cama/error.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>

#include <set>

namespace cama {

std::string RenameEntry::final_name() const {
    if (!applied) {
        return original;
    }
    return collision_suffix ? fmt::format("{}_{}", suggested, *collision_suffix) : suggested;
}

namespace {

std::map<FunctionKey, const StructuredOutput*> index_outputs(std::span<const StructuredOutput> outputs) {
    std::map<FunctionKey, const StructuredOutput*> by_key;
    for (const auto& o : outputs) {
        by_key.emplace(o.key(), &o);
    }
    return by_key;
}

bool is_java_identifier_char(char c) { return is_identifier_char(c) || c == '$'; }

} // namespace

double compute_copy_rate(std::span<const StructuredOutput> outputs, const Corpus& corpus) {
    const auto by_key = index_outputs(outputs);
    if (corpus.functions.empty()) {
        return 0.0;
    }
    std::size_t copies = 0;
    for (const auto& [key, f] : corpus.functions) {
        const auto it = by_key.find(key);
        if (it == by_key.end()) {
            throw Error(ErrorKind::CoverageMismatch,
                        fmt::format("no output for function {}/{}", key.apk_id, key.function_id));
        }
        if (it->second->suggested_name == f.original_name) {
            ++copies;
        }
    }
    return static_cast<double>(copies) / static_cast<double>(corpus.functions.size());
}

bool exceeds_copy_threshold(double copy_rate, double threshold) { return copy_rate > threshold; }

RenameMap build_rename_map(const Corpus& corpus, const std::string& apk_id, std::span<const StructuredOutput> outputs) {
    const auto by_key = index_outputs(outputs);
    RenameMap map;
    map.apk_id = apk_id;
    const auto functions = corpus.functions_of(apk_id);

    for (const auto* f : functions) {
        const auto it = by_key.find(f->key());
        if (it == by_key.end()) {
            throw Error(ErrorKind::CoverageMismatch,
                        fmt::format("no output for function {}/{}", apk_id, f->function_id));
        }
        RenameEntry e;
        e.original = f->original_name;
        e.suggested = it->second->suggested_name;
        e.applied = e.suggested != e.original;
        map.entries.emplace(f->function_id, std::move(e));
    }

    std::set<std::string> taken;
    for (const auto& [fid, e] : map.entries) {
        if (!e.applied) {
            taken.insert(e.original);
        }
    }
    for (auto& [fid, e] : map.entries) {
        if (!e.applied) {
            continue;
        }
        if (taken.contains(e.suggested)) {
            int suffix = 2;
            while (taken.contains(fmt::format("{}_{}", e.suggested, suffix))) {
                ++suffix;
            }
            e.collision_suffix = suffix;
        }
        taken.insert(e.final_name());
    }
    return map;
}

std::string substitute_identifiers(std::string_view text, const std::map<std::string, std::string>& mapping) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_java_identifier_char(text[i])) {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        auto j = i;
        while (j < text.size() && is_java_identifier_char(text[j])) {
            ++j;
        }
        const auto word = text.substr(i, j - i);
        const auto it = mapping.find(std::string(word));
        if (it != mapping.end()) {
            out.append(it->second);
        } else {
            out.append(word);
        }
        i = j;
    }
    return out;
}

namespace {

std::string replace_first_word(std::string_view text, const std::string& from, const std::string& to) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_java_identifier_char(text[i])) {
            ++i;
            continue;
        }
        auto j = i;
        while (j < text.size() && is_java_identifier_char(text[j])) {
            ++j;
        }
        if (text.substr(i, j - i) == from) {
            std::string out(text.substr(0, i));
            out.append(to);
            out.append(text.substr(j));
            return out;
        }
        i = j;
    }
    return std::string(text);
}

} // namespace

RenameResult apply_renames(const Corpus& corpus, const std::vector<RenameMap>& maps, RenameScope scope) {
    RenameResult result;
    result.corpus = corpus;
    result.corpus.warnings.clear();

    std::map<std::string, const RenameMap*> by_apk;
    for (const auto& m : maps) {
        by_apk.emplace(m.apk_id, &m);
    }

    for (const auto& [apk_id, apk] : corpus.apks) {
        const auto found = by_apk.find(apk_id);
        if (found == by_apk.end()) {
            throw Error(ErrorKind::CoverageMismatch, fmt::format("no rename map for apk '{}'", apk_id));
        }
        const auto& map = *found->second;

        // original name -> every target it must become, identity included
        std::map<std::string, std::set<std::string>> targets;
        for (const auto& fid : apk.function_ids) {
            const auto e = map.entries.find(fid);
            if (e == map.entries.end()) {
                throw Error(ErrorKind::CoverageMismatch,
                            fmt::format("rename map for '{}' misses function '{}'", apk_id, fid));
            }
            targets[e->second.original].insert(e->second.final_name());
        }
        std::map<std::string, std::string> shared;
        for (const auto& [orig, outs] : targets) {
            if (outs.size() == 1 && *outs.begin() != orig) {
                shared.emplace(orig, *outs.begin());
            } else if (outs.size() > 1) {
                result.warnings.push_back(fmt::format(
                    "apk '{}': '{}' maps to {} names, call sites left unchanged", apk_id, orig, outs.size()));
            }
        }

        for (const auto& fid : apk.function_ids) {
            const auto& entry = map.entries.at(fid);
            auto& f = result.corpus.functions.at(FunctionKey{apk_id, fid});
            if (scope == RenameScope::DefinitionsOnly) {
                if (entry.applied) {
                    f.code = replace_first_word(f.code, entry.original, entry.final_name());
                    f.signature = replace_first_word(f.signature, entry.original, entry.final_name());
                }
            } else {
                auto own = shared;
                if (entry.applied) {
                    own[entry.original] = entry.final_name();
                }
                if (!own.empty()) {
                    f.code = substitute_identifiers(f.code, own);
                    f.signature = substitute_identifiers(f.signature, own);
                }
            }
            f.original_name = entry.final_name();
            f.token_estimate = estimate_tokens(f.code);
        }
    }

    const auto source = corpus.provenance.source;
    result.corpus.provenance.derived_from = "renamed from " + source;
    for (auto& [id, apk] : result.corpus.apks) {
        apk.provenance = "renamed from " + source;
    }
    return result;
}

std::optional<double> relative_improvement(double old_value, double new_value) {
    if (old_value == 0.0) {
        return std::nullopt;
    }
    return (new_value - old_value) / old_value * 100.0;
}

} // namespace cama
