// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/corpus.hpp"

#include "cama/error.hpp"
#include "cama/text.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <set>
#include <sstream>
#include <tuple>

namespace cama {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string require_string(const json& obj, const char* field, const std::string& where, bool allow_empty) {
    const auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("{}: field '{}' missing or not a string", where, field));
    }
    auto value = it->get<std::string>();
    if (!allow_empty && value.empty()) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("{}: field '{}' is empty", where, field));
    }
    return value;
}

std::uint64_t require_count(const json& obj, const char* field, const std::string& where) {
    const auto it = obj.find(field);
    if (it == obj.end() || !it->is_number_integer() || (it->is_number_integer() && it->get<std::int64_t>() < 0)) {
        throw Error(ErrorKind::MalformedRecord,
                    fmt::format("{}: field '{}' missing or not a non-negative integer", where, field));
    }
    return it->get<std::uint64_t>();
}

std::optional<std::string> optional_string(const json& obj, const char* field, const std::string& where) {
    const auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_string()) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("{}: field '{}' is not a string", where, field));
    }
    return it->get<std::string>();
}

std::string dump_line(const ordered_json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

} // namespace

const FunctionRecord& Corpus::function(const FunctionKey& key) const {
    const auto it = functions.find(key);
    if (it == functions.end()) {
        throw Error(ErrorKind::CoverageMismatch, fmt::format("unknown function {}/{}", key.apk_id, key.function_id));
    }
    return it->second;
}

std::vector<const FunctionRecord*> Corpus::functions_of(const std::string& apk_id) const {
    std::vector<const FunctionRecord*> out;
    const auto apk = apks.find(apk_id);
    if (apk == apks.end()) {
        return out;
    }
    out.reserve(apk->second.function_ids.size());
    for (const auto& fid : apk->second.function_ids) {
        out.push_back(&functions.at(FunctionKey{apk_id, fid}));
    }
    return out;
}

Corpus parse_corpus(const std::string& manifest_json, const std::string& functions_jsonl, const CorpusOptions& options,
                    const std::string& source) {
    Corpus corpus;
    corpus.provenance.source = source;
    corpus.provenance.loaded_at = fmt::format("{:%FT%TZ}", std::chrono::floor<std::chrono::seconds>(
                                                                 std::chrono::system_clock::now()));

    json manifest;
    try {
        manifest = json::parse(manifest_json);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("manifest: {}", e.what()));
    }
    if (!manifest.is_array()) {
        throw Error(ErrorKind::MalformedRecord, "manifest: top level must be a JSON array");
    }

    std::set<std::string> derived;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& entry = manifest[i];
        const auto where = fmt::format("manifest entry {}", i + 1);
        if (!entry.is_object()) {
            throw Error(ErrorKind::MalformedRecord, where + ": not an object");
        }
        ApkSample apk;
        apk.apk_id = require_string(entry, "apk_id", where, false);
        apk.category = require_string(entry, "category", where, false);
        apk.family = require_string(entry, "family", where, false);
        apk.size_bytes = require_count(entry, "size_bytes", where);
        apk.method_count = require_count(entry, "method_count", where);
        apk.reference_description = optional_string(entry, "reference_description", where);
        apk.provenance = optional_string(entry, "provenance", where);
        if (apk.provenance) {
            derived.insert(*apk.provenance);
        }
        const auto id = apk.apk_id;
        if (!corpus.apks.emplace(id, std::move(apk)).second) {
            throw Error(ErrorKind::DuplicateKey, fmt::format("{}: duplicate apk_id '{}'", where, id));
        }
    }
    if (!derived.empty()) {
        corpus.provenance.derived_from = join(std::vector<std::string>(derived.begin(), derived.end()), "; ");
    }

    std::istringstream lines(functions_jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto where = fmt::format("functions line {}", line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::MalformedRecord, fmt::format("{}: {}", where, e.what()));
        }
        if (!obj.is_object()) {
            throw Error(ErrorKind::MalformedRecord, where + ": not an object");
        }
        FunctionRecord f;
        f.apk_id = require_string(obj, "apk_id", where, false);
        f.function_id = require_string(obj, "function_id", where, false);
        f.class_name = require_string(obj, "class_name", where, true);
        f.original_name = require_string(obj, "method_name", where, true);
        f.signature = require_string(obj, "signature", where, true);
        f.code = require_string(obj, "code", where, false);
        f.token_estimate = estimate_tokens(f.code, options.chars_per_token);

        const auto apk = corpus.apks.find(f.apk_id);
        if (apk == corpus.apks.end()) {
            throw Error(ErrorKind::DanglingFunction,
                        fmt::format("{}: apk_id '{}' is not in the manifest", where, f.apk_id));
        }
        auto key = f.key();
        if (!corpus.functions.emplace(key, std::move(f)).second) {
            throw Error(ErrorKind::DuplicateKey,
                        fmt::format("{}: duplicate function_id '{}' in apk '{}'", where, key.function_id, key.apk_id));
        }
    }

    for (const auto& [key, f] : corpus.functions) {
        corpus.apks.at(key.apk_id).function_ids.push_back(key.function_id);
    }
    for (auto& [id, apk] : corpus.apks) {
        if (apk.function_ids.empty()) {
            corpus.warnings.push_back(fmt::format("apk '{}' has no functions", id));
        }
        if (apk.method_count != apk.function_ids.size()) {
            corpus.warnings.push_back(fmt::format("apk '{}': manifest method_count {} replaced by loaded count {}", id,
                                                  apk.method_count, apk.function_ids.size()));
            apk.method_count = apk.function_ids.size();
        }
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& manifest_path, const std::filesystem::path& functions_path,
                   const CorpusOptions& options) {
    return parse_corpus(read_file(manifest_path), read_file(functions_path), options, manifest_path.string());
}

Corpus dedupe_category_wise(const Corpus& corpus, std::uint64_t size_bucket_bytes) {
    using Group = std::tuple<std::string, std::uint64_t, std::uint64_t>;
    std::set<Group> seen;
    std::set<std::string> removed;
    // apks iterate in ascending apk_id, so the first member of a group is the survivor
    for (const auto& [id, apk] : corpus.apks) {
        const auto bucket = size_bucket_bytes == 0 ? apk.size_bytes : apk.size_bytes / size_bucket_bytes;
        if (!seen.emplace(apk.category, bucket, apk.method_count).second) {
            removed.insert(id);
        }
    }

    Corpus out;
    out.provenance = corpus.provenance;
    out.warnings = corpus.warnings;
    for (const auto& [id, apk] : corpus.apks) {
        if (!removed.contains(id)) {
            out.apks.emplace(id, apk);
        }
    }
    for (const auto& [key, f] : corpus.functions) {
        if (!removed.contains(key.apk_id)) {
            out.functions.emplace(key, f);
        }
    }
    return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
    std::set<std::string> categories;
    std::set<std::string> families;
    CorpusStats stats;
    stats.apk_count = corpus.apks.size();
    for (const auto& [id, apk] : corpus.apks) {
        categories.insert(apk.category);
        families.insert(apk.family);
        stats.total_functions += apk.function_ids.size();
    }
    stats.category_count = categories.size();
    stats.family_count = families.size();
    return stats;
}

std::string serialize_manifest(const Corpus& corpus) {
    ordered_json arr = ordered_json::array();
    for (const auto& [id, apk] : corpus.apks) {
        ordered_json obj;
        obj["apk_id"] = apk.apk_id;
        obj["category"] = apk.category;
        obj["family"] = apk.family;
        obj["size_bytes"] = apk.size_bytes;
        obj["method_count"] = apk.method_count;
        if (apk.reference_description) {
            obj["reference_description"] = *apk.reference_description;
        }
        if (apk.provenance) {
            obj["provenance"] = *apk.provenance;
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

std::string serialize_functions(const Corpus& corpus) {
    std::string out;
    for (const auto& [key, f] : corpus.functions) {
        ordered_json obj;
        obj["apk_id"] = f.apk_id;
        obj["function_id"] = f.function_id;
        obj["class_name"] = f.class_name;
        obj["method_name"] = f.original_name;
        obj["signature"] = f.signature;
        obj["code"] = f.code;
        out += dump_line(obj);
        out += '\n';
    }
    return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& functions_path) {
    write_file_atomic(manifest_path, serialize_manifest(corpus));
    write_file_atomic(functions_path, serialize_functions(corpus));
}

} // namespace cama
