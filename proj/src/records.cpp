// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/records.hpp"

#include <fmt/format.h>

namespace cama {
namespace {

using json = nlohmann::json;

template <typename F>
void for_each_line(std::string_view text, std::string_view source, F&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        const auto where = fmt::format("{} line {}", source, line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::MalformedRecord, fmt::format("{}: {}", where, e.what()));
        }
        if (!obj.is_object()) {
            throw Error(ErrorKind::MalformedRecord, fmt::format("{}: not an object", where));
        }
        try {
            fn(obj, where);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, fmt::format("{}: {}", where, e.what()));
        }
    }
}

std::string req_str(const json& obj, const char* field, const std::string& where) {
    const auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("{}: field '{}' missing or not a string", where, field));
    }
    return it->get<std::string>();
}

std::vector<std::string> warnings_of(const json& obj) {
    const auto it = obj.find("warnings");
    if (it == obj.end()) {
        return {};
    }
    return it->get<std::vector<std::string>>();
}

void put_warnings(ordered_json& obj, const std::vector<std::string>& warnings) {
    if (!warnings.empty()) {
        obj["warnings"] = warnings;
    }
}

std::optional<ErrorRecord> error_of(const json& obj, const std::string& where) {
    const auto it = obj.find("error");
    if (it == obj.end() || it->is_null()) {
        return std::nullopt;
    }
    const auto kind_name = req_str(*it, "kind", where);
    for (int k = 0; k <= static_cast<int>(ErrorKind::IoError); ++k) {
        if (to_string(static_cast<ErrorKind>(k)) == kind_name) {
            return ErrorRecord{static_cast<ErrorKind>(k), req_str(*it, "message", where)};
        }
    }
    throw Error(ErrorKind::MalformedRecord, fmt::format("{}: unknown error kind '{}'", where, kind_name));
}

FunctionKey key_of(const json& obj, const std::string& where) {
    return {req_str(obj, "apk_id", where), req_str(obj, "function_id", where)};
}

ordered_json key_json(const FunctionKey& key) {
    ordered_json j;
    j["apk_id"] = key.apk_id;
    j["function_id"] = key.function_id;
    return j;
}

} // namespace

std::string dump_jsonl_line(const ordered_json& value) {
    return value.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

ordered_json to_json(const ErrorRecord& error) {
    return ordered_json{{"kind", to_string(error.kind)}, {"message", error.message}};
}

std::string serialize_annotations(std::span<const AnnotationEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        auto j = key_json(e.key);
        if (e.output) {
            const auto& o = *e.output;
            j["model_id"] = o.model_id;
            j["summary"] = o.summary;
            j["suggested_name"] = o.suggested_name;
            j["maliciousness"] = o.maliciousness;
            j["raw_response"] = o.raw_response;
        }
        if (e.error) {
            j["error"] = to_json(*e.error);
        }
        put_warnings(j, e.warnings);
        out += dump_jsonl_line(j);
    }
    return out;
}

std::vector<AnnotationEntry> parse_annotations(std::string_view jsonl, std::string_view source) {
    std::vector<AnnotationEntry> entries;
    for_each_line(jsonl, source, [&](const json& obj, const std::string& where) {
        AnnotationEntry e;
        e.key = key_of(obj, where);
        e.error = error_of(obj, where);
        e.warnings = warnings_of(obj);
        if (!e.error) {
            StructuredOutput o;
            o.apk_id = e.key.apk_id;
            o.function_id = e.key.function_id;
            o.model_id = req_str(obj, "model_id", where);
            o.summary = req_str(obj, "summary", where);
            o.suggested_name = req_str(obj, "suggested_name", where);
            const auto m = obj.find("maliciousness");
            if (m == obj.end() || !m->is_number()) {
                throw Error(ErrorKind::MalformedRecord, fmt::format("{}: field 'maliciousness' missing", where));
            }
            o.maliciousness = m->get<double>();
            if (const auto raw = obj.find("raw_response"); raw != obj.end() && raw->is_string()) {
                o.raw_response = raw->get<std::string>();
            }
            e.output = std::move(o);
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

std::vector<StructuredOutput> successful_outputs(std::span<const AnnotationEntry> entries) {
    std::vector<StructuredOutput> out;
    for (const auto& e : entries) {
        if (e.output) {
            out.push_back(*e.output);
        }
    }
    return out;
}

std::string serialize_descriptor_scores(std::span<const DescriptorScoreEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        auto j = key_json(e.key);
        j["model_id"] = e.model_id;
        j["backend_id"] = e.backend_id;
        if (e.score) {
            j["score"] = *e.score;
            j["raw_response"] = e.raw_response;
        }
        if (e.error) {
            j["error"] = to_json(*e.error);
        }
        put_warnings(j, e.warnings);
        out += dump_jsonl_line(j);
    }
    return out;
}

std::vector<DescriptorScoreEntry> parse_descriptor_scores(std::string_view jsonl, std::string_view source) {
    std::vector<DescriptorScoreEntry> entries;
    for_each_line(jsonl, source, [&](const json& obj, const std::string& where) {
        DescriptorScoreEntry e;
        e.key = key_of(obj, where);
        e.model_id = req_str(obj, "model_id", where);
        e.backend_id = obj.value("backend_id", e.model_id);
        e.error = error_of(obj, where);
        e.warnings = warnings_of(obj);
        if (!e.error) {
            const auto s = obj.find("score");
            if (s == obj.end() || !s->is_number()) {
                throw Error(ErrorKind::MalformedRecord, fmt::format("{}: field 'score' missing", where));
            }
            e.score = s->get<double>();
            e.raw_response = obj.value("raw_response", std::string());
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

std::string serialize_regen_names(std::span<const RegenNameEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        auto j = key_json(e.key);
        j["model_id"] = e.model_id;
        j["backend_id"] = e.backend_id;
        if (e.name) {
            j["name"] = *e.name;
            j["raw_response"] = e.raw_response;
        }
        if (e.error) {
            j["error"] = to_json(*e.error);
        }
        put_warnings(j, e.warnings);
        out += dump_jsonl_line(j);
    }
    return out;
}

std::vector<RegenNameEntry> parse_regen_names(std::string_view jsonl, std::string_view source) {
    std::vector<RegenNameEntry> entries;
    for_each_line(jsonl, source, [&](const json& obj, const std::string& where) {
        RegenNameEntry e;
        e.key = key_of(obj, where);
        e.model_id = req_str(obj, "model_id", where);
        e.backend_id = obj.value("backend_id", e.model_id);
        e.error = error_of(obj, where);
        e.warnings = warnings_of(obj);
        if (!e.error) {
            e.name = req_str(obj, "name", where);
            e.raw_response = obj.value("raw_response", std::string());
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

std::string serialize_descriptions(std::span<const DescriptionEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        ordered_json j;
        j["apk_id"] = e.apk_id;
        if (e.description) {
            const auto& d = *e.description;
            j["model_id"] = d.model_id;
            j["text"] = d.text;
            j["reference"] = d.reference ? ordered_json(*d.reference) : ordered_json(nullptr);
            j["v_used"] = d.v_used;
            put_warnings(j, d.warnings);
        }
        if (e.error) {
            j["error"] = to_json(*e.error);
        }
        out += dump_jsonl_line(j);
    }
    return out;
}

std::vector<DescriptionEntry> parse_descriptions(std::string_view jsonl, std::string_view source) {
    std::vector<DescriptionEntry> entries;
    for_each_line(jsonl, source, [&](const json& obj, const std::string& where) {
        DescriptionEntry e;
        e.apk_id = req_str(obj, "apk_id", where);
        e.error = error_of(obj, where);
        if (!e.error) {
            AppDescription d;
            d.apk_id = e.apk_id;
            d.model_id = req_str(obj, "model_id", where);
            d.text = req_str(obj, "text", where);
            if (const auto r = obj.find("reference"); r != obj.end() && r->is_string()) {
                d.reference = r->get<std::string>();
            }
            d.v_used = obj.value("v_used", std::size_t{0});
            d.warnings = warnings_of(obj);
            e.description = std::move(d);
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

ordered_json to_json(const ConsistencyRecord& record) {
    ordered_json j;
    j["apk_id"] = record.apk_id;
    j["mcs"] = record.mcs;
    j["ncs"] = record.ncs_mean;
    ordered_json names = ordered_json::array();
    for (const auto& n : record.names) {
        names.push_back(ordered_json{
            {"function_id", n.function_id}, {"n_raw", n.n_raw}, {"n_reg", n.n_reg}, {"ncs", n.ncs}});
    }
    j["names"] = std::move(names);
    if (record.uniform_fallback) {
        j["uniform_fallback"] = true;
    }
    return j;
}

ordered_json to_json(const FidelityRecord& record) {
    ordered_json j;
    j["apk_id"] = record.apk_id;
    j["predicted_label"] = record.predicted_label;
    j["p_full"] = record.p_full;
    ordered_json entries = ordered_json::array();
    for (const auto& e : record.entries) {
        ordered_json m;
        m["k"] = e.k;
        m["removed"] = e.removed_ids;
        m["p_red"] = e.p_red;
        m["mfs"] = e.mfs ? ordered_json(*e.mfs) : ordered_json(nullptr);
        entries.push_back(std::move(m));
    }
    j["entries"] = std::move(entries);
    return j;
}

ordered_json to_json(const SemanticRecord& record) {
    ordered_json j;
    j["apk_id"] = record.apk_id;
    j["bleu"] = record.bleu;
    j["meteor"] = record.meteor;
    j["rouge_l"] = record.rouge_l;
    put_warnings(j, record.warnings);
    return j;
}

std::string serialize_rename_maps(std::span<const RenameMap> maps) {
    std::string out;
    for (const auto& m : maps) {
        for (const auto& [fid, e] : m.entries) {
            ordered_json j;
            j["apk_id"] = m.apk_id;
            j["function_id"] = fid;
            j["original"] = e.original;
            j["suggested"] = e.suggested;
            j["applied"] = e.applied;
            j["collision_suffix"] = e.collision_suffix ? ordered_json(*e.collision_suffix) : ordered_json(nullptr);
            j["final_name"] = e.final_name();
            out += dump_jsonl_line(j);
        }
    }
    return out;
}

} // namespace cama
