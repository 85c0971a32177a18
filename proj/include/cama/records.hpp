// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/consistency.hpp"
#include "cama/error.hpp"
#include "cama/fidelity.hpp"
#include "cama/passes.hpp"
#include "cama/rename.hpp"
#include "cama/semantic.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// JSON Lines interchange between pipeline stages. Every writer emits one
// compact object per line in sorted key order; every reader reports the
// offending line as Error{MalformedRecord}.
namespace cama {

using ordered_json = nlohmann::ordered_json;

std::string serialize_annotations(std::span<const AnnotationEntry> entries);
std::vector<AnnotationEntry> parse_annotations(std::string_view jsonl, std::string_view source = "outputs");
std::vector<StructuredOutput> successful_outputs(std::span<const AnnotationEntry> entries);

std::string serialize_descriptor_scores(std::span<const DescriptorScoreEntry> entries);
std::vector<DescriptorScoreEntry> parse_descriptor_scores(std::string_view jsonl,
                                                          std::string_view source = "descriptor scores");

std::string serialize_regen_names(std::span<const RegenNameEntry> entries);
std::vector<RegenNameEntry> parse_regen_names(std::string_view jsonl, std::string_view source = "regenerated names");

struct DescriptionEntry {
    std::string apk_id;
    std::optional<AppDescription> description;
    std::optional<ErrorRecord> error;
};

std::string serialize_descriptions(std::span<const DescriptionEntry> entries);
std::vector<DescriptionEntry> parse_descriptions(std::string_view jsonl,
                                                 std::string_view source = "app descriptions");

ordered_json to_json(const ErrorRecord& error);
ordered_json to_json(const ConsistencyRecord& record);
ordered_json to_json(const FidelityRecord& record);
ordered_json to_json(const SemanticRecord& record);

/// One line per function entry of every map.
std::string serialize_rename_maps(std::span<const RenameMap> maps);

std::string dump_jsonl_line(const ordered_json& value);

} // namespace cama
