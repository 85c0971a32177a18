// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/corpus.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cama {

enum class PromptKind { FunctionSummarization, DescriptorScore, NameRegen, AppPurpose };

std::string_view to_string(PromptKind kind) noexcept;

struct PromptText {
    PromptKind kind = PromptKind::FunctionSummarization;
    std::string system; // role context, sent as the system message
    std::string text;   // user message
    std::size_t token_estimate = 0;
    std::vector<std::string> warnings;
};

/// The model-generated triple for one function plus where it came from.
struct StructuredOutput {
    std::string apk_id;
    std::string function_id;
    std::string model_id;
    std::string summary;
    std::string suggested_name;
    double maliciousness = 0.0; // [0, 10]
    std::string raw_response;
    std::vector<std::string> parse_warnings;

    [[nodiscard]] FunctionKey key() const { return {apk_id, function_id}; }
};

struct Descriptor {
    FunctionKey key;
    std::string text;
};

/// "Summary: {S}\nSuggested name: {N}"
std::string render_descriptor(std::string_view summary, std::string_view name);
Descriptor make_descriptor(const StructuredOutput& output);

/// Editable prompt texts. Placeholders use {name} syntax; see templates/.
struct PromptTemplates {
    std::string role;
    std::string function_summarization;
    std::string descriptor_score;
    std::string name_regen;
    std::string app_purpose;
    std::string app_purpose_block;
    std::string summary_requirement;
    std::string name_requirement;
    std::string score_requirement;
    std::string description_prefix;

    static PromptTemplates defaults();
    /// Files present in `dir` override the defaults; a single trailing newline is dropped.
    static PromptTemplates load(const std::filesystem::path& dir);
    /// File name -> member, in a stable order.
    static const std::vector<std::pair<std::string, std::string PromptTemplates::*>>& files();
};

/// Replaces known `{name}` placeholders in one left-to-right pass. Inserted
/// values are never rescanned and unknown placeholders are left verbatim.
std::string fill_template(std::string_view tmpl, std::span<const std::pair<std::string_view, std::string_view>> values);

struct PromptOptions {
    std::size_t chars_per_token = 4;
    /// Context window minus reserved response tokens; unset disables CodeTooLong.
    std::optional<std::size_t> budget_tokens;
};

class PromptBuilder {
  public:
    explicit PromptBuilder(PromptTemplates templates = PromptTemplates::defaults(), PromptOptions options = {});

    /// Throws Error{CodeTooLong} when the prompt exceeds the configured budget.
    [[nodiscard]] PromptText function_prompt(const FunctionRecord& function) const;
    [[nodiscard]] PromptText descriptor_score_prompt(const Descriptor& descriptor) const;
    [[nodiscard]] PromptText name_regen_prompt(std::string_view summary) const;
    /// `outputs` must be non-empty and already selected; order is preserved.
    [[nodiscard]] PromptText app_purpose_prompt(std::span<const StructuredOutput> outputs) const;

    /// Tokens of the app-purpose prompt with no blocks, sized for up to `max_blocks` blocks.
    [[nodiscard]] std::size_t app_purpose_overhead_tokens(std::size_t max_blocks) const;
    /// Tokens added by the block at 1-based position `index`, separator included.
    [[nodiscard]] std::size_t app_purpose_block_tokens(const StructuredOutput& output, std::size_t index) const;

    [[nodiscard]] const PromptTemplates& templates() const noexcept { return templates_; }
    [[nodiscard]] const PromptOptions& options() const noexcept { return options_; }

  private:
    PromptText finish(PromptKind kind, std::string text) const;
    std::string render_block(const StructuredOutput& output, std::size_t index) const;

    PromptTemplates templates_;
    PromptOptions options_;
};

/// Rewrites [INST], [/INST], [FUNC] and [/FUNC] inside user content as
/// [\INST], [\/INST], [\FUNC] and [\/FUNC]. Returns true when anything changed.
bool escape_delimiters(std::string& content);

std::string format_score(double score);

/// Labeled-section parse of a function summarization response. Throws Error{MissingField, NoNumericScore}.
StructuredOutput parse_structured_output(std::string_view raw, const FunctionKey& key, std::string model_id);

struct ParsedScore {
    double score = 0.0;
    std::vector<std::string> warnings;
};
/// Score from a descriptor-score response. Throws Error{NoNumericScore}.
ParsedScore parse_score_response(std::string_view raw);

struct ParsedName {
    std::string name;
    std::vector<std::string> warnings;
};
/// Single identifier from a name-regeneration response. Throws Error{MissingField}.
ParsedName parse_name_response(std::string_view raw);

/// Reduces free text to one identifier token (alphanumerics and underscore).
/// Returns an empty string when nothing usable remains.
std::string sanitize_identifier(std::string_view text, std::vector<std::string>& warnings);

/// Sorts by (maliciousness desc, function_id asc) and keeps the longest prefix
/// whose blocks fit `budget_tokens` alongside the fixed prompt overhead. If the
/// top block alone does not fit, the best-ranked block that fits by itself is
/// returned. Throws Error{NothingFits} when no block fits.
std::vector<StructuredOutput> select_top_v(std::span<const StructuredOutput> outputs, std::size_t budget_tokens,
                                           const PromptBuilder& builder);

/// Sort order shared by top-v and top-k selection.
bool more_malicious(const StructuredOutput& a, const StructuredOutput& b);

} // namespace cama
