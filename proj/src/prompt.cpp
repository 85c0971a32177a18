// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/prompt.hpp"

#include "cama/error.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <regex>

namespace cama {

std::string_view to_string(PromptKind kind) noexcept {
    switch (kind) {
    case PromptKind::FunctionSummarization: return "function_summarization";
    case PromptKind::DescriptorScore: return "descriptor_score";
    case PromptKind::NameRegen: return "name_regen";
    case PromptKind::AppPurpose: return "app_purpose";
    }
    return "unknown";
}

std::string render_descriptor(std::string_view summary, std::string_view name) {
    return fmt::format("Summary: {}\nSuggested name: {}", summary, name);
}

Descriptor make_descriptor(const StructuredOutput& output) {
    return {output.key(), render_descriptor(output.summary, output.suggested_name)};
}

// ---------------------------------------------------------------------------
// Templates

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.role = "You are a cybersecurity expert specializing in reverse engineering and malware analysis.";
    t.function_summarization =
        "[INST]\n"
        "You are a cybersecurity expert specializing in reverse engineering and malware analysis. Your task is to "
        "analyze a decompiled Android function and generate a structured function summary based on the following "
        "aspects :\n"
        " 1. Function Summary : {summary_requirement}\n"
        " 2. Suggested Function Name : {name_requirement}\n"
        " 3. Malicious Score(0-10) : {score_requirement}\n"
        "[/INST]\n"
        "\n"
        "[FUNC]\n"
        "{decompiled_code}\n"
        "[/FUNC]";
    t.descriptor_score = "Task: Given a function descriptor, {score_requirement}\n"
                         "Input: A function descriptor: {descriptor}\n"
                         "Output: A numerical maliciousness score between 0 and 10, where 10 represents highly "
                         "malicious behavior.";
    t.name_regen = "Task: Given a function summary, {name_requirement}\n"
                   "Input: A function summary: {summary}\n"
                   "Output: A concise, descriptive function name.";
    t.app_purpose = "Task: Given the structured function-level analyses, generate a concise and comprehensive "
                    "description of the overall application's purpose.\n"
                    "Input: A set of top-{v} malicious functions:\n"
                    "{function_blocks}\n"
                    "Output: An application purpose description summarizing the app's behavior and potential "
                    "security risks. Begin the description with the phrase \"{prefix}\"";
    t.app_purpose_block = "Function {index}:\n"
                          "Function Summary: {summary}\n"
                          "Refined Function Name: {name}\n"
                          "Maliciousness Score: {score}";
    t.summary_requirement = "<Provide a brief, high-level description of what this function does. Summarize its "
                            "purpose, key operations, and intent.>";
    t.name_requirement = "<Suggest a clearer, more descriptive function name that accurately represents its "
                         "behavior.>";
    t.score_requirement = "<Rate the function's maliciousness on a scale from 0 to 10, where:\n"
                          " 0 - Benign : No suspicious activity.\n"
                          " 1-3 - Potentially Safe but Risky : Performs sensitive actions but could be legitimate.\n"
                          " 4-6 - Suspicious : Uses permissions or techniques common in malware.\n"
                          " 7-10 - Highly Malicious : Strong indicators of malware behavior.>";
    t.description_prefix = "This application appears to...";
    return t;
}

const std::vector<std::pair<std::string, std::string PromptTemplates::*>>& PromptTemplates::files() {
    static const std::vector<std::pair<std::string, std::string PromptTemplates::*>> table = {
        {"role.txt", &PromptTemplates::role},
        {"function_summarization.txt", &PromptTemplates::function_summarization},
        {"descriptor_score.txt", &PromptTemplates::descriptor_score},
        {"name_regen.txt", &PromptTemplates::name_regen},
        {"app_purpose.txt", &PromptTemplates::app_purpose},
        {"app_purpose_block.txt", &PromptTemplates::app_purpose_block},
        {"summary_requirement.txt", &PromptTemplates::summary_requirement},
        {"name_requirement.txt", &PromptTemplates::name_requirement},
        {"score_requirement.txt", &PromptTemplates::score_requirement},
        {"description_prefix.txt", &PromptTemplates::description_prefix},
    };
    return table;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    auto t = defaults();
    for (const auto& [name, member] : files()) {
        const auto path = dir / name;
        if (!std::filesystem::exists(path)) {
            continue;
        }
        auto content = read_file(path);
        if (content.ends_with('\n')) {
            content.pop_back();
        }
        t.*member = std::move(content);
    }
    return t;
}

std::string fill_template(std::string_view tmpl, std::span<const std::pair<std::string_view, std::string_view>> values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const auto name = tmpl.substr(i + 1, close - i - 1);
                const auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
                if (it != values.end()) {
                    out.append(it->second);
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

bool escape_delimiters(std::string& content) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 4> rules = {{
        {"[INST]", "[\\INST]"},
        {"[/INST]", "[\\/INST]"},
        {"[FUNC]", "[\\FUNC]"},
        {"[/FUNC]", "[\\/FUNC]"},
    }};
    bool changed = false;
    std::string out;
    out.reserve(content.size());
    std::size_t i = 0;
    while (i < content.size()) {
        bool hit = false;
        if (content[i] == '[') {
            for (const auto& [from, to] : rules) {
                if (std::string_view(content).substr(i, from.size()) == from) {
                    out.append(to);
                    i += from.size();
                    hit = true;
                    changed = true;
                    break;
                }
            }
        }
        if (!hit) {
            out.push_back(content[i]);
            ++i;
        }
    }
    content = std::move(out);
    return changed;
}

std::string format_score(double score) { return fmt::format("{:g}", score); }

// ---------------------------------------------------------------------------
// Builders

PromptBuilder::PromptBuilder(PromptTemplates templates, PromptOptions options)
    : templates_(std::move(templates)), options_(options) {}

PromptText PromptBuilder::finish(PromptKind kind, std::string text) const {
    PromptText p;
    p.kind = kind;
    p.system = templates_.role;
    p.text = std::move(text);
    p.token_estimate = estimate_tokens(p.text, options_.chars_per_token);
    return p;
}

namespace {

std::string escaped(std::string_view content, std::string_view what, std::vector<std::string>& warnings) {
    std::string out(content);
    if (escape_delimiters(out)) {
        warnings.push_back(fmt::format("delimiter token inside {} was escaped", what));
    }
    return out;
}

} // namespace

PromptText PromptBuilder::function_prompt(const FunctionRecord& function) const {
    std::vector<std::string> warnings;
    const auto code = escaped(function.code, "code", warnings);
    const std::array<std::pair<std::string_view, std::string_view>, 4> values = {{
        {"summary_requirement", templates_.summary_requirement},
        {"name_requirement", templates_.name_requirement},
        {"score_requirement", templates_.score_requirement},
        {"decompiled_code", code},
    }};
    auto p = finish(PromptKind::FunctionSummarization, fill_template(templates_.function_summarization, values));
    p.warnings = std::move(warnings);
    if (options_.budget_tokens && p.token_estimate > *options_.budget_tokens) {
        throw Error(ErrorKind::CodeTooLong,
                    fmt::format("{}/{}: prompt needs {} tokens, budget is {}", function.apk_id, function.function_id,
                                p.token_estimate, *options_.budget_tokens));
    }
    return p;
}

PromptText PromptBuilder::descriptor_score_prompt(const Descriptor& descriptor) const {
    std::vector<std::string> warnings;
    const auto text = escaped(descriptor.text, "descriptor", warnings);
    const std::array<std::pair<std::string_view, std::string_view>, 2> values = {{
        {"score_requirement", templates_.score_requirement},
        {"descriptor", text},
    }};
    auto p = finish(PromptKind::DescriptorScore, fill_template(templates_.descriptor_score, values));
    p.warnings = std::move(warnings);
    return p;
}

PromptText PromptBuilder::name_regen_prompt(std::string_view summary) const {
    std::vector<std::string> warnings;
    const auto text = escaped(summary, "summary", warnings);
    const std::array<std::pair<std::string_view, std::string_view>, 2> values = {{
        {"name_requirement", templates_.name_requirement},
        {"summary", text},
    }};
    auto p = finish(PromptKind::NameRegen, fill_template(templates_.name_regen, values));
    p.warnings = std::move(warnings);
    return p;
}

std::string PromptBuilder::render_block(const StructuredOutput& output, std::size_t index) const {
    std::vector<std::string> ignored;
    const auto summary = escaped(output.summary, "summary", ignored);
    const auto name = escaped(output.suggested_name, "name", ignored);
    const auto idx = std::to_string(index);
    const auto score = format_score(output.maliciousness);
    const std::array<std::pair<std::string_view, std::string_view>, 4> values = {{
        {"index", idx},
        {"summary", summary},
        {"name", name},
        {"score", score},
    }};
    return fill_template(templates_.app_purpose_block, values);
}

PromptText PromptBuilder::app_purpose_prompt(std::span<const StructuredOutput> outputs) const {
    if (outputs.empty()) {
        throw Error(ErrorKind::EmptyList, "app purpose prompt needs at least one function output");
    }
    std::vector<std::string> blocks;
    blocks.reserve(outputs.size());
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        std::string probe = outputs[i].summary + outputs[i].suggested_name;
        if (escape_delimiters(probe)) {
            warnings.push_back(fmt::format("delimiter token inside output {} was escaped", outputs[i].function_id));
        }
        blocks.push_back(render_block(outputs[i], i + 1));
    }
    const auto joined = join(blocks, "\n\n");
    const auto v = std::to_string(outputs.size());
    const std::array<std::pair<std::string_view, std::string_view>, 3> values = {{
        {"v", v},
        {"function_blocks", joined},
        {"prefix", templates_.description_prefix},
    }};
    auto p = finish(PromptKind::AppPurpose, fill_template(templates_.app_purpose, values));
    p.warnings = std::move(warnings);
    return p;
}

std::size_t PromptBuilder::app_purpose_overhead_tokens(std::size_t max_blocks) const {
    // widest possible rendering of {v}
    const std::string v(std::to_string(std::max<std::size_t>(max_blocks, 1)).size(), '9');
    const std::array<std::pair<std::string_view, std::string_view>, 3> values = {{
        {"v", v},
        {"function_blocks", ""},
        {"prefix", templates_.description_prefix},
    }};
    return estimate_tokens(fill_template(templates_.app_purpose, values), options_.chars_per_token);
}

std::size_t PromptBuilder::app_purpose_block_tokens(const StructuredOutput& output, std::size_t index) const {
    auto block = render_block(output, index);
    if (index > 1) {
        block.insert(0, "\n\n");
    }
    return estimate_tokens(block, options_.chars_per_token);
}

// ---------------------------------------------------------------------------
// Response parsing

namespace {

struct LabelHit {
    std::size_t begin = 0;
    std::size_t end = 0;
};

std::optional<LabelHit> find_label(const std::string& text, const std::vector<std::regex>& patterns) {
    for (const auto& re : patterns) {
        std::smatch m;
        if (std::regex_search(text, m, re)) {
            return LabelHit{static_cast<std::size_t>(m.position(0)),
                            static_cast<std::size_t>(m.position(0) + m.length(0))};
        }
    }
    return std::nullopt;
}

const std::vector<std::regex>& summary_labels() {
    static const std::vector<std::regex> re = {
        std::regex(R"(\bfunction[ \t]+summary\b)", std::regex::icase),
        std::regex(R"(\bsummary\b)", std::regex::icase),
    };
    return re;
}

const std::vector<std::regex>& name_labels() {
    static const std::vector<std::regex> re = {
        std::regex(R"(\bsuggested[ \t]+function[ \t]+name\b)", std::regex::icase),
        std::regex(R"(\b(refined[ \t]+)?function[ \t]+name\b)", std::regex::icase),
        std::regex(R"(\bsuggested[ \t]+name\b)", std::regex::icase),
    };
    return re;
}

const std::vector<std::regex>& score_labels() {
    static const std::vector<std::regex> re = {
        std::regex(R"(\bmalicious(ness)?[ \t]+score\b([ \t]*\([ \t]*0[ \t]*(-|to)[ \t]*10[ \t]*\))?)",
                   std::regex::icase),
    };
    return re;
}

std::string_view strip_value(std::string_view v) {
    // leading separators: ':', '-', '=', markdown emphasis, whitespace
    constexpr std::string_view lead = " \t\r\n:-=*_>";
    const auto b = v.find_first_not_of(lead);
    if (b == std::string_view::npos) {
        return {};
    }
    v.remove_prefix(b);
    v = trim(v);
    // trailing list marker belonging to the next item, e.g. "... 2." or "**"
    static const std::regex tail(R"((\s*(\d+[.)]|[-*#]+))+\s*$)");
    std::string s(v);
    std::smatch m;
    if (std::regex_search(s, m, tail)) {
        v = v.substr(0, static_cast<std::size_t>(m.position(0)));
    }
    return trim(v);
}

const std::regex& number_re() {
    static const std::regex re(R"(-?\d+(\.\d+)?)");
    return re;
}

std::optional<double> first_number(const std::string& text) {
    // a restated "0-10" / "0 to 10" range is not an answer
    static const std::regex scale(R"(\(?\b0[ \t]*(-|to)[ \t]*10\b\)?)", std::regex::icase);
    const auto cleaned = std::regex_replace(text, scale, " ");
    std::smatch m;
    if (!std::regex_search(cleaned, m, number_re())) {
        return std::nullopt;
    }
    return std::stod(m.str(0));
}

double clamp_score(double value, std::vector<std::string>& warnings) {
    if (value < 0.0 || value > 10.0) {
        const auto clamped = std::clamp(value, 0.0, 10.0);
        warnings.push_back(fmt::format("score {} clamped to {}", format_score(value), format_score(clamped)));
        return clamped;
    }
    return value;
}

} // namespace

std::string sanitize_identifier(std::string_view text, std::vector<std::string>& warnings) {
    auto line = trim(text);
    const auto nl = line.find('\n');
    if (nl != std::string_view::npos) {
        line = trim(line.substr(0, nl));
        warnings.push_back("name: text after the first line dropped");
    }
    // a backtick-quoted identifier wins over surrounding prose
    const auto tick = line.find('`');
    if (tick != std::string_view::npos) {
        const auto close = line.find('`', tick + 1);
        if (close != std::string_view::npos && close > tick + 1) {
            line = line.substr(tick + 1, close - tick - 1);
        }
    }
    std::string_view word;
    std::size_t pos = 0;
    while (pos < line.size()) {
        const auto b = line.find_first_not_of(" \t", pos);
        if (b == std::string_view::npos) {
            break;
        }
        auto e = line.find_first_of(" \t", b);
        if (e == std::string_view::npos) {
            e = line.size();
        }
        const auto candidate = line.substr(b, e - b);
        if (std::any_of(candidate.begin(), candidate.end(), is_identifier_char)) {
            word = candidate;
            if (trim(line.substr(e)).size() > 0) {
                warnings.push_back("name: extra words dropped");
            }
            break;
        }
        pos = e;
    }
    std::string out;
    for (const char c : word) {
        if (is_identifier_char(c)) {
            out.push_back(c);
        }
    }
    if (out.size() != word.size()) {
        warnings.push_back("name: non-identifier characters stripped");
    }
    return out;
}

StructuredOutput parse_structured_output(std::string_view raw, const FunctionKey& key, std::string model_id) {
    const std::string text(raw);
    const auto summary = find_label(text, summary_labels());
    const auto name = find_label(text, name_labels());
    const auto score = find_label(text, score_labels());

    // "Summary" on its own must not match inside another label
    std::optional<LabelHit> summary_hit = summary;
    if (summary_hit && name && summary_hit->begin >= name->begin && summary_hit->end <= name->end) {
        summary_hit.reset();
    }

    if (!summary_hit) {
        throw Error(ErrorKind::MissingField, "summary");
    }
    if (!name) {
        throw Error(ErrorKind::MissingField, "name");
    }
    if (!score) {
        throw Error(ErrorKind::MissingField, "score");
    }

    const std::array<LabelHit, 3> hits = {*summary_hit, *name, *score};
    auto value_of = [&](const LabelHit& hit) {
        std::size_t end = text.size();
        for (const auto& other : hits) {
            if (other.begin >= hit.end && other.begin < end) {
                end = other.begin;
            }
        }
        return std::string_view(text).substr(hit.end, end - hit.end);
    };

    StructuredOutput out;
    out.apk_id = key.apk_id;
    out.function_id = key.function_id;
    out.model_id = std::move(model_id);
    out.raw_response = text;

    out.summary = std::string(strip_value(value_of(*summary_hit)));
    if (out.summary.empty()) {
        throw Error(ErrorKind::MissingField, "summary");
    }

    out.suggested_name = sanitize_identifier(strip_value(value_of(*name)), out.parse_warnings);
    if (out.suggested_name.empty()) {
        throw Error(ErrorKind::MissingField, "name");
    }

    const auto number = first_number(std::string(value_of(*score)));
    if (!number) {
        throw Error(ErrorKind::NoNumericScore, "no number after the score label");
    }
    out.maliciousness = clamp_score(*number, out.parse_warnings);
    return out;
}

ParsedScore parse_score_response(std::string_view raw) {
    const std::string text(raw);
    ParsedScore out;
    std::string region = text;
    if (const auto label = find_label(text, score_labels())) {
        region = text.substr(label->end);
    }
    auto number = first_number(region);
    if (!number && region.size() != text.size()) {
        number = first_number(text);
    }
    if (!number) {
        throw Error(ErrorKind::NoNumericScore, "response carries no number");
    }
    out.score = clamp_score(*number, out.warnings);
    return out;
}

ParsedName parse_name_response(std::string_view raw) {
    static const std::regex label(R"(^\s*((suggested|refined|new)[ \t]+)?(function[ \t]+)?name[ \t]*[:\-=])",
                                  std::regex::icase);
    std::string text(trim(raw));
    std::smatch m;
    if (std::regex_search(text, m, label)) {
        text = text.substr(static_cast<std::size_t>(m.position(0) + m.length(0)));
    }
    ParsedName out;
    out.name = sanitize_identifier(strip_value(text), out.warnings);
    if (out.name.empty()) {
        throw Error(ErrorKind::MissingField, "name");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Top-v selection

bool more_malicious(const StructuredOutput& a, const StructuredOutput& b) {
    if (a.maliciousness != b.maliciousness) {
        return a.maliciousness > b.maliciousness;
    }
    if (a.function_id != b.function_id) {
        return a.function_id < b.function_id;
    }
    return a.apk_id < b.apk_id;
}

std::vector<StructuredOutput> select_top_v(std::span<const StructuredOutput> outputs, std::size_t budget_tokens,
                                           const PromptBuilder& builder) {
    if (budget_tokens == 0) {
        throw Error(ErrorKind::NothingFits, "budget must be positive");
    }
    std::vector<StructuredOutput> sorted(outputs.begin(), outputs.end());
    std::sort(sorted.begin(), sorted.end(), more_malicious);

    const auto overhead = builder.app_purpose_overhead_tokens(sorted.size());
    std::vector<StructuredOutput> picked;
    std::size_t used = overhead;
    for (const auto& o : sorted) {
        const auto cost = builder.app_purpose_block_tokens(o, picked.size() + 1);
        if (used + cost > budget_tokens) {
            break;
        }
        used += cost;
        picked.push_back(o);
    }
    if (!picked.empty()) {
        return picked;
    }
    for (const auto& o : sorted) {
        if (overhead + builder.app_purpose_block_tokens(o, 1) <= budget_tokens) {
            return {o};
        }
    }
    throw Error(ErrorKind::NothingFits,
                fmt::format("no function block fits a budget of {} tokens (overhead {})", budget_tokens, overhead));
}

} // namespace cama
