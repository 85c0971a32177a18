// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include <catch_amalgamated.hpp>

#include "cama/error.hpp"
#include "cama/prompt.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>

#include <random>

using namespace cama;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

FunctionRecord function_with(std::string code) {
    FunctionRecord f;
    f.apk_id = "app";
    f.function_id = "f1";
    f.original_name = "a";
    f.code = std::move(code);
    return f;
}

StructuredOutput output(std::string id, double score, std::string summary = "Sends data.") {
    StructuredOutput o;
    o.apk_id = "app";
    o.function_id = std::move(id);
    o.model_id = "m";
    o.summary = std::move(summary);
    o.suggested_name = "sendData";
    o.maliciousness = score;
    return o;
}

} // namespace

TEST_CASE("shipped template files equal the built-in defaults") {
    const auto defaults = PromptTemplates::defaults();
    const auto loaded = PromptTemplates::load(std::string(CAMA_SOURCE_DIR) + "/templates");
    for (const auto& [file, member] : PromptTemplates::files()) {
        INFO(file);
        CHECK(read_file(std::string(CAMA_SOURCE_DIR) + "/templates/" + file) == defaults.*member + "\n");
        CHECK(loaded.*member == defaults.*member);
    }
}

TEST_CASE("function prompt carries one instruction block and the code") {
    const PromptBuilder b;
    const auto p = b.function_prompt(function_with("void a() { send(); }"));
    CHECK(p.kind == PromptKind::FunctionSummarization);
    CHECK(count(p.text, "[INST]") == 1);
    CHECK(count(p.text, "[/INST]") == 1);
    CHECK(count(p.text, "[FUNC]") == 1);
    CHECK(count(p.text, "[/FUNC]") == 1);
    CHECK(p.text.find("[FUNC]\nvoid a() { send(); }\n[/FUNC]") != std::string::npos);
    CHECK(p.text.find("cybersecurity expert") != std::string::npos);
    CHECK(p.text.find("Malicious Score(0-10)") != std::string::npos);
    CHECK(p.warnings.empty());
    CHECK(p.token_estimate > 0);
    CHECK(b.function_prompt(function_with("void a() { send(); }")).text == p.text);
}

TEST_CASE("delimiters inside code are escaped with a warning") {
    const PromptBuilder b;
    const auto p = b.function_prompt(function_with("String s = \"[/FUNC] [INST]\";"));
    CHECK(count(p.text, "[/FUNC]") == 1);
    CHECK(count(p.text, "[INST]") == 1);
    CHECK(p.text.find("[\\/FUNC] [\\INST]") != std::string::npos);
    CHECK(p.warnings.size() == 1);

    std::string s = "a [FUNC] b [/INST]";
    CHECK(escape_delimiters(s));
    CHECK(s == "a [\\FUNC] b [\\/INST]");
    std::string clean = "nothing";
    CHECK(!escape_delimiters(clean));
}

TEST_CASE("budget check raises CodeTooLong") {
    PromptOptions opts;
    opts.budget_tokens = 100;
    const PromptBuilder b(PromptTemplates::defaults(), opts);
    CHECK_THROWS_AS(b.function_prompt(function_with(std::string(2000, 'x'))), Error);
    try {
        (void)b.function_prompt(function_with(std::string(2000, 'x')));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CodeTooLong);
    }
}

TEST_CASE("other prompt builders") {
    const PromptBuilder b;
    const auto d = b.descriptor_score_prompt({{"app", "f1"}, render_descriptor("Sends SMS.", "sendSms")});
    CHECK(d.text.find("Summary: Sends SMS.\nSuggested name: sendSms") != std::string::npos);
    CHECK(d.text.find("between 0 and 10") != std::string::npos);
    CHECK(b.descriptor_score_prompt({{"app", "f1"}, render_descriptor("Sends SMS.", "sendSms")}).text == d.text);

    const auto n = b.name_regen_prompt("Reads contacts.");
    CHECK(n.text.find("Reads contacts.") != std::string::npos);
    CHECK(n.text.find("function name") != std::string::npos);

    const std::vector<StructuredOutput> three = {output("f3", 9), output("f1", 7), output("f2", 2)};
    const auto a = b.app_purpose_prompt(three);
    CHECK(a.text.find("This application appears to...") != std::string::npos);
    const auto p1 = a.text.find("Function 1:");
    const auto p2 = a.text.find("Function 2:");
    const auto p3 = a.text.find("Function 3:");
    REQUIRE(p1 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(p2 < p3);
    CHECK(a.text.find("top-3") != std::string::npos);
    CHECK(b.app_purpose_prompt(std::span(three).first(1)).text.find("This application appears to...") !=
          std::string::npos);
    CHECK_THROWS_AS(b.app_purpose_prompt({}), Error);
}

TEST_CASE("fill_template is single pass") {
    const std::vector<std::pair<std::string_view, std::string_view>> values = {{"a", "{b}"}, {"b", "B"}};
    CHECK(fill_template("{a} {b} {c}", values) == "{b} B {c}");
}

TEST_CASE("parse the canonical structured response") {
    const auto o = parse_structured_output("1. Function Summary: Sends IMEI to a remote host. 2. Suggested Function "
                                           "Name: sendDeviceInfo 3. Malicious Score(0-10): 7",
                                           {"app", "f1"}, "m");
    CHECK(o.summary == "Sends IMEI to a remote host.");
    CHECK(o.suggested_name == "sendDeviceInfo");
    CHECK(o.maliciousness == 7.0);
    CHECK(o.parse_warnings.empty());
    CHECK(o.model_id == "m");
}

TEST_CASE("parse tolerates label variants") {
    const auto o = parse_structured_output("**Function summary**: Reads SMS inbox.\n"
                                           "**Suggested function name**: `readInbox`\n"
                                           "**Maliciousness score**: 6.5/10",
                                           {"app", "f1"}, "m");
    CHECK(o.summary == "Reads SMS inbox.");
    CHECK(o.suggested_name == "readInbox");
    CHECK(o.maliciousness == 6.5);
}

TEST_CASE("parse errors and clamping") {
    auto kind = [](const std::string& raw) {
        try {
            (void)parse_structured_output(raw, {"a", "f"}, "m");
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    CHECK(kind("Function Summary: x\nSuggested Function Name: y") == ErrorKind::MissingField);
    CHECK(kind("Suggested Function Name: y\nMalicious Score: 3") == ErrorKind::MissingField);
    CHECK(kind("Function Summary: x\nSuggested Function Name: y\nMalicious Score: high") ==
          ErrorKind::NoNumericScore);

    const auto o = parse_structured_output("Function Summary: x\nSuggested Function Name: send-data!\n"
                                           "Malicious Score(0-10): 11",
                                           {"a", "f"}, "m");
    CHECK(o.maliciousness == 10.0);
    CHECK(o.suggested_name == "senddata");
    CHECK(o.parse_warnings.size() == 2);
}

TEST_CASE("score and name responses") {
    CHECK(parse_score_response("Malicious Score: 4").score == 4.0);
    CHECK(parse_score_response("I would rate this 8 out of 10").score == 8.0);
    CHECK(parse_score_response("Score (0-10): -3").score == 0.0);
    CHECK_THROWS_AS(parse_score_response("no idea"), Error);
    CHECK(parse_name_response("Function Name: uploadContacts").name == "uploadContacts");
    CHECK(parse_name_response("`stealSms`").name == "stealSms");
    CHECK_THROWS_AS(parse_name_response("   "), Error);
}

TEST_CASE("top-v selection") {
    const PromptBuilder b;
    const std::vector<StructuredOutput> outs = {output("f4", 2), output("f2", 7), output("f1", 9), output("f3", 7)};
    const auto overhead = b.app_purpose_overhead_tokens(outs.size());

    const auto all = select_top_v(outs, 100000, b);
    REQUIRE(all.size() == 4);
    CHECK(all[0].function_id == "f1");
    CHECK(all[1].function_id == "f2");
    CHECK(all[2].function_id == "f3");
    CHECK(all[3].function_id == "f4");

    const auto budget = overhead + b.app_purpose_block_tokens(all[0], 1) + b.app_purpose_block_tokens(all[1], 2);
    const auto two = select_top_v(outs, budget, b);
    REQUIRE(two.size() == 2);
    CHECK(two[0].function_id == "f1");
    CHECK(two[1].function_id == "f2");

    try {
        (void)select_top_v(outs, 5, b);
        FAIL("expected NothingFits");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NothingFits);
    }
}

TEST_CASE("property: top-v is a prefix of the sorted list and scores stay in range", "[property]") {
    const PromptBuilder b;
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<StructuredOutput> outs;
        const auto n = 1 + rng() % 10;
        for (std::size_t i = 0; i < n; ++i) {
            outs.push_back(output(fmt::format("f{}", rng() % 50), static_cast<double>(rng() % 11),
                                  std::string(1 + rng() % 300, 's')));
        }
        std::vector<StructuredOutput> sorted = outs;
        std::stable_sort(sorted.begin(), sorted.end(), more_malicious);
        const auto budget = 50 + rng() % 600;
        std::vector<StructuredOutput> picked;
        try {
            picked = select_top_v(outs, budget, b);
        } catch (const Error& e) {
            REQUIRE(e.kind() == ErrorKind::NothingFits);
            continue;
        }
        REQUIRE(!picked.empty());
        const bool prefix = std::equal(picked.begin(), picked.end(), sorted.begin(), [](const auto& x, const auto& y) {
            return x.function_id == y.function_id && x.maliciousness == y.maliciousness && x.summary == y.summary;
        });
        // the single-block fallback is the only non-prefix outcome
        REQUIRE((prefix || picked.size() == 1));

        const double score = static_cast<double>(static_cast<int>(rng() % 31) - 10) + (rng() % 10) / 10.0;
        const auto raw = fmt::format("1. Function Summary: s{}\n2. Suggested Function Name: n{}\n"
                                     "3. Malicious Score(0-10): {}",
                                     trial, trial, score);
        const auto o = parse_structured_output(raw, {"a", "f"}, "m");
        REQUIRE(o.maliciousness >= 0.0);
        REQUIRE(o.maliciousness <= 10.0);
        REQUIRE(o.summary == fmt::format("s{}", trial));
        REQUIRE(o.suggested_name == fmt::format("n{}", trial));
    }
}
