// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include <catch_amalgamated.hpp>

#include "cama/error.hpp"
#include "cama/semantic.hpp"
#include "cama/text.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace cama;
using Catch::Matchers::WithinAbs;

TEST_CASE("bleu oracles") {
    CHECK_THAT(bleu("the cat sat", "the cat ran"), WithinAbs(std::sqrt(2.0 / 3.0 * 1.0 / 2.0), 1e-9));
    CHECK_THAT(bleu("the cat sat", "the cat sat"), WithinAbs(1.0, 1e-9));
    CHECK_THAT(bleu("dog", "the cat"), WithinAbs(0.0, 1e-9));
    // clipped counts: p1 = 1/3 but no bigram matches, so the score is 0
    CHECK_THAT(bleu("the the the", "the cat"), WithinAbs(0.0, 1e-9));
    BleuOptions unigram;
    unigram.max_n = 1;
    CHECK_THAT(bleu("the the the", "the cat", unigram), WithinAbs(1.0 / 3.0, 1e-9));
    BleuOptions bp;
    bp.brevity_penalty = true;
    bp.max_n = 1;
    CHECK_THAT(bleu("the", "the cat", bp), WithinAbs(std::exp(1.0 - 2.0), 1e-9));
}

TEST_CASE("meteor oracles") {
    // m = 3, one chunk: F = 1, penalty 0.5 * (1/3)^3
    CHECK_THAT(meteor_lite("a b c", "a b c"), WithinAbs(1.0 - 0.5 / 27.0, 1e-9));
    // stem match walked/walking, m = 2, one chunk
    CHECK_THAT(meteor_lite("walked home", "walking home"), WithinAbs(1.0 - 0.5 / 8.0, 1e-9));
    CHECK_THAT(meteor_lite("alpha", "beta"), WithinAbs(0.0, 1e-9));

    const SynonymTable syn{{"steal", {"exfiltrate"}}};
    const double without = meteor_lite("steal data", "exfiltrate data");
    const double with = meteor_lite("steal data", "exfiltrate data", &syn);
    CHECK(with > without);
    CHECK_THAT(with, WithinAbs(1.0 - 0.5 / 8.0, 1e-9));
    // symmetric lookup
    CHECK_THAT(meteor_lite("exfiltrate data", "steal data", &syn), WithinAbs(with, 1e-9));
}

TEST_CASE("rouge-l oracles") {
    CHECK_THAT(rouge_l("the cat sat", "the cat ran"), WithinAbs(2.0 / 3.0, 1e-9));
    // LCS 2 of (3, 4): P = 2/3, R = 1/2
    CHECK_THAT(rouge_l("a b c", "a x b y"), WithinAbs(2.0 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5), 1e-9));
}

TEST_CASE("empty inputs score zero with a warning") {
    std::vector<std::string> warnings;
    CHECK(bleu("", "the cat", {}, &warnings) == 0.0);
    CHECK(meteor_lite("the cat", "", nullptr, &warnings) == 0.0);
    CHECK(rouge_l("", "", &warnings) == 0.0);
    CHECK(warnings.size() == 3);
}

TEST_CASE("semantic record requires a reference") {
    AppDescription d;
    d.apk_id = "app";
    d.text = "steals credentials";
    try {
        (void)semantic_for_app(d);
        FAIL("expected MissingReference");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingReference);
    }
    d.reference = "steals credentials";
    const auto rec = semantic_for_app(d);
    CHECK_THAT(rec.bleu, WithinAbs(1.0, 1e-9));
    CHECK_THAT(rec.rouge_l, WithinAbs(1.0, 1e-9));
}

TEST_CASE("synonym file loading") {
    const auto path = std::filesystem::temp_directory_path() / "cama_synonyms.json";
    write_file_atomic(path, R"({"steal": ["exfiltrate", "grab"]})");
    const auto table = load_synonyms(path);
    REQUIRE(table.count("steal") == 1);
    CHECK(table.at("steal").count("grab") == 1);
    write_file_atomic(path, "not json");
    CHECK_THROWS_AS(load_synonyms(path), Error);
}

TEST_CASE("property: text metrics stay in [0, 1] and identical text is maximal") {
    static const std::vector<std::string> vocab{"the", "app", "sends", "sent", "data", "to", "a",
                                                "remote", "server", "steals", "sms", "ads"};
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> len(0, 15);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    auto sentence = [&] {
        std::vector<std::string> words(len(rng));
        for (auto& w : words) {
            w = vocab[pick(rng)];
        }
        return words;
    };
    for (int i = 0; i < 1500; ++i) {
        const auto a = sentence();
        const auto b = sentence();
        const auto ta = join(a, " ");
        const auto tb = join(b, " ");
        for (const double v : {bleu(ta, tb), meteor_lite(ta, tb), rouge_l(ta, tb)}) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0 + 1e-12);
        }
        if (!a.empty() && !b.empty()) {
            const double l = static_cast<double>(oracle::lcs(a, b));
            const double expected = l == 0.0 ? 0.0 : 2.0 * l / static_cast<double>(a.size() + b.size());
            REQUIRE_THAT(rouge_l(ta, tb), WithinAbs(expected, 1e-9));
            REQUIRE_THAT(rouge_l(ta, ta), WithinAbs(1.0, 1e-9));
            REQUIRE_THAT(rouge_l(ta, tb), WithinAbs(rouge_l(tb, ta), 1e-9));
        }
        if (a.size() >= 2) {
            REQUIRE_THAT(bleu(ta, ta), WithinAbs(1.0, 1e-9));
        }
    }
}
