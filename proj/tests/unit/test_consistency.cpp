// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include <catch_amalgamated.hpp>

#include "cama/consistency.hpp"
#include "cama/error.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace cama;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kTol = 1e-9;

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, bool allow_zero_vector) {
    std::uniform_int_distribution<int> score(0, 10);
    std::bernoulli_distribution zero(0.2);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = zero(rng) ? 0.0 : score(rng);
    }
    if (!allow_zero_vector && std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
        v[0] = 1.0;
    }
    return v;
}

std::string random_identifier(std::mt19937_64& rng) {
    static const std::string alphabet = "abcdeXYZ_01";
    std::uniform_int_distribution<std::size_t> len(0, 12);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s(len(rng), ' ');
    for (auto& c : s) {
        c = alphabet[pick(rng)];
    }
    return s;
}

StructuredOutput output(const std::string& fid, double score, const std::string& name) {
    StructuredOutput o;
    o.apk_id = "app";
    o.function_id = fid;
    o.model_id = "m";
    o.summary = "s";
    o.suggested_name = name;
    o.maliciousness = score;
    return o;
}

} // namespace

TEST_CASE("kl divergence oracles") {
    const std::vector<double> p{0.5, 0.5};
    const std::vector<double> q{0.25, 0.75};
    CHECK_THAT(kl_divergence(p, q), WithinAbs(0.143841036225890, 1e-12));
    const std::vector<double> one{1.0, 0.0};
    CHECK_THAT(kl_divergence(one, p), WithinAbs(std::log(2.0), kTol));
    CHECK_THAT(kl_divergence(p, p), WithinAbs(0.0, kTol));
}

TEST_CASE("kl divergence errors") {
    const std::vector<double> p{0.5, 0.5};
    const std::vector<double> three{0.2, 0.3, 0.5};
    const std::vector<double> hole{1.0, 0.0};
    try {
        (void)kl_divergence(p, three);
        FAIL("expected LengthMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::LengthMismatch);
    }
    try {
        (void)kl_divergence(p, hole);
        FAIL("expected UnsupportedSupport");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnsupportedSupport);
    }
}

TEST_CASE("jsd and mcs oracles") {
    const std::vector<double> p{0.5, 0.5};
    const std::vector<double> q{0.25, 0.75};
    CHECK_THAT(jensen_shannon(p, q), WithinAbs(0.033822, 5e-7));
    const std::vector<double> raw{2, 2};
    const std::vector<double> des{1, 3};
    CHECK_THAT(mcs(raw, des), WithinAbs(0.951205, 1e-6));
    const std::vector<double> a{1, 0};
    const std::vector<double> b{0, 1};
    CHECK_THAT(jensen_shannon(a, b), WithinAbs(std::log(2.0), kTol));
    CHECK_THAT(mcs(a, b), WithinAbs(0.0, kTol));
    CHECK_THAT(mcs(raw, raw), WithinAbs(1.0, kTol));
}

TEST_CASE("normalize scores") {
    const std::vector<double> zeros{0, 0, 0, 0};
    for (const double x : normalize_scores(zeros)) {
        CHECK(x == 0.25);
    }
    const std::vector<double> v{1, 3};
    CHECK(normalize_scores(v) == std::vector<double>{0.25, 0.75});
    try {
        (void)normalize_scores(std::vector<double>{});
        FAIL("expected EmptyVector");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyVector);
    }
}

TEST_CASE("levenshtein and ncs oracles") {
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("", "abc") == 3);
    CHECK(levenshtein("same", "same") == 0);
    // code points, not bytes
    CHECK(levenshtein("caf\xc3\xa9", "cafe") == 1);
    CHECK_THAT(ncs("encryptData", "encryptFile"), WithinAbs(1.0 - 4.0 / 11.0, kTol));
    CHECK_THAT(ncs("", ""), WithinAbs(1.0, kTol));
    CHECK_THAT(ncs("  sendSms ", "sendSms"), WithinAbs(1.0, kTol));
    CHECK_THAT(ncs("abc", "xyz"), WithinAbs(0.0, kTol));
    // case-sensitive
    CHECK(ncs("SendSms", "sendSms") < 1.0);
}

TEST_CASE("consistency for one app") {
    ApkSample apk;
    apk.apk_id = "app";
    apk.function_ids = {"f1", "f2"};
    const std::vector<StructuredOutput> raw{output("f1", 2, "encryptData"), output("f2", 2, "sendSms")};
    const std::map<std::string, double> des{{"f1", 1}, {"f2", 3}};
    const std::map<std::string, std::string> names{{"f1", "encryptFile"}, {"f2", "sendSms"}};
    const auto rec = consistency_for_app(apk, raw, des, names);
    CHECK_THAT(rec.mcs, WithinAbs(0.951205, 1e-6));
    REQUIRE(rec.names.size() == 2);
    CHECK_THAT(rec.ncs_mean, WithinAbs((1.0 - 4.0 / 11.0 + 1.0) / 2.0, kTol));
    CHECK(!rec.uniform_fallback);

    const std::map<std::string, double> partial{{"f1", 1}};
    try {
        (void)consistency_for_app(apk, raw, partial, names);
        FAIL("expected CoverageMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CoverageMismatch);
    }

    const std::vector<StructuredOutput> zero{output("f1", 0, "a"), output("f2", 0, "b")};
    const std::map<std::string, double> even{{"f1", 5}, {"f2", 5}};
    const auto fallback = consistency_for_app(apk, zero, even, names);
    CHECK(fallback.uniform_fallback);
    CHECK_THAT(fallback.mcs, WithinAbs(1.0, kTol));
}

TEST_CASE("property: jsd matches the entropy oracle and mcs stays in range") {
    std::mt19937_64 rng(20260101);
    std::uniform_int_distribution<std::size_t> len(1, 40);
    for (int i = 0; i < 2000; ++i) {
        const auto n = len(rng);
        const auto raw = random_scores(rng, n, true);
        const auto des = random_scores(rng, n, true);
        const auto p = normalize_scores(raw);
        const auto q = normalize_scores(des);
        const double jsd = jensen_shannon(p, q);
        REQUIRE_THAT(jsd, WithinAbs(oracle::jsd_entropy(oracle::normalize(raw), oracle::normalize(des)), kTol));
        REQUIRE_THAT(jensen_shannon(q, p), WithinAbs(jsd, kTol));
        REQUIRE(jsd >= -kTol);
        REQUIRE(jsd <= std::log(2.0) + kTol);
        const double m = mcs(raw, des);
        REQUIRE(m >= -kTol);
        REQUIRE(m <= 1.0 + kTol);
        REQUIRE_THAT(mcs(raw, raw), WithinAbs(1.0, kTol));
    }
}

TEST_CASE("property: kl matches the base-2 oracle") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(1, 30);
    for (int i = 0; i < 1500; ++i) {
        const auto n = len(rng);
        const auto p = oracle::normalize(random_scores(rng, n, false));
        auto qraw = random_scores(rng, n, false);
        for (auto& x : qraw) {
            x += 0.5; // full support
        }
        const auto q = oracle::normalize(qraw);
        const double kl = kl_divergence(p, q);
        REQUIRE_THAT(kl, WithinAbs(oracle::kl_base2(p, q), kTol));
        REQUIRE(kl >= -kTol);
    }
}

TEST_CASE("property: levenshtein matches the matrix oracle and is a metric") {
    std::mt19937_64 rng(4242);
    for (int i = 0; i < 2000; ++i) {
        const auto a = random_identifier(rng);
        const auto b = random_identifier(rng);
        const auto c = random_identifier(rng);
        const auto ab = levenshtein(a, b);
        REQUIRE(ab == oracle::levenshtein_matrix(a, b));
        REQUIRE(ab == levenshtein(b, a));
        REQUIRE(levenshtein(a, a) == 0);
        REQUIRE(ab <= std::max(a.size(), b.size()));
        REQUIRE(levenshtein(a, c) <= ab + levenshtein(b, c));
        const double score = ncs(a, b);
        REQUIRE(score >= 0.0);
        REQUIRE(score <= 1.0);
        if (!a.empty() || !b.empty()) {
            REQUIRE_THAT(score, WithinAbs(1.0 - static_cast<double>(ab) / std::max(a.size(), b.size()), kTol));
        }
    }
}
