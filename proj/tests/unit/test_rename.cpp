// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include <catch_amalgamated.hpp>

#include "cama/error.hpp"
#include "cama/rename.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <random>

using namespace cama;
using Catch::Matchers::WithinAbs;

namespace {

struct Fn {
    std::string id;
    std::string name;
    std::string code;
};

Corpus corpus_of(const std::vector<Fn>& fns, const std::string& apk = "app") {
    const std::string manifest = nlohmann::json::array({{{"apk_id", apk},
                                                         {"category", "c"},
                                                         {"family", "f"},
                                                         {"size_bytes", 1},
                                                         {"method_count", fns.size()}}})
                                     .dump();
    std::string functions;
    for (const auto& f : fns) {
        functions += nlohmann::json{{"apk_id", apk},
                                    {"function_id", f.id},
                                    {"class_name", "C"},
                                    {"method_name", f.name},
                                    {"signature", "void " + f.name + "()"},
                                    {"code", f.code}}
                         .dump() +
                     "\n";
    }
    return parse_corpus(manifest, functions, {}, "test");
}

std::vector<StructuredOutput> suggestions(const Corpus& corpus, const std::map<std::string, std::string>& names) {
    std::vector<StructuredOutput> out;
    for (const auto& [key, f] : corpus.functions) {
        StructuredOutput o;
        o.apk_id = key.apk_id;
        o.function_id = key.function_id;
        o.model_id = "m";
        const auto it = names.find(key.function_id);
        o.suggested_name = it == names.end() ? f.original_name : it->second;
        out.push_back(o);
    }
    return out;
}

RenameResult rename_all(const Corpus& corpus, const std::vector<StructuredOutput>& outs,
                        RenameScope scope = RenameScope::AllSites) {
    return apply_renames(corpus, {build_rename_map(corpus, "app", outs)}, scope);
}

} // namespace

TEST_CASE("copy rate counts exact matches") {
    const auto corpus = corpus_of({{"f1", "a", "void a() {}"},
                                   {"f2", "b", "void b() {}"},
                                   {"f3", "c", "void c() {}"},
                                   {"f4", "d", "void d() {}"}});
    const auto outs = suggestions(corpus, {{"f1", "sendSms"}, {"f2", "readFile"}});
    CHECK_THAT(compute_copy_rate(outs, corpus), WithinAbs(0.5, 1e-12));
    CHECK(!exceeds_copy_threshold(0.5));
    CHECK(exceeds_copy_threshold(0.75));
    CHECK(!exceeds_copy_threshold(1.0, 1.0));

    const std::vector<StructuredOutput> partial(outs.begin(), outs.begin() + 3);
    try {
        (void)compute_copy_rate(partial, corpus);
        FAIL("expected CoverageMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CoverageMismatch);
    }
}

TEST_CASE("colliding suggestions get numeric suffixes") {
    const auto corpus = corpus_of({{"f1", "a", "void a() { b(); }"},
                                   {"f2", "b", "void b() { c(); }"},
                                   {"f3", "sendData", "void sendData() {}"}});
    const auto outs = suggestions(corpus, {{"f1", "sendData"}, {"f2", "sendData"}});
    const auto map = build_rename_map(corpus, "app", outs);
    CHECK(map.entries.at("f1").final_name() == "sendData_2");
    CHECK(map.entries.at("f2").final_name() == "sendData_3");
    CHECK(map.entries.at("f3").final_name() == "sendData");
    CHECK(!map.entries.at("f3").applied);

    const auto plain = corpus_of({{"f1", "a", "void a() {}"}, {"f2", "b", "void b() {}"}});
    const auto m2 = build_rename_map(plain, "app", suggestions(plain, {{"f1", "sendData"}, {"f2", "sendData"}}));
    CHECK(m2.entries.at("f1").final_name() == "sendData");
    CHECK(m2.entries.at("f2").final_name() == "sendData_2");
    CHECK(m2.entries.at("f2").collision_suffix == 2);
}

TEST_CASE("renames are simultaneous: a swap does not cascade") {
    const auto corpus = corpus_of({{"f1", "alpha", "void alpha() { beta(); }"},
                                   {"f2", "beta", "void beta() { alpha(); alphabet(); }"}});
    const auto r = rename_all(corpus, suggestions(corpus, {{"f1", "beta"}, {"f2", "alpha"}}));
    CHECK(r.corpus.functions.at({"app", "f1"}).code == "void beta() { alpha(); }");
    CHECK(r.corpus.functions.at({"app", "f2"}).code == "void alpha() { beta(); alphabet(); }");
    CHECK(r.corpus.functions.at({"app", "f1"}).original_name == "beta");
    CHECK(r.corpus.functions.at({"app", "f1"}).signature == "void beta()");
    CHECK(r.corpus.provenance.derived_from == "renamed from test");
    CHECK(r.warnings.empty());
}

TEST_CASE("ambiguous originals are only rewritten inside their own function") {
    const auto corpus = corpus_of({{"f1", "run", "void run() { x(); }"},
                                   {"f2", "run", "void run() { y(); }"},
                                   {"f3", "go", "void go() { run(); }"}});
    const auto r = rename_all(corpus, suggestions(corpus, {{"f1", "sendSms"}, {"f2", "readFile"}}));
    CHECK(r.corpus.functions.at({"app", "f1"}).code == "void sendSms() { x(); }");
    CHECK(r.corpus.functions.at({"app", "f2"}).code == "void readFile() { y(); }");
    CHECK(r.corpus.functions.at({"app", "f3"}).code == "void go() { run(); }");
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("definitions-only scope leaves call sites alone") {
    const auto corpus = corpus_of({{"f1", "a", "void a() { b(); }"}, {"f2", "b", "void b() { a(); }"}});
    const auto r = rename_all(corpus, suggestions(corpus, {{"f1", "sendSms"}, {"f2", "readFile"}}),
                              RenameScope::DefinitionsOnly);
    CHECK(r.corpus.functions.at({"app", "f1"}).code == "void sendSms() { b(); }");
    CHECK(r.corpus.functions.at({"app", "f2"}).code == "void readFile() { a(); }");
}

TEST_CASE("zero-diff renaming reproduces the corpus byte for byte") {
    const auto corpus = corpus_of({{"f1", "a", "void a() { b(); }"}, {"f2", "b", "void b() { a(); }"}});
    const auto r = rename_all(corpus, suggestions(corpus, {}));
    CHECK(serialize_functions(r.corpus) == serialize_functions(corpus));
    CHECK(r.corpus.apks.at("app").function_ids == corpus.apks.at("app").function_ids);
}

TEST_CASE("missing rename map is a coverage error") {
    const auto corpus = corpus_of({{"f1", "a", "void a() {}"}});
    CHECK_THROWS_AS(apply_renames(corpus, {}), Error);
}

TEST_CASE("substitution is whole-word and single-pass") {
    const std::map<std::string, std::string> m{{"a", "b"}, {"b", "c"}};
    CHECK(substitute_identifiers("a b ab a_b $a a.b", m) == "b c ab a_b $a b.c");
    CHECK(substitute_identifiers("", m).empty());
}

TEST_CASE("relative improvement") {
    CHECK_THAT(*relative_improvement(0.158, 0.485), WithinAbs(206.962025, 1e-5));
    CHECK_THAT(*relative_improvement(0.5, 0.25), WithinAbs(-50.0, 1e-12));
    CHECK(!relative_improvement(0.0, 0.3).has_value());
}

TEST_CASE("property: non-identifier bytes survive and renaming inverts") {
    std::mt19937_64 rng(515);
    static const std::vector<std::string> punct{" ", "(", ")", "; ", ".", "{ ", " }", "\n", "\"x\"", " + ", "é"};
    static const std::vector<std::string> words{"int", "String", "this", "value", "get", "9"};
    for (int iter = 0; iter < 1000; ++iter) {
        std::uniform_int_distribution<std::size_t> count(1, 6);
        const auto n = count(rng);
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) {
            names.push_back(fmt::format("m{}", i));
        }
        std::vector<std::string> vocab = words;
        vocab.insert(vocab.end(), names.begin(), names.end());
        std::uniform_int_distribution<std::size_t> pick_word(0, vocab.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_punct(0, punct.size() - 1);
        std::uniform_int_distribution<std::size_t> len(1, 20);

        std::vector<Fn> fns;
        for (std::size_t i = 0; i < n; ++i) {
            std::string code = names[i];
            for (std::size_t t = len(rng); t > 0; --t) {
                code += punct[pick_punct(rng)] + vocab[pick_word(rng)];
            }
            fns.push_back({fmt::format("f{}", i), names[i], code});
        }
        const auto corpus = corpus_of(fns);

        std::map<std::string, std::string> suggested;
        std::bernoulli_distribution rename(0.7);
        for (std::size_t i = 0; i < n; ++i) {
            if (rename(rng)) {
                suggested[fmt::format("f{}", i)] = fmt::format("zq{}", (i * 7 + iter) % 11 + 100 * i);
            }
        }
        const auto r = rename_all(corpus, suggestions(corpus, suggested));

        RenameMap inverse;
        inverse.apk_id = "app";
        for (const auto& [key, f] : corpus.functions) {
            const auto& renamed = r.corpus.functions.at(key);
            const auto strip = [](const std::string& s) {
                std::string out;
                for (const char c : s) {
                    if (!is_identifier_char(c) && c != '$') {
                        out.push_back(c);
                    }
                }
                return out;
            };
            REQUIRE(strip(renamed.code) == strip(f.code));
            RenameEntry e;
            e.original = renamed.original_name;
            e.suggested = f.original_name;
            e.applied = e.original != e.suggested;
            inverse.entries.emplace(key.function_id, e);
        }
        const auto back = apply_renames(r.corpus, {inverse});
        REQUIRE(serialize_functions(back.corpus) == serialize_functions(corpus));
    }
}
