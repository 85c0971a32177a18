// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "fixture.hpp"

#include "cama/text.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <array>
#include <random>
#include <set>

namespace cama::fixture {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Category {
    const char* name;
    const char* token;  // appears only in this category's planted functions
    const char* helper; // second planted identifier
    const char* reference;
};

constexpr std::array<Category, 4> kCategories = {{
    {"Adware", "adPushBeacon", "bannerInjector",
     "This application appears to be an adware app that injects banner ads and beacons device data to ad servers."},
    {"Backdoor", "remoteShellChannel", "commandListener",
     "This application appears to be a backdoor that listens for remote commands and opens a shell channel."},
    {"Riskware", "premiumSmsSender", "billingHook",
     "This application appears to be riskware that sends premium SMS messages and hooks billing flows."},
    {"Trojan", "credentialHarvester", "overlayPhisher",
     "This application appears to be a trojan that harvests credentials through phishing overlays."},
}};

constexpr std::array<const char*, 12> kShared = {
    "layoutInflater", "viewHolder",    "stringBuilder", "sharedPrefs", "logTag",       "httpClient",
    "jsonParser",     "cursorAdapter", "eventBus",      "threadPool",  "bitmapLoader", "dateFormatter"};

std::string obfuscated_name(std::size_t i) {
    std::string s;
    do {
        s.insert(s.begin(), static_cast<char>('a' + i % 26));
        i /= 26;
    } while (i-- > 0);
    return s;
}

std::string planted_code(const std::string& name, const Category& c, const std::string& callee, int score) {
    return fmt::format("public void {0}(Context c) {{ //MAL:{1}\n"
                       "    {2}.init(c);\n"
                       "    {2}.collect(getDeviceId(c));\n"
                       "    {2}.upload({3});\n"
                       "    {2}.flush();\n"
                       "    {4}(c);\n"
                       "}}",
                       name, score, c.token, c.helper, callee);
}

std::string benign_code(const std::string& name, const std::string& a, const std::string& b, const std::string& callee,
                        int score) {
    return fmt::format("public void {0}(Context c) {{ //MAL:{1}\n"
                       "    {2}.prepare(c);\n"
                       "    {2}.apply({3});\n"
                       "    {3}.close();\n"
                       "    {4}(c);\n"
                       "}}",
                       name, score, a, b, callee);
}

} // namespace

Texts planted_corpus(const Options& options) {
    std::mt19937_64 rng(options.seed);
    ordered_json manifest = ordered_json::array();
    std::string functions;
    const auto n = options.functions_per_apk;

    for (std::size_t ci = 0; ci < kCategories.size(); ++ci) {
        const auto& cat = kCategories[ci];
        for (std::size_t a = 0; a < options.apks_per_category; ++a) {
            const auto apk_id = fmt::format("{}{:02d}", cat.name, a);
            ordered_json entry;
            entry["apk_id"] = apk_id;
            entry["category"] = cat.name;
            entry["family"] = fmt::format("{}-fam{}", cat.name, a % 2);
            entry["size_bytes"] = 100000 + 1000 * ci + 37 * a;
            entry["method_count"] = n;
            entry["reference_description"] = cat.reference;
            manifest.push_back(std::move(entry));

            std::set<std::size_t> planted;
            while (planted.size() < std::min<std::size_t>(2, n)) {
                planted.insert(static_cast<std::size_t>(rng() % n));
            }
            for (std::size_t f = 0; f < n; ++f) {
                const auto name = obfuscated_name(f);
                const auto callee = obfuscated_name((f + 1) % n);
                std::string code;
                if (planted.contains(f)) {
                    code = planted_code(name, cat, callee, 9);
                } else {
                    const auto xi = rng() % kShared.size();
                    const auto yi = (xi + 1 + rng() % (kShared.size() - 1)) % kShared.size();
                    code = benign_code(name, kShared[xi], kShared[yi], callee, static_cast<int>(rng() % 6));
                }
                ordered_json fn;
                fn["function_id"] = fmt::format("f{:03d}", f);
                fn["apk_id"] = apk_id;
                fn["class_name"] = fmt::format("com.example.{}.C{}", to_lower_ascii(apk_id), f % 3);
                fn["method_name"] = name;
                fn["signature"] = fmt::format("void {}(android.content.Context)", name);
                fn["code"] = code;
                functions += fn.dump() + "\n";
            }
        }
    }
    return {manifest.dump(2) + "\n", functions};
}

void write_workspace(const std::filesystem::path& dir, const Options& options, const std::string& extra_config) {
    const auto texts = planted_corpus(options);
    write_file_atomic(dir / "manifest.json", texts.manifest);
    write_file_atomic(dir / "functions.jsonl", texts.functions);
    const auto config = fmt::format(R"({{
  "corpus": {{"manifest": "manifest.json", "functions": "functions.jsonl"}},
  "backends": [
    {{"id": "mock-a", "kind": "mock", "seed": 11, "parallelism": 2}},
    {{"id": "mock-b", "kind": "mock", "seed": 23}}
  ],
  "annotator": "mock-a",
  "cache_dir": "cache",
  "output_dir": "out",
  "k": [2, 5, 8],
  "seed": 5{}
}}
)",
                                    extra_config.empty() ? "" : ",\n  " + extra_config);
    write_file_atomic(dir / "config.json", config);
}

} // namespace cama::fixture
