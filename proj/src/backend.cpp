// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#include "cama/backend.hpp"

#include "cama/error.hpp"
#include "cama/hash.hpp"
#include "cama/text.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <exception>
#include <map>
#include <regex>
#include <set>
#include <thread>

namespace cama {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void BackendConfig::validate() const {
    if (backend_id.empty()) {
        throw Error(ErrorKind::ConfigError, "backend_id must be set");
    }
    if (kind == BackendKind::Http && base_url.empty()) {
        throw Error(ErrorKind::ConfigError, fmt::format("backend '{}': base_url required for http", backend_id));
    }
    if (context_tokens == 0 || max_response_tokens == 0 || context_tokens <= max_response_tokens) {
        throw Error(ErrorKind::ConfigError,
                    fmt::format("backend '{}': context_tokens ({}) must exceed max_response_tokens ({})", backend_id,
                                context_tokens, max_response_tokens));
    }
    if (temperature < 0.0) {
        throw Error(ErrorKind::ConfigError, fmt::format("backend '{}': temperature must be >= 0", backend_id));
    }
    if (parallelism == 0) {
        throw Error(ErrorKind::ConfigError, fmt::format("backend '{}': parallelism must be positive", backend_id));
    }
    if (max_retries < 0) {
        throw Error(ErrorKind::ConfigError, fmt::format("backend '{}': max_retries must be >= 0", backend_id));
    }
}

std::string prompt_hash(const BackendConfig& cfg, const PromptText& prompt) {
    ordered_json key;
    key["backend_id"] = cfg.backend_id;
    key["model_name"] = cfg.model_name;
    key["temperature"] = cfg.temperature;
    if (cfg.kind == BackendKind::Mock) {
        key["seed"] = cfg.seed;
    }
    key["prompt"] = prompt.text;
    return sha256_hex(key.dump(-1, ' ', false, json::error_handler_t::replace));
}

// ---------------------------------------------------------------------------

Backend::Backend(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

CompletionRecord Backend::complete(const PromptText& prompt) {
    if (prompt.token_estimate + cfg_.max_response_tokens > cfg_.context_tokens) {
        throw Error(ErrorKind::BudgetExceeded,
                    fmt::format("prompt needs {} tokens + {} response tokens, context is {}", prompt.token_estimate,
                                cfg_.max_response_tokens, cfg_.context_tokens));
    }
    const auto now = in_flight_.fetch_add(1) + 1;
    auto seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    struct Leave {
        std::atomic<std::size_t>& counter;
        ~Leave() { counter.fetch_sub(1); }
    } leave{in_flight_};

    const auto start = std::chrono::steady_clock::now();
    auto reply = send(prompt);
    CompletionRecord rec;
    rec.prompt_hash = prompt_hash(cfg_, prompt);
    rec.response = std::move(reply.content);
    rec.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    rec.attempts = reply.attempts;
    rec.log = std::move(reply.log);
    return rec;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    switch (cfg.kind) {
    case BackendKind::Mock: return std::make_unique<MockBackend>(cfg);
    case BackendKind::Http: return std::make_unique<HttpBackend>(cfg);
    }
    throw Error(ErrorKind::ConfigError, "unknown backend kind");
}

CompletionRecord complete(const BackendConfig& cfg, const PromptText& prompt) {
    return make_backend(cfg)->complete(prompt);
}

// ---------------------------------------------------------------------------
// Mock

namespace {

const std::set<std::string>& ignored_words() {
    static const std::set<std::string> words = {
        "abstract", "boolean", "break",   "byte",      "case",     "catch",      "char",       "class",
        "const",    "continue", "default", "double",   "else",     "enum",       "extends",    "false",
        "final",    "finally", "float",   "for",       "if",       "implements", "import",     "instanceof",
        "int",      "interface", "long",  "native",    "new",      "null",       "package",    "private",
        "protected", "public", "return",  "short",     "static",   "super",      "switch",     "synchronized",
        "this",     "throw",   "throws",  "transient", "true",     "try",        "void",       "volatile",
        "while",    "String",  "Object",  "MAL",       "var",      "get",        "set",
    };
    return words;
}

/// Identifiers of length >= 3, ranked by frequency then lexicographically.
std::vector<std::string> salient_identifiers(std::string_view code, std::size_t limit) {
    static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*)");
    std::map<std::string, std::size_t> counts;
    const std::string text(code);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), ident); it != std::sregex_iterator(); ++it) {
        auto word = it->str();
        if (word.size() >= 3 && !ignored_words().contains(word)) {
            ++counts[word];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) {
        out.push_back(ranked[i].first);
    }
    return out;
}

/// Identifiers in order of appearance, skipping the mock's own template words.
std::vector<std::string> summary_identifiers(std::string_view summary, std::size_t limit) {
    static const std::set<std::string> filler = {"Handles", "Operates", "Works", "with", "Manipulates", "and",
                                                 "looks", "benign", "risky", "suspicious", "highly", "malicious",
                                                 "its", "inputs", "the", "The"};
    static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*)");
    std::vector<std::string> out;
    const std::string text(summary);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), ident);
         it != std::sregex_iterator() && out.size() < limit; ++it) {
        auto word = it->str();
        if (word.size() >= 3 && !filler.contains(word) && !ignored_words().contains(word)) {
            out.push_back(std::move(word));
        }
    }
    return out;
}

std::string camel_case(std::string_view word) {
    std::string out;
    bool upper_next = false;
    for (const char c : word) {
        if (c == '_' || c == '$') {
            upper_next = !out.empty();
            continue;
        }
        if (out.empty()) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (upper_next) {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        } else {
            out.push_back(c);
        }
        upper_next = false;
    }
    return out.empty() ? std::string("unnamedFunction") : out;
}

std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
    const auto b = text.find(open);
    if (b == std::string_view::npos) {
        return text;
    }
    const auto start = b + open.size();
    const auto e = close.empty() ? std::string_view::npos : text.find(close, start);
    return text.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start);
}

std::optional<int> planted_score(std::string_view code) {
    static const std::regex marker(R"(//\s*MAL:\s*(\d+))");
    const std::string text(code);
    std::smatch m;
    if (std::regex_search(text, m, marker)) {
        return std::min(10, std::stoi(m.str(1)));
    }
    return std::nullopt;
}

struct Band {
    std::string_view phrase;
    int low;
    int high;
};

constexpr std::array<Band, 4> kBands = {{
    {"looks benign", 0, 0},
    {"looks risky", 1, 3},
    {"looks suspicious", 4, 6},
    {"looks highly malicious", 7, 10},
}};

const Band& band_for(int score) {
    for (const auto& b : kBands) {
        if (score >= b.low && score <= b.high) {
            return b;
        }
    }
    return kBands.back();
}

std::string list_words(const std::vector<std::string>& words) {
    if (words.empty()) {
        return "its inputs";
    }
    if (words.size() == 1) {
        return words.front();
    }
    std::vector<std::string> head(words.begin(), words.end() - 1);
    return join(head, ", ") + " and " + words.back();
}

constexpr std::array<std::string_view, 4> kVerbs = {"Handles", "Operates on", "Works with", "Manipulates"};

} // namespace

MockBackend::MockBackend(BackendConfig cfg) : Backend(std::move(cfg)) {}

std::string MockBackend::respond(const PromptText& prompt) const {
    const auto seed = std::to_string(config().seed);
    switch (prompt.kind) {
    case PromptKind::FunctionSummarization: {
        const auto code = between(prompt.text, "[FUNC]\n", "\n[/FUNC]");
        const auto h = stable_hash64(seed + "|code|" + std::string(code));
        const int score = planted_score(code).value_or(static_cast<int>(h % 11));
        const auto words = salient_identifiers(code, 3);
        const auto verb = kVerbs[(h >> 8) % kVerbs.size()];
        const auto name = camel_case(words.empty() ? std::string_view{} : std::string_view(words.front()));
        return fmt::format("1. Function Summary: {} {} and {}.\n2. Suggested Function Name: {}\n"
                           "3. Malicious Score(0-10): {}",
                           verb, list_words(words), band_for(score).phrase, name, score);
    }
    case PromptKind::DescriptorScore: {
        const auto descriptor = between(prompt.text, "descriptor: ", "\nOutput:");
        const auto h = stable_hash64(seed + "|descriptor|" + std::string(descriptor));
        const Band* band = nullptr;
        // longest phrase first: "looks highly malicious" before shorter ones
        for (auto it = kBands.rbegin(); it != kBands.rend(); ++it) {
            if (descriptor.find(it->phrase) != std::string_view::npos) {
                band = &*it;
                break;
            }
        }
        int score = static_cast<int>(h % 11);
        if (band != nullptr) {
            const int width = band->high - band->low + 1;
            score = band->low + static_cast<int>(h % static_cast<std::uint64_t>(width));
        }
        return fmt::format("Malicious Score: {}", score);
    }
    case PromptKind::NameRegen: {
        const auto summary = between(prompt.text, "summary: ", "\nOutput:");
        const auto h = stable_hash64(seed + "|summary|" + std::string(summary));
        const auto words = summary_identifiers(summary, 2);
        std::string name = camel_case(words.empty() ? std::string_view{} : std::string_view(words.front()));
        if (words.size() > 1 && h % 3 == 0) {
            auto tail = camel_case(words[1]);
            tail[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tail[0])));
            name += tail;
        }
        return fmt::format("Function Name: {}", name);
    }
    case PromptKind::AppPurpose: {
        static const std::regex name_line(R"(Refined Function Name: ([A-Za-z0-9_]+))");
        std::vector<std::string> names;
        for (auto it = std::sregex_iterator(prompt.text.begin(), prompt.text.end(), name_line);
             it != std::sregex_iterator() && names.size() < 3; ++it) {
            names.push_back((*it)[1].str());
        }
        const auto h = stable_hash64(seed + "|app|" + prompt.text);
        const auto verb = kVerbs[h % kVerbs.size()];
        auto lowered = std::string(verb);
        lowered[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(lowered[0])));
        return fmt::format("This application appears to be an app that {} sensitive data through {}.", lowered,
                           list_words(names));
    }
    }
    return {};
}

MockBackend::Reply MockBackend::send(const PromptText& prompt) {
    count_request();
    if (config().simulated_latency_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(config().simulated_latency_ms));
    }
    return Reply{respond(prompt), 1, {}};
}

// ---------------------------------------------------------------------------
// Cache

CompletionCache::CompletionCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path CompletionCache::entry_path(const std::string& hash) const { return dir_ / (hash + ".json"); }

namespace {

std::string integrity_of(const std::string& hash, const std::string& response) {
    return sha256_hex(hash + '\n' + response);
}

} // namespace

CompletionCache::Lookup CompletionCache::lookup(const std::string& hash) const {
    const auto path = entry_path(hash);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        return {};
    }
    try {
        const auto entry = json::parse(read_file(path));
        const auto response = entry.at("response").get<std::string>();
        if (entry.at("prompt_hash").get<std::string>() != hash ||
            entry.at("integrity").get<std::string>() != integrity_of(hash, response)) {
            return {Status::Corrupt, {}};
        }
        return {Status::Hit, response};
    } catch (const std::exception&) {
        return {Status::Corrupt, {}};
    }
}

void CompletionCache::store(const std::string& hash, const BackendConfig& cfg, const PromptText& prompt,
                            const std::string& response) const {
    ordered_json entry;
    entry["prompt_hash"] = hash;
    entry["request"] = {
        {"backend_id", cfg.backend_id},
        {"model_name", cfg.model_name},
        {"temperature", cfg.temperature},
        {"kind", std::string(to_string(prompt.kind))},
        {"prompt_sha256", sha256_hex(prompt.text)},
    };
    entry["response"] = response;
    entry["integrity"] = integrity_of(hash, response);
    write_file_atomic(entry_path(hash), entry.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

void CompletionCache::discard(const std::string& hash) const {
    std::error_code ec;
    std::filesystem::remove(entry_path(hash), ec);
}

CompletionRecord complete_cached(Backend& backend, const PromptText& prompt, const std::filesystem::path& cache_dir) {
    const CompletionCache cache(cache_dir);
    const auto hash = prompt_hash(backend.config(), prompt);
    const auto found = cache.lookup(hash);
    if (found.status == CompletionCache::Status::Hit) {
        CompletionRecord rec;
        rec.prompt_hash = hash;
        rec.response = found.response;
        rec.from_cache = true;
        return rec;
    }
    bool repaired = false;
    if (found.status == CompletionCache::Status::Corrupt) {
        cache.discard(hash);
        repaired = true;
    }
    auto rec = backend.complete(prompt);
    cache.store(hash, backend.config(), prompt, rec.response);
    rec.cache_repaired = repaired;
    if (repaired) {
        rec.log.push_back(fmt::format("{}: corrupt cache entry {} discarded and refetched",
                                      to_string(ErrorKind::CacheCorrupt), hash));
    }
    return rec;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    const auto workers = std::clamp<std::size_t>(parallelism, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const auto i = next.fetch_add(1);
                    if (i >= n) {
                        return;
                    }
                    try {
                        fn(i);
                    } catch (...) {
                        const std::lock_guard lock(error_mutex);
                        if (!first_error) {
                            first_error = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace cama
