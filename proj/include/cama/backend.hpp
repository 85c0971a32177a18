// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#pragma once

#include "cama/prompt.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cama {

enum class BackendKind { Http, Mock };

struct BackendConfig {
    std::string backend_id;
    BackendKind kind = BackendKind::Mock;
    std::string base_url; // http only
    std::string model_name;
    std::size_t context_tokens = 4096;
    double temperature = 0.0;
    std::size_t max_response_tokens = 512;
    int max_retries = 3;
    std::size_t parallelism = 1;
    std::uint64_t seed = 0; // mock only

    // Transport tuning.
    int retry_base_delay_ms = 500;
    int retry_max_delay_ms = 8000;
    int timeout_seconds = 120;
    // Mock only: artificial per-call latency, used to observe fan-out.
    int simulated_latency_ms = 0;

    /// Throws Error{ConfigError} when invariants do not hold.
    void validate() const;
    /// Tokens available to a prompt after reserving the response.
    [[nodiscard]] std::size_t prompt_budget() const { return context_tokens - max_response_tokens; }
};

struct CompletionRecord {
    std::string prompt_hash;
    std::string response;
    std::int64_t latency_ms = 0;
    bool from_cache = false;
    int attempts = 0;
    /// Set when a corrupt cache entry was discarded before refetching.
    bool cache_repaired = false;
    std::vector<std::string> log;
};

/// Content address over (backend_id, model_name, temperature, prompt text);
/// mock configs also fold in the seed since it changes the response.
std::string prompt_hash(const BackendConfig& cfg, const PromptText& prompt);

class Backend {
  public:
    explicit Backend(BackendConfig cfg);
    virtual ~Backend() = default;
    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    /// Thread-safe. Throws Error{BudgetExceeded, TransportError, ProtocolError}.
    CompletionRecord complete(const PromptText& prompt);

    [[nodiscard]] const BackendConfig& config() const noexcept { return cfg_; }
    /// Requests that reached the model (mock invocations or HTTP attempts).
    [[nodiscard]] std::size_t requests() const noexcept { return requests_.load(); }
    [[nodiscard]] std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }

  protected:
    struct Reply {
        std::string content;
        int attempts = 1;
        std::vector<std::string> log;
    };
    virtual Reply send(const PromptText& prompt) = 0;
    void count_request() noexcept { requests_.fetch_add(1); }

  private:
    BackendConfig cfg_;
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_in_flight_{0};
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

/// Deterministic stand-in for a model. Scores come from a planted
/// "//MAL:<n>" marker in the code when present, else from a seeded hash of
/// the code region modulo 11.
class MockBackend final : public Backend {
  public:
    explicit MockBackend(BackendConfig cfg);

    /// The response text without any bookkeeping; pure in (seed, prompt).
    [[nodiscard]] std::string respond(const PromptText& prompt) const;

  protected:
    Reply send(const PromptText& prompt) override;
};

/// Chat-completion client: POST {base_url}/v1/chat/completions with bearer
/// auth from CAMA_API_KEY. Retries 429/5xx and transport failures with
/// exponential backoff.
class HttpBackend final : public Backend {
  public:
    explicit HttpBackend(BackendConfig cfg);

    /// Builds the request body; exposed for tests.
    [[nodiscard]] std::string request_body(const PromptText& prompt) const;

  protected:
    Reply send(const PromptText& prompt) override;
};

/// One-shot helper matching the plain completion contract.
CompletionRecord complete(const BackendConfig& cfg, const PromptText& prompt);

/// Content-addressed response cache: one JSON file per prompt hash.
/// Readers are lock-free; writers create a temporary file and rename it.
class CompletionCache {
  public:
    explicit CompletionCache(std::filesystem::path dir);

    enum class Status { Hit, Miss, Corrupt };
    struct Lookup {
        Status status = Status::Miss;
        std::string response;
    };

    [[nodiscard]] Lookup lookup(const std::string& hash) const;
    void store(const std::string& hash, const BackendConfig& cfg, const PromptText& prompt,
               const std::string& response) const;
    void discard(const std::string& hash) const;
    [[nodiscard]] std::filesystem::path entry_path(const std::string& hash) const;

  private:
    std::filesystem::path dir_;
};

/// Cache hit: stored response, from_cache=true, no request. Miss: delegates
/// to the backend and persists the response. Corrupt entries are replaced.
CompletionRecord complete_cached(Backend& backend, const PromptText& prompt, const std::filesystem::path& cache_dir);

/// Runs fn(i) for i in [0, n) on up to `parallelism` workers and joins.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

} // namespace cama
