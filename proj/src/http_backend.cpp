// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 Cama Contributors

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "cama/backend.hpp"
#include "cama/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace cama {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string path;   // request path
};

Endpoint split_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorKind::ConfigError, fmt::format("base_url '{}' lacks a scheme", base_url));
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = base_url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? std::string() : base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') {
        prefix.pop_back();
    }
    ep.path = prefix + "/v1/chat/completions";
    return ep;
}

bool retryable(int status) { return status == 429 || status >= 500; }

} // namespace

HttpBackend::HttpBackend(BackendConfig cfg) : Backend(std::move(cfg)) { split_url(config().base_url); }

std::string HttpBackend::request_body(const PromptText& prompt) const {
    ordered_json body;
    body["model"] = config().model_name;
    body["messages"] = ordered_json::array({
        ordered_json{{"role", "system"}, {"content", prompt.system}},
        ordered_json{{"role", "user"}, {"content", prompt.text}},
    });
    body["temperature"] = config().temperature;
    body["max_tokens"] = config().max_response_tokens;
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

HttpBackend::Reply HttpBackend::send(const PromptText& prompt) {
    const auto& cfg = config();
    const auto ep = split_url(cfg.base_url);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(std::chrono::seconds(std::min(cfg.timeout_seconds, 30)));
    client.set_read_timeout(std::chrono::seconds(cfg.timeout_seconds));
    client.set_write_timeout(std::chrono::seconds(cfg.timeout_seconds));

    httplib::Headers headers;
    if (const char* key = std::getenv("CAMA_API_KEY"); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto body = request_body(prompt);

    Reply reply;
    reply.attempts = 0;
    std::string last_failure;
    for (int attempt = 1; attempt <= cfg.max_retries + 1; ++attempt) {
        reply.attempts = attempt;
        count_request();
        auto res = client.Post(ep.path, headers, body, "application/json");
        if (!res) {
            last_failure = fmt::format("transport failure: {}", httplib::to_string(res.error()));
        } else if (res->status == 200) {
            reply.log.push_back(fmt::format("attempt {}: HTTP 200", attempt));
            json parsed;
            try {
                parsed = json::parse(res->body);
            } catch (const json::parse_error& e) {
                throw Error(ErrorKind::ProtocolError, fmt::format("response is not JSON: {}", e.what()));
            }
            const auto* content = [&]() -> const json* {
                if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
                    parsed["choices"].empty()) {
                    return nullptr;
                }
                const auto& choice = parsed["choices"][0];
                if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
                    return nullptr;
                }
                const auto& msg = choice["message"];
                if (!msg.contains("content") || !msg["content"].is_string()) {
                    return nullptr;
                }
                return &msg["content"];
            }();
            if (content == nullptr) {
                throw Error(ErrorKind::ProtocolError, "response lacks choices[0].message.content");
            }
            reply.content = content->get<std::string>();
            return reply;
        } else if (!retryable(res->status)) {
            reply.log.push_back(fmt::format("attempt {}: HTTP {}", attempt, res->status));
            throw Error(ErrorKind::TransportError, fmt::format("HTTP {} from {}{}", res->status, ep.origin, ep.path));
        } else {
            last_failure = fmt::format("HTTP {}", res->status);
        }
        reply.log.push_back(fmt::format("attempt {}: {}", attempt, last_failure));
        if (attempt <= cfg.max_retries) {
            const auto shift = std::min(attempt - 1, 20);
            const auto delay = std::min<long long>(static_cast<long long>(cfg.retry_base_delay_ms) << shift,
                                                   cfg.retry_max_delay_ms);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }
    throw Error(ErrorKind::TransportError,
                fmt::format("giving up after {} attempts: {}", reply.attempts, last_failure));
}

} // namespace cama
