#pragma once
// Chat-completion HTTP backend. Speaks the common JSON shape:
//   request  {model, messages:[{role, content}], max_tokens, temperature, seed?, logprobs?, top_logprobs?}
//   response {choices:[{message:{content}, logprobs:{content:[{token, logprob, top_logprobs:[...]}]}}]}

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "fcg/backend.hpp"

namespace fcg {

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

struct HttpBackendConfig {
    // Full URL of the completions endpoint, e.g. https://host/v1/chat/completions.
    std::string endpoint;
    std::string model;
    std::string api_key;
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
    int top_logprobs = 20;
};

// Sums the probability of every candidate whose token equals `wanted` once
// leading whitespace is stripped. Matching is case-sensitive.
inline double first_token_mass(const nlohmann::json& first_token, const std::string& wanted) {
    auto strip = [](std::string s) {
        const auto pos = s.find_first_not_of(" \t\n\r");
        return pos == std::string::npos ? std::string() : s.substr(pos);
    };
    double mass = 0.0;
    bool chosen_listed = false;
    const std::string chosen = first_token.value("token", std::string());
    if (first_token.contains("top_logprobs") && first_token["top_logprobs"].is_array()) {
        for (const auto& cand : first_token["top_logprobs"]) {
            const std::string token = cand.value("token", std::string());
            if (token == chosen) chosen_listed = true;
            if (strip(token) == wanted) mass += std::exp(cand.at("logprob").get<double>());
        }
    }
    if (!chosen_listed && first_token.contains("logprob") && strip(chosen) == wanted) {
        mass += std::exp(first_token.at("logprob").get<double>());
    }
    return std::clamp(mass, 0.0, 1.0);
}

// Extracts the (token_a, token_b) mass from a chat-completion response body.
inline TokenProbPair parse_first_token_probs(const nlohmann::json& body, const std::string& token_a,
                                             const std::string& token_b) {
    const auto* choice = body.contains("choices") && body["choices"].is_array() && !body["choices"].empty()
                             ? &body["choices"][0]
                             : nullptr;
    if (!choice || !choice->contains("logprobs") || !(*choice)["logprobs"].is_object()) {
        throw CapabilityUnsupported("endpoint response carries no log-probabilities");
    }
    const auto& content = (*choice)["logprobs"].value("content", nlohmann::json());
    if (!content.is_array() || content.empty()) {
        throw CapabilityUnsupported("endpoint response carries no first-token log-probabilities");
    }
    return {first_token_mass(content[0], token_a), first_token_mass(content[0], token_b)};
}

inline std::string parse_completion_text(const nlohmann::json& body) {
    try {
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed completion response: ") + e.what());
    }
}

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
        const auto scheme = config_.endpoint.find("://");
        if (scheme == std::string::npos) throw ValidationError("endpoint must be an absolute URL: " + config_.endpoint);
        const auto path = config_.endpoint.find('/', scheme + 3);
        base_ = config_.endpoint.substr(0, path);
        path_ = path == std::string::npos ? "/" : config_.endpoint.substr(path);
    }

    std::string id() const override { return "http:" + config_.endpoint + "#" + config_.model; }

    std::string complete(const std::string& prompt, const GenerationParams& params) override {
        if (prompt.empty()) throw ValidationError("prompt must be non-empty");
        params.validate();
        auto request = base_request(prompt, params.max_tokens, params.temperature);
        if (params.seed) request["seed"] = *params.seed;
        return parse_completion_text(post(request));
    }

    TokenProbPair first_token_probs(const std::string& prompt, const std::string& token_a,
                                    const std::string& token_b) override {
        if (token_a == token_b) throw ValidationError("candidate tokens must differ");
        auto request = base_request(prompt, 1, 0.0);
        request["logprobs"] = true;
        request["top_logprobs"] = config_.top_logprobs;
        return parse_first_token_probs(post(request), token_a, token_b);
    }

private:
    nlohmann::ordered_json base_request(const std::string& prompt, int max_tokens, double temperature) const {
        return {{"model", config_.model},
                {"messages", nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}})},
                {"max_tokens", max_tokens},
                {"temperature", temperature}};
    }

    nlohmann::json post(const nlohmann::ordered_json& request) const {
        httplib::Headers headers;
        if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
        const std::string body = request.dump();

        auto backoff = config_.retry.initial_backoff;
        std::string last_error;
        for (int attempt = 1; attempt <= config_.retry.attempts; ++attempt) {
            httplib::Client client(base_);
            client.set_connection_timeout(config_.timeout);
            client.set_read_timeout(config_.timeout);
            auto res = client.Post(path_, headers, body, "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::parse_error& e) {
                    throw BackendError(std::string("endpoint returned invalid JSON: ") + e.what());
                }
            }
            if (res && res->status < 500) throw HttpStatusError(res->status, excerpt(res->body));
            if (res) {
                if (attempt == config_.retry.attempts) throw HttpStatusError(res->status, excerpt(res->body));
                last_error = "HTTP " + std::to_string(res->status);
            } else {
                last_error = httplib::to_string(res.error());
            }
            if (attempt < config_.retry.attempts) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        throw TransportError("request to " + config_.endpoint + " failed: " + last_error, config_.retry.attempts);
    }

    static std::string excerpt(const std::string& body) { return body.substr(0, 200); }

    HttpBackendConfig config_;
    std::string base_;
    std::string path_;
};

}  // namespace fcg
