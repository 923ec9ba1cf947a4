#pragma once

// Chat-completions adapter (OpenAI wire format) with per-token logprobs.
// Requires cpp-httplib; define CPPHTTPLIB_OPENSSL_SUPPORT for https.

#include "lppgate/gateway.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <string>

namespace lppgate {

struct OpenAIConfig {
    std::string base_url = "https://api.openai.com";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "LPP_API_KEY";
    int timeout_seconds = 120;
};

inline nlohmann::json chat_request_body(const OpenAIConfig& cfg, const ChatRequest& req) {
    nlohmann::json body;
    body["model"] = cfg.model;
    body["messages"] = nlohmann::json::array({
        {{"role", "system"}, {"content", req.prompt.system}},
        {{"role", "user"}, {"content", req.prompt.user}},
    });
    body["temperature"] = req.decoding.temperature;
    body["top_p"] = req.decoding.top_p;
    body["n"] = req.decoding.n;
    body["max_tokens"] = req.decoding.max_output_tokens;
    body["logprobs"] = req.decoding.top_logprobs > 0;
    if (req.decoding.top_logprobs > 0) body["top_logprobs"] = req.decoding.top_logprobs;
    return body;
}

inline ProviderResponse parse_chat_response(const nlohmann::json& j) {
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty()) throw Error(ErrorCode::Transport, "response has no choices");
    const auto& c0 = choices.at(0);
    ProviderResponse r;
    const auto& content = c0.at("message").at("content");
    r.text = content.is_string() ? content.get<std::string>() : std::string();
    auto lp = c0.find("logprobs");
    if (lp == c0.end() || lp->is_null() || !lp->contains("content") || lp->at("content").is_null()) {
        r.logprobs_available = false;
        return r;
    }
    for (const auto& t : lp->at("content")) {
        RawToken rt{t.at("token").get<std::string>(), t.at("logprob").get<double>(), {}};
        if (auto top = t.find("top_logprobs"); top != t.end() && top->is_array())
            for (const auto& c : *top) rt.top.push_back({c.at("token").get<std::string>(), c.at("logprob").get<double>()});
        r.tokens.push_back(std::move(rt));
    }
    return r;
}

class OpenAIProvider : public Provider {
public:
    explicit OpenAIProvider(OpenAIConfig cfg) : cfg_(std::move(cfg)) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key || !*key) throw Error(ErrorCode::AuthFailure, "environment variable " + cfg_.api_key_env + " is not set");
        key_ = key;
    }

    std::string name() const override { return "openai:" + cfg_.model; }

    ProviderResponse complete(const ChatRequest& req) override {
        httplib::Client cli(cfg_.base_url);
        cli.set_connection_timeout(cfg_.timeout_seconds, 0);
        cli.set_read_timeout(cfg_.timeout_seconds, 0);
        cli.set_bearer_token_auth(key_);
        const auto body = chat_request_body(cfg_, req).dump();
        auto res = cli.Post(cfg_.path, body, "application/json");
        if (!res) throw Error(ErrorCode::Transport, "request failed: " + httplib::to_string(res.error()));
        if (res->status == 401 || res->status == 403)
            throw Error(ErrorCode::AuthFailure, "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500)
            throw Error(ErrorCode::Transport, "HTTP " + std::to_string(res->status));
        if (res->status != 200) {
            if (res->body.find("logprobs") != std::string::npos)
                throw Error(ErrorCode::ProviderNoLogprobs, "provider cannot return logprobs: " + res->body);
            throw Error(ErrorCode::InvalidArgument, "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        try {
            return parse_chat_response(nlohmann::json::parse(res->body));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Transport, std::string("unreadable provider response: ") + e.what());
        }
    }

private:
    OpenAIConfig cfg_;
    std::string key_;
};

}  // namespace lppgate
