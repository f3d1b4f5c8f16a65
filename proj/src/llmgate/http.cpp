#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>

#include "chronomap/common/hash.hpp"
#include "chronomap/llm/gateway.hpp"

namespace chronomap::llm {

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

HttpChatClient::Options HttpChatClient::Options::from_env() {
    Options o;
    o.base_url = env_or("LLM_BASE_URL", "https://api.openai.com/v1");
    o.model = env_or("LLM_MODEL", "gpt-4o");
    o.api_key = env_or("LLM_API_KEY", "");
    return o;
}

HttpChatClient::HttpChatClient(Options options)
    : options_(std::move(options)), slots_(std::clamp(options_.max_in_flight, 1, 256)) {
    if (!well_formed_url(options_.base_url)) throw std::invalid_argument("bad LLM base url: " + options_.base_url);
}

nlohmann::json HttpChatClient::payload(const ChatRequest& req) const {
    auto content = nlohmann::json::array();
    for (const auto& p : req.parts) {
        if (const auto* s = std::get_if<std::string>(&p)) {
            content.push_back({{"type", "text"}, {"text", *s}});
        } else {
            const auto& img = std::get<ImagePart>(p);
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", "data:" + img.media_type + ";base64," + base64_encode(img.bytes)}}}});
        }
    }
    auto messages = nlohmann::json::array();
    if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
    messages.push_back({{"role", "user"}, {"content", content}});
    return {{"model", options_.model},
            {"messages", messages},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

ChatResponse HttpChatClient::complete(const ChatRequest& req) {
    req.validate();
    const auto [origin, prefix] = split_url(options_.base_url);
    const std::string body = payload(req).dump();

    slots_.acquire();
    const auto start = std::chrono::steady_clock::now();
    httplib::Result res = [&] {
        httplib::Client client(origin);
        client.set_connection_timeout(options_.timeout_s);
        client.set_read_timeout(options_.timeout_s);
        httplib::Headers headers;
        if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
        return client.Post(prefix + "/chat/completions", headers, body, "application/json");
    }();
    slots_.release();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (!res) throw GatewayError(GatewayError::Code::transport, "chat endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw GatewayError(GatewayError::Code::transport, "chat endpoint answered HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw GatewayError(GatewayError::Code::bad_response, "chat endpoint answered HTTP " + std::to_string(res->status));
    }
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        ChatResponse out;
        const auto& content = choice.at("message").at("content");
        out.text = content.is_null() ? std::string() : content.get<std::string>();
        const std::string finish = choice.value("finish_reason", std::string("stop"));
        out.finish = finish == "stop" ? FinishReason::stop : finish == "length" ? FinishReason::length : FinishReason::error;
        out.latency_ms = ms;
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(GatewayError::Code::bad_response, std::string("malformed chat reply: ") + e.what());
    }
}

HttpSearchClient::HttpSearchClient(std::string base_url, std::string api_key, int timeout_s)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

std::vector<SearchResult> HttpSearchClient::search(const std::string& query, int k) {
    if (k < 1) throw std::invalid_argument("search k must be >= 1");
    const auto [origin, prefix] = split_url(base_url_);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_s_);
    client.set_read_timeout(timeout_s_);
    const nlohmann::json body{{"api_key", api_key_}, {"query", query}, {"max_results", k}};
    const auto res = client.Post(prefix + "/search", body.dump(), "application/json");
    if (!res) {
        spdlog::warn("search unreachable: {}", httplib::to_string(res.error()));
        return {};
    }
    if (res->status != 200) {
        spdlog::warn("search answered HTTP {}", res->status);
        return {};
    }
    std::vector<SearchResult> out;
    try {
        const auto doc = nlohmann::json::parse(res->body);
        for (const auto& r : doc.at("results")) {
            SearchResult sr{r.value("title", std::string()), r.value("url", std::string()),
                            r.value("content", r.value("snippet", std::string()))};
            if (!well_formed_url(sr.url)) continue;
            out.push_back(std::move(sr));
            if (static_cast<int>(out.size()) == k) break;
        }
    } catch (const nlohmann::json::exception& e) {
        spdlog::warn("malformed search reply: {}", e.what());
        return {};
    }
    return out;
}

}  // namespace chronomap::llm
