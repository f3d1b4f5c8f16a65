#include "chronomap/llm/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>

#include "chronomap/common/hash.hpp"

namespace chronomap::llm {

namespace {

const char* finish_name(FinishReason f) {
    switch (f) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        default: return "error";
    }
}

FinishReason finish_from(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::error;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

}  // namespace

const char* to_string(GatewayError::Code code) {
    switch (code) {
        case GatewayError::Code::transport: return "transport";
        case GatewayError::Code::replay_miss: return "replay_miss";
        case GatewayError::Code::no_match: return "no_match";
        case GatewayError::Code::bad_response: return "bad_response";
        default: return "invalid_request";
    }
}

void ChatRequest::validate() const {
    if (parts.empty()) throw GatewayError(GatewayError::Code::invalid_request, "request has no user parts");
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw GatewayError(GatewayError::Code::invalid_request, "temperature outside [0, 2]");
    }
}

std::string ChatRequest::last_text() const {
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (const auto* s = std::get_if<std::string>(&*it)) return *s;
    }
    return {};
}

nlohmann::json ChatRequest::to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& p : parts) {
        if (const auto* s = std::get_if<std::string>(&p)) {
            arr.push_back({{"type", "text"}, {"text", *s}});
        } else {
            const auto& img = std::get<ImagePart>(p);
            arr.push_back({{"type", "image"}, {"media_type", img.media_type}, {"bytes", img.bytes.size()}});
        }
    }
    return {{"system", system}, {"parts", arr}, {"temperature", temperature}, {"max_tokens", max_tokens}, {"tag", tag}};
}

nlohmann::json ChatResponse::to_json() const {
    return {{"text", text}, {"finish", finish_name(finish)}, {"latency_ms", latency_ms}};
}

ChatResponse ChatResponse::from_json(const nlohmann::json& j) {
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    r.finish = finish_from(j.value("finish", "stop"));
    r.latency_ms = j.value("latency_ms", 0.0);
    return r;
}

std::string request_digest(const ChatRequest& req) {
    auto texts = nlohmann::json::array();
    for (const auto& p : req.parts) {
        if (const auto* s = std::get_if<std::string>(&p)) texts.push_back(*s);
    }
    return sha256_hex(nlohmann::json::array({req.system, texts, req.tag}).dump());
}

ScriptedChatClient::ScriptedChatClient(std::vector<Rule> rules) {
    for (auto& r : rules) {
        try {
            std::regex re(r.pattern, std::regex::ECMAScript);
            rules_.push_back({std::move(r), std::move(re)});
        } catch (const std::regex_error& e) {
            throw std::invalid_argument("bad scripted pattern '" + r.pattern + "': " + e.what());
        }
    }
}

ScriptedChatClient ScriptedChatClient::from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("scripted rules must be a JSON array");
    std::vector<Rule> rules;
    for (const auto& r : j) {
        Rule rule{r.at("pattern").get<std::string>(), r.at("response").get<std::string>(), std::nullopt};
        if (r.contains("tag") && !r["tag"].is_null()) rule.tag = r["tag"].get<std::string>();
        rules.push_back(std::move(rule));
    }
    return ScriptedChatClient(std::move(rules));
}

ScriptedChatClient ScriptedChatClient::from_file(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

ChatResponse ScriptedChatClient::complete(const ChatRequest& req) {
    req.validate();
    const std::string text = req.last_text();
    for (const auto& c : rules_) {
        if (c.rule.tag && *c.rule.tag != req.tag) continue;
        std::smatch m;
        if (!std::regex_search(text, m, c.re)) continue;
        return {m.format(c.rule.response, std::regex_constants::format_default), FinishReason::stop, 0.0};
    }
    throw GatewayError(GatewayError::Code::no_match, "no scripted rule matches tag '" + req.tag + "'");
}

ReplayChatClient::ReplayChatClient(std::map<std::string, ChatResponse> by_digest) : by_digest_(std::move(by_digest)) {}

ReplayChatClient ReplayChatClient::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transcript " + path.string());
    std::map<std::string, ChatResponse> by_digest;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto digest = j.at("digest").get<std::string>();
            if (!by_digest.emplace(digest, ChatResponse::from_json(j.at("response"))).second) {
                throw std::runtime_error("duplicate digest " + digest);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return ReplayChatClient(std::move(by_digest));
}

ChatResponse ReplayChatClient::complete(const ChatRequest& req) {
    req.validate();
    const auto digest = request_digest(req);
    const auto it = by_digest_.find(digest);
    if (it == by_digest_.end()) {
        throw GatewayError(GatewayError::Code::replay_miss, "no recorded response for digest " + digest);
    }
    return it->second;
}

RecordingChatClient::RecordingChatClient(ChatClient& inner, const std::filesystem::path& transcript)
    : inner_(inner), path_(transcript), out_(transcript, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write transcript " + transcript.string());
}

ChatResponse RecordingChatClient::complete(const ChatRequest& req) {
    const auto digest = request_digest(req);
    {
        std::lock_guard lock(mu_);
        if (const auto it = seen_.find(digest); it != seen_.end()) return it->second;
    }
    // Errors are not recorded; replaying them would hide the failure mode.
    ChatResponse resp = inner_.complete(req);
    std::lock_guard lock(mu_);
    if (const auto it = seen_.find(digest); it != seen_.end()) return it->second;
    seen_.emplace(digest, resp);
    out_ << nlohmann::json{{"digest", digest}, {"request", req.to_json()}, {"response", resp.to_json()}}.dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("write to transcript " + path_.string() + " failed");
    return resp;
}

bool well_formed_url(const std::string& url) {
    static const std::regex re(R"(^https?://[A-Za-z0-9.\-]+(:\d+)?(/\S*)?$)");
    return std::regex_match(url, re);
}

FixtureSearchClient FixtureSearchClient::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("search fixture must be a JSON object");
    FixtureSearchClient c;
    for (const auto& [key, list] : j.items()) {
        std::vector<SearchResult> results;
        for (const auto& r : list) {
            SearchResult sr{r.at("title").get<std::string>(), r.at("url").get<std::string>(),
                            r.value("snippet", std::string())};
            if (!well_formed_url(sr.url)) throw std::invalid_argument("malformed url in search fixture: " + sr.url);
            results.push_back(std::move(sr));
        }
        c.by_key_.emplace(lower(key), std::move(results));
    }
    return c;
}

FixtureSearchClient FixtureSearchClient::from_file(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

std::vector<SearchResult> FixtureSearchClient::search(const std::string& query, int k) {
    if (k < 1) throw std::invalid_argument("search k must be >= 1");
    const std::string q = lower(query);
    for (const auto& [key, results] : by_key_) {
        if (q.find(key) == std::string::npos) continue;
        const auto n = std::min(results.size(), static_cast<std::size_t>(k));
        return {results.begin(), results.begin() + static_cast<std::ptrdiff_t>(n)};
    }
    return {};
}

}  // namespace chronomap::llm
