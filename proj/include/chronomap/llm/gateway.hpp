#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace chronomap::llm {

struct ImagePart {
    std::string media_type;
    std::string bytes;
};

using UserPart = std::variant<std::string, ImagePart>;

struct ChatRequest {
    std::string system;
    std::vector<UserPart> parts;
    double temperature{0.0};
    int max_tokens{2048};
    /// Pipeline stage label, e.g. "generate" or "compose".
    std::string tag;

    /// Throws GatewayError(invalid_request) on an empty part list or a
    /// temperature outside [0, 2].
    void validate() const;
    /// Last text part, or "" when there is none.
    [[nodiscard]] std::string last_text() const;
    /// Image parts are reduced to media type and size.
    [[nodiscard]] nlohmann::json to_json() const;
};

enum class FinishReason : std::uint8_t { stop, length, error };

struct ChatResponse {
    std::string text;
    FinishReason finish{FinishReason::stop};
    double latency_ms{0.0};

    [[nodiscard]] nlohmann::json to_json() const;
    static ChatResponse from_json(const nlohmann::json& j);
};

/// SHA-256 over the JSON array [system, [texts...], tag]. Images are not
/// part of the digest.
std::string request_digest(const ChatRequest& req);

class GatewayError : public std::runtime_error {
public:
    enum class Code : std::uint8_t { transport, replay_miss, no_match, bad_response, invalid_request };

    GatewayError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
    [[nodiscard]] Code code() const noexcept { return code_; }
    [[nodiscard]] bool retryable() const noexcept { return code_ == Code::transport; }

private:
    Code code_;
};

const char* to_string(GatewayError::Code code);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

/// OpenAI-compatible chat completions over HTTP(S).
class HttpChatClient final : public ChatClient {
public:
    struct Options {
        std::string base_url;
        std::string model;
        std::string api_key;
        int max_in_flight{4};
        int timeout_s{120};

        /// LLM_BASE_URL, LLM_MODEL, LLM_API_KEY.
        static Options from_env();
    };

    explicit HttpChatClient(Options options);
    ChatResponse complete(const ChatRequest& req) override;

    /// The chat-completions body sent for a request.
    [[nodiscard]] nlohmann::json payload(const ChatRequest& req) const;

private:
    Options options_;
    std::counting_semaphore<256> slots_;
};

/// First rule whose tag (when given) equals the request tag and whose
/// pattern matches the last text part wins. "$1".."$9" in the response are
/// replaced by capture groups.
class ScriptedChatClient final : public ChatClient {
public:
    struct Rule {
        std::string pattern;
        std::string response;
        std::optional<std::string> tag;
    };

    explicit ScriptedChatClient(std::vector<Rule> rules);
    /// JSON array of {pattern, response, tag?}.
    static ScriptedChatClient from_json(const nlohmann::json& j);
    static ScriptedChatClient from_file(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& req) override;

private:
    struct Compiled {
        Rule rule;
        std::regex re;
    };
    std::vector<Compiled> rules_;
};

/// Serves responses from a JSON-lines transcript of {digest, request, response}.
class ReplayChatClient final : public ChatClient {
public:
    static ReplayChatClient from_file(const std::filesystem::path& path);
    explicit ReplayChatClient(std::map<std::string, ChatResponse> by_digest);

    ChatResponse complete(const ChatRequest& req) override;
    [[nodiscard]] std::size_t size() const noexcept { return by_digest_.size(); }

private:
    std::map<std::string, ChatResponse> by_digest_;
};

/// Forwards to an inner client and appends each new exchange to a
/// transcript. Repeated requests reuse the recorded response.
class RecordingChatClient final : public ChatClient {
public:
    /// Truncates the transcript; throws std::runtime_error when it cannot be
    /// opened.
    RecordingChatClient(ChatClient& inner, const std::filesystem::path& transcript);

    ChatResponse complete(const ChatRequest& req) override;

private:
    ChatClient& inner_;
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mu_;
    std::map<std::string, ChatResponse> seen_;
};

struct SearchResult {
    std::string title;
    std::string url;
    std::string snippet;
};

class SearchClient {
public:
    virtual ~SearchClient() = default;
    /// At most k results; k must be >= 1.
    virtual std::vector<SearchResult> search(const std::string& query, int k) = 0;
};

/// JSON object mapping a key to a result list. The first key (in sorted
/// order) found case-insensitively inside the query selects the list.
class FixtureSearchClient final : public SearchClient {
public:
    static FixtureSearchClient from_json(const nlohmann::json& j);
    static FixtureSearchClient from_file(const std::filesystem::path& path);

    std::vector<SearchResult> search(const std::string& query, int k) override;

private:
    std::map<std::string, std::vector<SearchResult>> by_key_;
};

/// Tavily-style POST {base}/search. Transport and format failures degrade
/// to an empty list with a logged warning.
class HttpSearchClient final : public SearchClient {
public:
    HttpSearchClient(std::string base_url, std::string api_key, int timeout_s = 30);

    std::vector<SearchResult> search(const std::string& query, int k) override;

private:
    std::string base_url_;
    std::string api_key_;
    int timeout_s_;
};

/// http(s) scheme followed by a non-empty host.
bool well_formed_url(const std::string& url);

}  // namespace chronomap::llm
