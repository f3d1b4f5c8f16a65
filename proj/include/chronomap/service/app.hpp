#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronomap/ingest/ingest.hpp"
#include "chronomap/kgstore/store.hpp"
#include "chronomap/llm/gateway.hpp"
#include "chronomap/qa/pipeline.hpp"
#include "chronomap/relations/relations.hpp"

namespace chronomap::service {

/// Bad configuration or missing input: a user error at the CLI.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SheetFile {
    std::filesystem::path path;
    int year{0};
    std::string sheet;
};

enum class Backend : std::uint8_t { http, scripted, replay, record };

const char* to_string(Backend b);
/// Throws ConfigError on an unknown name.
Backend backend_from(const std::string& s);

/// Chat roles that need a backend.
inline constexpr const char* kRoles[] = {"generator", "validator", "composer", "judge"};

/// Relative paths resolve against the config file's directory.
struct AppConfig {
    std::filesystem::path base_dir;

    std::vector<SheetFile> features;
    std::filesystem::path boundaries;
    std::optional<std::filesystem::path> gazetteer;
    std::filesystem::path store;
    std::filesystem::path fewshot;

    ingest::IngestConfig ingest;
    relations::RelationConfig relations;
    qa::QaConfig qa;

    std::map<std::string, Backend> roles;
    std::optional<std::filesystem::path> scripted_rules;
    std::optional<std::filesystem::path> transcript;
    /// none, fixture or http.
    std::string search_backend{"none"};
    std::optional<std::filesystem::path> search_fixture;
    std::string search_url;

    std::string host{"127.0.0.1"};
    int port{8080};
    std::vector<std::string> cors_origins;
    int descriptive_timeout_s{300};

    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    /// Throws ConfigError naming the path when it is missing or malformed.
    static AppConfig load(const std::filesystem::path& path);

    /// Every role set to one backend (the CLI's --gateway).
    void override_backend(Backend b);

    /// Feature, boundary and gazetteer files. Throws ConfigError naming
    /// the first missing one.
    void check_inputs() const;
    /// Files needed by the selected backends.
    void check_gateways() const;
};

/// Owns the clients behind a qa::Gateways. Roles sharing a backend share a
/// client, so a recorder writes one transcript.
class GatewaySet {
public:
    explicit GatewaySet(const AppConfig& cfg);
    GatewaySet(const GatewaySet&) = delete;
    GatewaySet& operator=(const GatewaySet&) = delete;

    [[nodiscard]] qa::Gateways qa() const { return gw_; }
    [[nodiscard]] llm::ChatClient* judge() const { return judge_; }

private:
    llm::ChatClient* client(Backend b, const AppConfig& cfg);

    std::unique_ptr<llm::HttpChatClient> http_;
    std::unique_ptr<llm::ChatClient> scripted_;
    std::unique_ptr<llm::ChatClient> replay_;
    std::unique_ptr<llm::ChatClient> record_;
    std::unique_ptr<llm::SearchClient> search_;
    qa::Gateways gw_;
    llm::ChatClient* judge_{nullptr};
};

/// Ingest the configured sheets into an unsealed store.
kg::Store ingest_store(const AppConfig& cfg, ingest::IngestReport* report = nullptr);

/// Materialize relations into the store; returns the number of new triples.
std::size_t build_relations(kg::Store& store, const AppConfig& cfg, std::ostream* provenance = nullptr);

/// The dump at cfg.store, sealed. Throws ConfigError when absent.
kg::Store load_store(const AppConfig& cfg);

/// Closed set of error codes returned to API clients.
enum class ApiCode : std::uint8_t {
    bad_request,
    parse_error,
    query_error,
    not_found,
    pipeline_failed,
    timeout,
    internal
};

const char* to_string(ApiCode c);

struct ApiError {
    int status{500};
    ApiCode code{ApiCode::internal};
    std::string message;
    std::string stage;
    std::optional<std::size_t> line;
    std::optional<std::size_t> column;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// GeoJSON FeatureCollection of the features matching every given filter.
nlohmann::json features_geojson(const kg::Store& store, const std::optional<std::string>& municipality,
                                const std::optional<int>& year, const std::optional<std::string>& type);

struct ServerDeps {
    const AppConfig* config{nullptr};
    const kg::Store* store{nullptr};
    const qa::PromptBundle* bundle{nullptr};
    qa::Gateways gateways;
};

/// HTTP API over an immutable store. Handlers run on the server's thread
/// pool; stop() returns after in-flight QA work has finished.
class Server {
public:
    explicit Server(ServerDeps deps);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the port.
    /// Throws ConfigError when binding fails.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();
    [[nodiscard]] bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace chronomap::service
