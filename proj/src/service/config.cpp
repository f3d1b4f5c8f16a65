#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>

#include "chronomap/service/app.hpp"

namespace chronomap::service {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<fs::path> opt_path(const nlohmann::json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return resolve(base, j[key].get<std::string>());
}

void require(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

}  // namespace

const char* to_string(Backend b) {
    switch (b) {
        case Backend::http: return "http";
        case Backend::scripted: return "scripted";
        case Backend::replay: return "replay";
        default: return "record";
    }
}

Backend backend_from(const std::string& s) {
    for (const auto b : {Backend::http, Backend::scripted, Backend::replay, Backend::record}) {
        if (s == to_string(b)) return b;
    }
    throw ConfigError("unknown gateway backend '" + s + "' (expected http, scripted, replay or record)");
}

AppConfig AppConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    AppConfig c;
    c.base_dir = base_dir;
    try {
        const auto data = j.value("data", nlohmann::json::object());
        for (const auto& f : data.value("features", nlohmann::json::array())) {
            c.features.push_back({resolve(base_dir, f.at("path").get<std::string>()), f.at("year").get<int>(),
                                  f.value("sheet", std::string("sheet"))});
        }
        if (auto p = opt_path(data, "boundaries", base_dir)) c.boundaries = *p;
        c.gazetteer = opt_path(data, "gazetteer", base_dir);
        c.store = opt_path(data, "store", base_dir).value_or(base_dir / "store.nt");
        if (auto p = opt_path(data, "fewshot", base_dir)) c.fewshot = *p;

        if (j.contains("ingest")) c.ingest = ingest::IngestConfig::from_json(j["ingest"]);
        if (j.contains("relations")) c.relations = relations::RelationConfig::from_json(j["relations"]);
        if (j.contains("qa")) c.qa = qa::QaConfig::from_json(j["qa"]);
        if (auto p = opt_path(data, "tiles_dir", base_dir)) c.qa.tiles_dir = *p;

        const auto gw = j.value("gateways", nlohmann::json::object());
        for (const auto* role : kRoles) c.roles[role] = backend_from(gw.value(role, std::string("http")));
        c.scripted_rules = opt_path(gw, "scripted_rules", base_dir);
        c.transcript = opt_path(gw, "transcript", base_dir);
        const auto search = gw.value("search", nlohmann::json::object());
        c.search_backend = search.value("backend", c.search_backend);
        if (c.search_backend != "none" && c.search_backend != "fixture" && c.search_backend != "http") {
            throw ConfigError("unknown search backend '" + c.search_backend + "' (expected none, fixture or http)");
        }
        c.search_fixture = opt_path(search, "fixture", base_dir);
        c.search_url = search.value("url", std::string());

        const auto server = j.value("server", nlohmann::json::object());
        c.host = server.value("host", c.host);
        c.port = server.value("port", c.port);
        c.cors_origins = server.value("cors_origins", c.cors_origins);
        c.descriptive_timeout_s = server.value("descriptive_timeout_s", c.descriptive_timeout_s);
        if (c.port < 0 || c.port > 65535) throw ConfigError("server.port out of range");
        if (c.descriptive_timeout_s < 1) throw ConfigError("server.descriptive_timeout_s must be >= 1");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const relations::ConfigError& e) {
        throw ConfigError(e.what());
    } catch (const qa::QaError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

AppConfig AppConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

void AppConfig::override_backend(Backend b) {
    for (auto& [role, backend] : roles) backend = b;
}

void AppConfig::check_inputs() const {
    if (features.empty()) throw ConfigError("config lists no feature files (data.features)");
    for (const auto& f : features) require(f.path, "feature file");
    require(boundaries, "boundaries file");
    if (gazetteer) require(*gazetteer, "gazetteer fixture");
}

void AppConfig::check_gateways() const {
    for (const auto& [role, b] : roles) {
        if (b == Backend::scripted) {
            if (!scripted_rules) throw ConfigError("role " + role + " uses scripted but gateways.scripted_rules is not set");
            require(*scripted_rules, "scripted rules");
        }
        if (b == Backend::replay) {
            if (!transcript) throw ConfigError("role " + role + " uses replay but gateways.transcript is not set");
            require(*transcript, "transcript");
        }
        if (b == Backend::record && !transcript) {
            throw ConfigError("role " + role + " uses record but gateways.transcript is not set");
        }
    }
    if (search_backend == "fixture") {
        if (!search_fixture) throw ConfigError("search backend fixture needs gateways.search.fixture");
        require(*search_fixture, "search fixture");
    }
    if (search_backend == "http" && search_url.empty()) throw ConfigError("search backend http needs gateways.search.url");
}

GatewaySet::GatewaySet(const AppConfig& cfg) {
    cfg.check_gateways();
    gw_.generator = client(cfg.roles.at("generator"), cfg);
    gw_.validator = client(cfg.roles.at("validator"), cfg);
    gw_.composer = client(cfg.roles.at("composer"), cfg);
    judge_ = client(cfg.roles.at("judge"), cfg);
    if (cfg.search_backend == "fixture") {
        search_ = std::make_unique<llm::FixtureSearchClient>(llm::FixtureSearchClient::from_file(*cfg.search_fixture));
    } else if (cfg.search_backend == "http") {
        const char* key = std::getenv("SEARCH_API_KEY");
        search_ = std::make_unique<llm::HttpSearchClient>(cfg.search_url, key ? key : "");
    }
    gw_.search = search_.get();
}

llm::ChatClient* GatewaySet::client(Backend b, const AppConfig& cfg) {
    auto http = [&]() -> llm::ChatClient* {
        if (!http_) {
            try {
                http_ = std::make_unique<llm::HttpChatClient>(llm::HttpChatClient::Options::from_env());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        return http_.get();
    };
    try {
        switch (b) {
            case Backend::http: return http();
            case Backend::scripted:
                if (!scripted_) {
                    scripted_ = std::make_unique<llm::ScriptedChatClient>(llm::ScriptedChatClient::from_file(*cfg.scripted_rules));
                }
                return scripted_.get();
            case Backend::replay:
                if (!replay_) replay_ = std::make_unique<llm::ReplayChatClient>(llm::ReplayChatClient::from_file(*cfg.transcript));
                return replay_.get();
            case Backend::record:
                if (!record_) record_ = std::make_unique<llm::RecordingChatClient>(*http(), *cfg.transcript);
                return record_.get();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("gateway ") + to_string(b) + ": " + e.what());
    }
    return nullptr;
}

kg::Store ingest_store(const AppConfig& cfg, ingest::IngestReport* report) {
    cfg.check_inputs();
    std::optional<ingest::FixtureGazetteer> gazetteer;
    if (cfg.gazetteer) gazetteer = ingest::FixtureGazetteer::from_file(*cfg.gazetteer);
    ingest::Ingestor ing(cfg.ingest, ingest::load_boundaries(cfg.boundaries), gazetteer ? &*gazetteer : nullptr);
    for (const auto& f : cfg.features) ing.ingest_features(f.path, f.year, f.sheet);
    kg::Store store;
    ing.emit(store);
    for (const auto& w : ing.report().warnings) spdlog::warn("{}", w);
    if (report) *report = ing.report();
    return store;
}

std::size_t build_relations(kg::Store& store, const AppConfig& cfg, std::ostream* provenance) {
    const auto edges = relations::compute_all(relations::features_from_store(store), cfg.relations);
    return relations::materialize(edges, store, cfg.relations, provenance);
}

kg::Store load_store(const AppConfig& cfg) {
    if (!fs::exists(cfg.store)) {
        throw ConfigError("store dump not found: " + cfg.store.string() + " (run ingest and relations first)");
    }
    auto store = kg::Store::load(cfg.store);
    store.seal();
    return store;
}

}  // namespace chronomap::service
