#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include "chronomap/geometry/io.hpp"
#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/query/query.hpp"
#include "chronomap/service/app.hpp"

namespace chronomap::service {

namespace {

using Clock = std::chrono::steady_clock;

constexpr const char* kJson = "application/json";

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send(httplib::Response& res, const ApiError& e) { send(res, e.status, e.to_json()); }

ApiError bad_request(std::string message) { return {400, ApiCode::bad_request, std::move(message), "", {}, {}}; }

// Latest request tag seen by any role, so a timeout can report how far the
// pipeline got.
struct StageState {
    mutable std::mutex mu;
    std::string last;

    std::string get() const {
        std::lock_guard lock(mu);
        return last;
    }
};

class StageTracker final : public llm::ChatClient {
public:
    StageTracker(llm::ChatClient* inner, std::shared_ptr<StageState> state) : inner_(inner), state_(std::move(state)) {}

    llm::ChatResponse complete(const llm::ChatRequest& req) override {
        {
            std::lock_guard lock(state_->mu);
            state_->last = req.tag;
        }
        return inner_->complete(req);
    }

private:
    llm::ChatClient* inner_;
    std::shared_ptr<StageState> state_;
};

struct DescriptiveJob {
    std::mutex mu;
    std::condition_variable cv;
    bool done{false};
    std::optional<qa::DescriptiveResult> result;
    std::string error;
    std::shared_ptr<StageState> stage{std::make_shared<StageState>()};
    std::unique_ptr<StageTracker> generator;
    std::unique_ptr<StageTracker> validator;
    std::unique_ptr<StageTracker> composer;
};

// Stage names a client sees for the tags the pipeline uses.
std::string stage_of(const std::string& tag) {
    if (tag.empty()) return "queued";
    if (tag == "decompose") return "decompose";
    if (tag == "compose") return "compose";
    return "sub-questions";
}

nlohmann::json body_json(const httplib::Request& req) {
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw ApiError(bad_request("request body must be a JSON object"));
        return j;
    } catch (const nlohmann::json::exception&) {
        throw ApiError(bad_request("request body is not valid JSON"));
    }
}

std::string required_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
        throw ApiError(bad_request(std::string("missing string field '") + key + "'"));
    }
    return j[key].get<std::string>();
}

bool optional_bool(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return false;
    if (!j[key].is_boolean()) throw ApiError(bad_request(std::string("field '") + key + "' must be a boolean"));
    return j[key].get<bool>();
}

thread_local Clock::time_point t_request_start;

}  // namespace

const char* to_string(ApiCode c) {
    switch (c) {
        case ApiCode::bad_request: return "bad_request";
        case ApiCode::parse_error: return "parse_error";
        case ApiCode::query_error: return "query_error";
        case ApiCode::not_found: return "not_found";
        case ApiCode::pipeline_failed: return "pipeline_failed";
        case ApiCode::timeout: return "timeout";
        default: return "internal";
    }
}

nlohmann::json ApiError::to_json() const {
    nlohmann::json e{{"code", to_string(code)}, {"message", message}};
    if (!stage.empty()) e["stage"] = stage;
    if (line) e["line"] = *line;
    if (column) e["column"] = *column;
    return {{"error", e}};
}

nlohmann::json features_geojson(const kg::Store& store, const std::optional<std::string>& municipality,
                                const std::optional<int>& year, const std::optional<std::string>& type) {
    const auto p_type = kg::Term::iri(kg::cmo("featureType"));
    const auto p_year = kg::Term::iri(kg::cmo("year"));
    const auto p_muni = kg::Term::iri(kg::cmo("municipality"));
    auto first = [&](const kg::Term& s, const char* prop) -> std::optional<kg::Term> {
        const auto m = store.match(s, kg::Term::iri(kg::cmo(prop)), std::nullopt);
        if (m.empty()) return std::nullopt;
        return m.front().object;
    };

    auto features = nlohmann::json::array();
    const std::optional<kg::Term> type_term = type ? std::optional<kg::Term>(kg::Term::string(*type)) : std::nullopt;
    for (const auto& t : store.match(std::nullopt, p_type, type_term)) {
        const auto& s = t.subject;
        const auto y = store.match(s, p_year, std::nullopt);
        if (y.empty()) continue;
        const auto feature_year = y.front().object.as_integer();
        if (year && feature_year != *year) continue;
        if (municipality && store.match(s, p_muni, kg::Term::string(*municipality)).empty()) continue;
        const auto geom = store.geometry_of(s.text());
        if (!geom) continue;

        nlohmann::json props{{"iri", s.text()}, {"type", t.object.text()}, {"year", feature_year}};
        auto munis = nlohmann::json::array();
        for (const auto& m : store.match(s, p_muni, std::nullopt)) munis.push_back(m.object.text());
        props["municipality"] = munis;
        if (const auto a = first(s, "areaSqm")) props["areaSqm"] = a->as_integer();
        if (const auto l = first(s, "lengthM")) props["lengthM"] = l->as_integer();
        if (const auto n = first(s, "currentName")) props["currentName"] = n->text();
        features.push_back({{"type", "Feature"}, {"geometry", geo::to_geojson(*geom)}, {"properties", props}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

struct Server::Impl {
    explicit Impl(ServerDeps d)
        : deps(std::move(d)),
          qa_slots(std::clamp<std::ptrdiff_t>(deps.config->qa.parallel_width, 1, 1024)) {}

    ServerDeps deps;
    httplib::Server http;
    std::counting_semaphore<1024> qa_slots;
    std::mutex work_mu;
    std::condition_variable work_cv;
    int in_flight{0};

    void begin_work() {
        std::lock_guard lock(work_mu);
        ++in_flight;
    }

    void end_work() {
        {
            std::lock_guard lock(work_mu);
            --in_flight;
        }
        work_cv.notify_all();
    }

    void wait_idle() {
        std::unique_lock lock(work_mu);
        work_cv.wait(lock, [&] { return in_flight == 0; });
    }

    bool origin_allowed(const std::string& origin) const {
        const auto& list = deps.config->cors_origins;
        return std::find(list.begin(), list.end(), "*") != list.end() ||
               std::find(list.begin(), list.end(), origin) != list.end();
    }

    // Handlers translate ApiError to a JSON body; anything else becomes a
    // bare internal error without details.
    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const ApiError& e) {
                send(res, e);
            }
        };
    }

    void routes();
    void health(httplib::Response& res) const;
    void sparql(const httplib::Request& req, httplib::Response& res) const;
    void factual(const httplib::Request& req, httplib::Response& res);
    void descriptive(const httplib::Request& req, httplib::Response& res);
    void features(const httplib::Request& req, httplib::Response& res) const;
    void tile(const httplib::Request& req, httplib::Response& res) const;
};

void Server::Impl::routes() {
    http.set_payload_max_length(1 << 20);
    http.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
        t_request_start = Clock::now();
        return httplib::Server::HandlerResponse::Unhandled;
    });
    http.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (!origin.empty() && origin_allowed(origin)) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
    });
    http.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::info("{} {} {} {:.1f}ms", req.method, req.path, res.status, ms_since(t_request_start));
    });
    http.set_exception_handler([](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
        } catch (...) {
            spdlog::error("{} {} failed", req.method, req.path);
        }
        send(res, ApiError{500, ApiCode::internal, "internal error", "", {}, {}});
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            send(res, ApiError{404, ApiCode::not_found, "no such endpoint", "", {}, {}});
        } else {
            send(res, ApiError{res.status, res.status >= 500 ? ApiCode::internal : ApiCode::bad_request, "request failed", "", {}, {}});
        }
    });

    http.Options(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        if (origin_allowed(req.get_header_value("Origin"))) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        }
        res.status = 204;
    });
    http.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) { health(res); }));
    http.Post("/sparql", guarded([this](const httplib::Request& req, httplib::Response& res) { sparql(req, res); }));
    http.Post("/qa/factual", guarded([this](const httplib::Request& req, httplib::Response& res) { factual(req, res); }));
    http.Post("/qa/descriptive", guarded([this](const httplib::Request& req, httplib::Response& res) { descriptive(req, res); }));
    http.Get("/features", guarded([this](const httplib::Request& req, httplib::Response& res) { features(req, res); }));
    http.Get("/schema", guarded([this](const httplib::Request&, httplib::Response& res) {
        auto j = deps.store->schema().to_json();
        j["prefixes"] = {{"cmf", kg::kFeatureNs}, {"cmo", kg::kOntologyNs}, {"cmr", kg::kRelationNs}, {"xsd", kg::kXsdNs}};
        j["catalog"] = qa::schema_catalog(deps.store->schema());
        send(res, 200, j);
    }));
    http.Get(R"(/tiles/([^/]+)/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) { tile(req, res); }));
}

void Server::Impl::health(httplib::Response& res) const {
    send(res, 200,
         {{"status", "ok"},
          {"triples", deps.store->size()},
          {"years", deps.bundle->years},
          {"municipalities", deps.bundle->municipalities}});
}

void Server::Impl::sparql(const httplib::Request& req, httplib::Response& res) const {
    std::string text;
    if (req.get_header_value("Content-Type").rfind("application/sparql-query", 0) == 0) {
        text = req.body;
    } else {
        text = required_string(body_json(req), "query");
    }
    try {
        const auto q = query::parse(text);
        const auto result = query::evaluate(q, *deps.store);
        send(res, 200, query::to_sparql_json(result, *deps.store));
    } catch (const query::QueryError& e) {
        ApiError err{400, ApiCode::query_error, e.message(), "", {}, {}};
        if (e.code() != query::QueryError::Code::semantic) {
            err.code = ApiCode::parse_error;
            err.line = e.line();
            err.column = e.column();
        }
        auto body = err.to_json();
        if (!e.expected().empty()) body["error"]["expected"] = e.expected();
        send(res, 400, body);
    }
}

void Server::Impl::factual(const httplib::Request& req, httplib::Response& res) {
    const auto question = required_string(body_json(req), "question");
    const auto t0 = Clock::now();
    qa_slots.acquire();
    qa::FactualResult r;
    try {
        r = qa::answer_factual(question, *deps.bundle, deps.gateways, *deps.store, deps.config->qa);
    } catch (...) {
        qa_slots.release();
        throw;
    }
    qa_slots.release();
    spdlog::info("qa/factual: {} after {} attempt(s), {:.1f}ms", r.delivered ? "delivered" : "failed at " + r.failed_stage,
                 r.attempts, ms_since(t0));
    if (r.delivered) {
        send(res, 200, r.to_json(*deps.store));
        return;
    }
    auto body = ApiError{422, ApiCode::pipeline_failed, r.failure_reason, r.failed_stage, {}, {}}.to_json();
    body["result"] = r.to_json(*deps.store);
    send(res, 422, body);
}

void Server::Impl::descriptive(const httplib::Request& req, httplib::Response& res) {
    const auto body = body_json(req);
    const auto question = required_string(body, "question");
    qa::DescriptiveOptions opts;
    opts.use_map_image = optional_bool(body, "use_map_image");
    opts.use_search = optional_bool(body, "use_search");

    auto job = std::make_shared<DescriptiveJob>();
    job->generator = std::make_unique<StageTracker>(deps.gateways.generator, job->stage);
    job->validator = std::make_unique<StageTracker>(deps.gateways.validator, job->stage);
    job->composer = std::make_unique<StageTracker>(deps.gateways.composer, job->stage);
    qa::Gateways gw{job->generator.get(), job->validator.get(), job->composer.get(), deps.gateways.search};

    const auto t0 = Clock::now();
    begin_work();
    std::thread([this, job, gw, question, opts, t0] {
        qa_slots.acquire();
        try {
            auto r = qa::answer_descriptive(question, opts, *deps.bundle, gw, *deps.store, deps.config->qa);
            std::lock_guard lock(job->mu);
            job->result = std::move(r);
        } catch (const std::exception& e) {
            std::lock_guard lock(job->mu);
            job->error = e.what();
        }
        qa_slots.release();
        spdlog::info("qa/descriptive finished in {:.1f}ms", ms_since(t0));
        {
            std::lock_guard lock(job->mu);
            job->done = true;
        }
        job->cv.notify_all();
        end_work();
    }).detach();

    std::unique_lock lock(job->mu);
    const bool finished =
        job->cv.wait_for(lock, std::chrono::seconds(deps.config->descriptive_timeout_s), [&] { return job->done; });
    if (!finished) {
        const auto stage = job->stage->get();
        throw ApiError{504, ApiCode::timeout,
                       "descriptive answer not ready after " + std::to_string(deps.config->descriptive_timeout_s) + " s",
                       stage_of(stage), {}, {}};
    }
    if (!job->error.empty()) {
        spdlog::error("qa/descriptive failed: {}", job->error);
        throw ApiError{500, ApiCode::internal, "internal error", "", {}, {}};
    }
    const auto& r = *job->result;
    if (r.delivered) {
        send(res, 200, r.to_json(*deps.store));
        return;
    }
    auto err = ApiError{422, ApiCode::pipeline_failed, r.failure_reason, r.failed_stage, {}, {}}.to_json();
    err["result"] = r.to_json(*deps.store);
    send(res, 422, err);
}

void Server::Impl::features(const httplib::Request& req, httplib::Response& res) const {
    auto param = [&](const char* key) -> std::optional<std::string> {
        if (!req.has_param(key) || req.get_param_value(key).empty()) return std::nullopt;
        return req.get_param_value(key);
    };
    std::optional<int> year;
    if (const auto y = param("year")) {
        try {
            std::size_t used = 0;
            year = std::stoi(*y, &used);
            if (used != y->size()) throw std::invalid_argument(*y);
        } catch (const std::exception&) {
            throw ApiError(bad_request("year must be an integer"));
        }
    }
    auto muni = param("municipality");
    if (muni) std::transform(muni->begin(), muni->end(), muni->begin(), [](unsigned char c) { return std::tolower(c); });
    send(res, 200, features_geojson(*deps.store, muni, year, param("type")));
}

void Server::Impl::tile(const httplib::Request& req, httplib::Response& res) const {
    std::string muni = req.matches[1];
    const std::string year = req.matches[2];
    std::transform(muni.begin(), muni.end(), muni.begin(), [](unsigned char c) { return std::tolower(c); });
    const bool safe_muni = !muni.empty() && std::all_of(muni.begin(), muni.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_';
    });
    const bool safe_year = !year.empty() && std::all_of(year.begin(), year.end(), [](unsigned char c) { return std::isdigit(c); });
    if (!safe_muni || !safe_year) throw ApiError(bad_request("tile path must be /tiles/{municipality}/{year}"));
    const auto& dir = deps.config->qa.tiles_dir;
    if (dir.empty()) throw ApiError{404, ApiCode::not_found, "map tiles are not configured", "", {}, {}};
    const auto path = dir / (muni + "_" + year + ".png");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ApiError{404, ApiCode::not_found, "no tile for " + muni + " " + year, "", {}, {}};
    std::ostringstream data;
    data << in.rdbuf();
    res.status = 200;
    res.set_content(data.str(), "image/png");
}

Server::Server(ServerDeps deps) : impl_(std::make_unique<Impl>(std::move(deps))) {
    if (!impl_->deps.config || !impl_->deps.store || !impl_->deps.bundle) throw std::invalid_argument("server dependencies missing");
    if (!impl_->deps.store->sealed()) throw std::invalid_argument("server needs a sealed store");
    impl_->routes();
}

Server::~Server() {
    stop();
}

int Server::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->http.bind_to_any_port(host);
    } else if (!impl_->http.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
    impl_->http.stop();
    impl_->wait_idle();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace chronomap::service
