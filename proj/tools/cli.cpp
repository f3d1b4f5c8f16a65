#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <pthread.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "chronomap/eval/evalkit.hpp"
#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/query/query.hpp"
#include "chronomap/service/app.hpp"
#include "chronomap/service/cli.hpp"

namespace chronomap::service {

namespace fs = std::filesystem;

namespace {

// Thrown for problems the user can fix; mapped to exit code 1.
class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config{"chronomap.json"};
    bool json{false};
    std::string gateway;
    bool verbose{false};

    std::string in_path;
    std::string out_path;
    std::string provenance;
    std::string query_source;
    std::vector<std::string> question;
    bool map_image{false};
    bool search{false};
    std::uint64_t seed{1};
    int yesno{45};
    int numeric{45};
    int overview{10};
    bool paraphrase{false};
    std::string items;
    std::string log;
    std::string report;
    std::string label{"generator"};
    std::string contexts_label{"KG"};
    std::string host;
    int port{-1};
};

struct Io {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

void init_logging(bool verbose) {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_color_mt("chronomap");
        spdlog::set_default_logger(logger);
    });
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

AppConfig load_config(const Options& o) {
    auto cfg = AppConfig::load(o.config);
    if (!o.gateway.empty()) cfg.override_backend(backend_from(o.gateway));
    return cfg;
}

fs::path or_default(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

std::string read_all(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw UserError("cannot read " + p.string());
    return read_all(f);
}

qa::PromptBundle prompt_for(const kg::Store& store, const AppConfig& cfg) {
    try {
        return qa::build_prompt(store, store.schema(), cfg.fewshot);
    } catch (const qa::QaError& e) {
        throw UserError(e.what());
    }
}

int cmd_ingest(const Options& o, const Io& io) {
    const auto cfg = load_config(o);
    ingest::IngestReport report;
    auto store = ingest_store(cfg, &report);
    store.seal();
    const auto out = or_default(o.out_path, cfg.store);
    store.dump(out);
    if (o.json) {
        io.out << nlohmann::json{{"input", report.input},
                                 {"ingested", report.ingested},
                                 {"skipped", report.skipped},
                                 {"warnings", report.warnings},
                                 {"triples", store.size()},
                                 {"store", out.string()}}
                      .dump()
               << '\n';
    } else {
        io.out << "ingested " << report.ingested << " of " << report.input << " features (" << report.skipped
               << " skipped), " << store.size() << " triples -> " << out.string() << '\n';
    }
    return 0;
}

int cmd_relations(const Options& o, const Io& io) {
    const auto cfg = load_config(o);
    const auto in = or_default(o.in_path, cfg.store);
    if (!fs::exists(in)) throw UserError("store dump not found: " + in.string() + " (run ingest first)");
    auto store = kg::Store::load(in);
    std::ofstream prov;
    if (!o.provenance.empty()) {
        prov.open(o.provenance);
        if (!prov) throw UserError("cannot write " + o.provenance);
    }
    const auto added = build_relations(store, cfg, o.provenance.empty() ? nullptr : &prov);
    store.seal();
    const auto out = or_default(o.out_path, cfg.store);
    store.dump(out);
    if (o.json) {
        io.out << nlohmann::json{{"relation_triples", added}, {"triples", store.size()}, {"store", out.string()}}.dump() << '\n';
    } else {
        io.out << "added " << added << " relation triples, " << store.size() << " triples -> " << out.string() << '\n';
    }
    return 0;
}

int cmd_dump(const Options& o, const Io& io) {
    auto cfg = load_config(o);
    if (!o.in_path.empty()) cfg.store = o.in_path;
    const auto store = load_store(cfg);
    if (!o.json) {
        io.out << store.to_ntriples();
        return 0;
    }
    const auto bundle = prompt_for(store, cfg);
    io.out << nlohmann::json{{"triples", store.size()},
                             {"features", store.match(std::nullopt, kg::Term::iri(kg::cmo("featureType")), std::nullopt).size()},
                             {"years", bundle.years},
                             {"municipalities", bundle.municipalities},
                             {"feature_types", bundle.feature_types}}
                  .dump()
           << '\n';
    return 0;
}

int cmd_query(const Options& o, const Io& io) {
    auto cfg = load_config(o);
    if (!o.in_path.empty()) cfg.store = o.in_path;
    const std::string text = o.query_source == "-" ? read_all(io.in) : read_file(o.query_source);
    const auto store = load_store(cfg);
    query::QueryResult r;
    try {
        r = query::evaluate(query::parse(text), store);
    } catch (const query::QueryError& e) {
        if (o.json) {
            nlohmann::json err{{"code", e.code() == query::QueryError::Code::semantic ? "query_error" : "parse_error"},
                               {"message", e.message()}};
            if (e.line()) {
                err["line"] = e.line();
                err["column"] = e.column();
            }
            io.out << nlohmann::json{{"error", err}}.dump() << '\n';
        }
        throw UserError(e.what());
    }
    if (o.json) {
        io.out << query::to_sparql_json(r, store).dump() << '\n';
        return 0;
    }
    if (r.form == query::Form::ask) {
        io.out << (r.boolean ? "true" : "false") << '\n';
        return 0;
    }
    // Tab-separated values, the header first; geometries print as WKT.
    const auto j = query::to_sparql_json(r, store);
    const auto& vars = j["head"]["vars"];
    for (std::size_t i = 0; i < vars.size(); ++i) io.out << (i ? "\t" : "") << vars[i].get<std::string>();
    io.out << '\n';
    for (const auto& b : j["results"]["bindings"]) {
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const auto& v = vars[i].get_ref<const std::string&>();
            io.out << (i ? "\t" : "") << (b.contains(v) ? b[v]["value"].get<std::string>() : "");
        }
        io.out << '\n';
    }
    return 0;
}

std::string joined(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
}

int cmd_qa(const Options& o, const Io& io, bool descriptive) {
    const auto cfg = load_config(o);
    const auto store = load_store(cfg);
    const auto bundle = prompt_for(store, cfg);
    const GatewaySet gateways(cfg);
    const auto question = joined(o.question);
    if (!descriptive) {
        const auto r = qa::answer_factual(question, bundle, gateways.qa(), store, cfg.qa);
        if (o.json) io.out << r.to_json(store).dump() << '\n';
        if (!r.delivered) throw UserError("no answer delivered: failed at stage " + r.failed_stage + ": " + r.failure_reason);
        if (!o.json) io.out << r.answer << '\n';
        return 0;
    }
    const auto r = qa::answer_descriptive(question, {o.map_image, o.search}, bundle, gateways.qa(), store, cfg.qa);
    if (o.json) io.out << r.to_json(store).dump() << '\n';
    if (!r.delivered) throw UserError("no answer delivered: failed at stage " + r.failed_stage + ": " + r.failure_reason);
    if (!o.json) io.out << r.answer << '\n';
    return 0;
}

int cmd_bench_generate(const Options& o, const Io& io) {
    const auto cfg = load_config(o);
    const auto store = load_store(cfg);
    std::unique_ptr<GatewaySet> gateways;
    if (o.paraphrase) gateways = std::make_unique<GatewaySet>(cfg);
    std::vector<std::string> warnings;
    std::vector<eval::BenchmarkItem> items;
    try {
        items = eval::generate_benchmark(store, {o.yesno, o.numeric, o.overview}, o.seed,
                                         gateways ? gateways->qa().generator : nullptr, &warnings);
    } catch (const std::invalid_argument& e) {
        throw UserError(e.what());
    }
    if (o.out_path.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& it : items) arr.push_back(it.to_json());
        io.out << arr.dump(2) << '\n';
        return 0;
    }
    eval::save_benchmark(items, o.out_path);
    if (o.json) {
        io.out << nlohmann::json{{"items", items.size()}, {"warnings", warnings}, {"path", o.out_path}}.dump() << '\n';
    } else {
        io.out << "wrote " << items.size() << " items -> " << o.out_path << '\n';
    }
    return 0;
}

void write_report(const eval::EvalReport& report, const Options& o, const Io& io) {
    if (!o.report.empty()) {
        std::ofstream f(o.report);
        if (!f) throw UserError("cannot write " + o.report);
        f << report.to_json().dump(2) << '\n';
    }
    if (o.json) {
        io.out << report.to_json().dump() << '\n';
    } else {
        io.out << report.render_text();
    }
}

int cmd_bench_run(const Options& o, const Io& io) {
    const auto cfg = load_config(o);
    const auto store = load_store(cfg);
    const auto bundle = prompt_for(store, cfg);
    if (!fs::exists(o.items)) throw UserError("benchmark file not found: " + o.items);
    const auto items = eval::load_benchmark(o.items);
    const GatewaySet gateways(cfg);
    eval::RunOptions run;
    run.qa = cfg.qa;
    run.descriptive = {o.map_image, o.search};
    run.parallel_width = cfg.qa.parallel_width;
    const auto log = eval::run_benchmark(items, bundle, gateways.qa(), gateways.judge(), store, run);
    eval::write_log(log, fs::path(o.log));
    write_report(eval::summarize(log, o.label, o.contexts_label), o, io);
    return 0;
}

int cmd_bench_report(const Options& o, const Io& io) {
    if (!fs::exists(o.log)) throw UserError("outcome log not found: " + o.log);
    eval::OutcomeLog log;
    try {
        log = eval::read_log(o.log);
    } catch (const std::runtime_error& e) {
        throw UserError(e.what());
    }
    write_report(eval::summarize(log, o.label, o.contexts_label), o, io);
    return 0;
}

int cmd_serve(const Options& o, const Io& io) {
    auto cfg = load_config(o);
    if (!o.host.empty()) cfg.host = o.host;
    if (o.port >= 0) cfg.port = o.port;
    spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);
    const auto store = load_store(cfg);
    const auto bundle = prompt_for(store, cfg);
    const GatewaySet gateways(cfg);

    // Signals are taken synchronously by a watcher thread; server threads
    // inherit the blocked mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Server server({&cfg, &store, &bundle, gateways.qa()});
    const int port = server.bind(cfg.host, cfg.port);
    if (o.json) {
        io.out << nlohmann::json{{"host", cfg.host}, {"port", port}}.dump() << std::endl;
    } else {
        io.out << "listening on " << cfg.host << ":" << port << std::endl;
    }
    std::atomic<bool> done{false};
    std::thread watcher([&] {
        const timespec tick{0, 200'000'000};
        while (!done) {
            if (sigtimedwait(&signals, nullptr, &tick) > 0) {
                spdlog::info("shutting down");
                server.stop();
                return;
            }
        }
    });
    server.listen();
    done = true;
    watcher.join();
    server.stop();
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Historical map knowledge graph: build, query, question answering and evaluation", "chronomap"};
    app.set_version_flag("--version", "chronomap 0.1.0");
    app.add_option("-c,--config", o.config, "Configuration file")->capture_default_str();
    app.add_flag("--json", o.json, "Machine-readable JSON output");
    app.add_option("--gateway", o.gateway, "Backend for every LLM role")
        ->check(CLI::IsMember({"http", "scripted", "replay", "record"}));
    app.add_flag("-v,--verbose", o.verbose, "Debug logging");
    app.require_subcommand(1);

    auto* ingest = app.add_subcommand("ingest", "Ingest feature files into a store dump");
    ingest->add_option("-o,--out", o.out_path, "Output dump (default: data.store)");

    auto* rel = app.add_subcommand("relations", "Materialize spatial and temporal relations");
    rel->add_option("-i,--in", o.in_path, "Input dump (default: data.store)");
    rel->add_option("-o,--out", o.out_path, "Output dump (default: data.store)");
    rel->add_option("--provenance", o.provenance, "JSON-lines edge provenance file");

    auto* dump = app.add_subcommand("dump", "Print the store as N-Triples (statistics with --json)");
    dump->add_option("-i,--in", o.in_path, "Store dump (default: data.store)");

    auto* query = app.add_subcommand("query", "Run a SPARQL query");
    query->add_option("source", o.query_source, "Query file, or - for stdin")->required();
    query->add_option("-i,--in", o.in_path, "Store dump (default: data.store)");

    auto* qa = app.add_subcommand("qa", "Answer a question");
    qa->require_subcommand(1);
    auto* factual = qa->add_subcommand("factual", "Factual question");
    factual->add_option("question", o.question, "Question text")->required();
    auto* descriptive = qa->add_subcommand("descriptive", "Descriptive question");
    descriptive->add_option("question", o.question, "Question text")->required();
    descriptive->add_flag("--map-image", o.map_image, "Attach the map tile");
    descriptive->add_flag("--search", o.search, "Use web search results");

    auto* bench = app.add_subcommand("bench", "Benchmark generation, runs and reports");
    bench->require_subcommand(1);
    auto* gen = bench->add_subcommand("generate", "Generate benchmark items from the store");
    gen->add_option("-o,--out", o.out_path, "Benchmark file (default: stdout)");
    gen->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    gen->add_option("--yesno", o.yesno, "Yes/no items")->capture_default_str()->check(CLI::NonNegativeNumber);
    gen->add_option("--numeric", o.numeric, "Numeric items")->capture_default_str()->check(CLI::NonNegativeNumber);
    gen->add_option("--overview", o.overview, "Overview items")->capture_default_str()->check(CLI::NonNegativeNumber);
    gen->add_flag("--paraphrase", o.paraphrase, "Rephrase questions with the generator backend");
    auto* run = bench->add_subcommand("run", "Run a benchmark and write the outcome log");
    run->add_option("--items", o.items, "Benchmark file")->required();
    run->add_option("--log", o.log, "Outcome log to write")->required();
    run->add_option("--report", o.report, "Report JSON to write");
    run->add_option("--label", o.label, "Row label for factual results")->capture_default_str();
    run->add_option("--contexts-label", o.contexts_label, "Row label for descriptive results")->capture_default_str();
    run->add_flag("--map-image", o.map_image, "Attach map tiles to descriptive items");
    run->add_flag("--search", o.search, "Use web search for descriptive items");
    auto* rep = bench->add_subcommand("report", "Summarize an outcome log");
    rep->add_option("--log", o.log, "Outcome log")->required();
    rep->add_option("--report", o.report, "Report JSON to write");
    rep->add_option("--label", o.label, "Row label for factual results")->capture_default_str();
    rep->add_option("--contexts-label", o.contexts_label, "Row label for descriptive results")->capture_default_str();

    auto* serve = app.add_subcommand("serve", "Start the HTTP API");
    serve->add_option("--host", o.host, "Bind address (default: server.host)");
    serve->add_option("--port", o.port, "Port, 0 for any (default: server.port)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    init_logging(o.verbose);
    const Io io{in, out, err};
    try {
        if (ingest->parsed()) return cmd_ingest(o, io);
        if (rel->parsed()) return cmd_relations(o, io);
        if (dump->parsed()) return cmd_dump(o, io);
        if (query->parsed()) return cmd_query(o, io);
        if (factual->parsed()) return cmd_qa(o, io, false);
        if (descriptive->parsed()) return cmd_qa(o, io, true);
        if (gen->parsed()) return cmd_bench_generate(o, io);
        if (run->parsed()) return cmd_bench_run(o, io);
        if (rep->parsed()) return cmd_bench_report(o, io);
        if (serve->parsed()) return cmd_serve(o, io);
    } catch (const UserError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ingest::IngestError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const kg::StoreError& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == kg::StoreError::Code::io_error || e.code() == kg::StoreError::Code::parse_error ? 1 : 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

}  // namespace chronomap::service
