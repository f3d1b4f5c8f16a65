#include <doctest.h>

#include <fstream>
#include <sstream>

#include "chronomap/eval/evalkit.hpp"
#include "chronomap/service/app.hpp"
#include "chronomap/service/cli.hpp"
#include "support/seeland.hpp"

using namespace chronomap;
using namespace chronomap::testing;

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(CHRONOMAP_FIXTURES);

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args, const std::string& stdin_text = "") {
    args.insert(args.begin(), "chronomap");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(stdin_text);
    std::ostringstream out;
    std::ostringstream err;
    const int code = service::run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// A scratch directory with a config whose inputs point at the fixtures and
// whose outputs stay inside the scratch directory.
struct Workspace {
    fs::path dir;
    fs::path config;

    explicit Workspace(const std::string& name, const std::string& backend = "scripted") {
        dir = fs::temp_directory_path() / ("chronomap_cli_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        auto j = nlohmann::json::parse(slurp(kFixtures / "service/config.json"));
        const auto svc = kFixtures / "service";
        for (auto& f : j["data"]["features"]) f["path"] = (svc / f["path"].get<std::string>()).string();
        for (const char* key : {"boundaries", "fewshot", "tiles_dir"}) {
            j["data"][key] = (svc / j["data"][key].get<std::string>()).string();
        }
        j["data"]["store"] = "store.nt";
        j["gateways"]["scripted_rules"] = (svc / "rules.json").string();
        j["gateways"]["transcript"] = "transcript.jsonl";
        j["gateways"]["search"]["fixture"] = (svc / "../llm/search.json").string();
        for (const char* role : service::kRoles) j["gateways"][role] = backend;
        config = dir / "config.json";
        std::ofstream(config) << j.dump(2);
    }

    [[nodiscard]] std::vector<std::string> with(std::vector<std::string> args) const {
        args.insert(args.begin(), {"--config", config.string()});
        return args;
    }

    void build() const {
        REQUIRE(cli(with({"ingest"})).code == 0);
        REQUIRE(cli(with({"relations"})).code == 0);
    }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
    const auto none = cli({});
    CHECK(none.code == 1);
    const auto unknown = cli({"frobnicate"});
    CHECK(unknown.code == 1);
    CHECK(!unknown.err.empty());
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"--gateway", "pigeon", "dump"}).code == 1);
}

TEST_CASE("missing config file names the path") {
    const auto r = cli({"--config", "/nonexistent/where.json", "dump"});
    CHECK(r.code == 1);
    CHECK(r.err.find("/nonexistent/where.json") != std::string::npos);
}

TEST_CASE("ingest, relations and dump") {
    const Workspace ws("build");
    const auto ing = cli(ws.with({"--json", "ingest"}));
    REQUIRE(ing.code == 0);
    const auto ij = nlohmann::json::parse(ing.out);
    CHECK(ij["skipped"] == 0);
    CHECK(ij["ingested"] == ij["input"]);

    const auto prov = ws.dir / "edges.jsonl";
    const auto rel = cli(ws.with({"--json", "relations", "--provenance", prov.string()}));
    REQUIRE(rel.code == 0);
    const auto rj = nlohmann::json::parse(rel.out);
    CHECK(rj["relation_triples"].get<int>() > 0);
    CHECK(rj["triples"] == seeland_store().size());
    CHECK(fs::file_size(prov) > 0);

    const auto stats = cli(ws.with({"--json", "dump"}));
    REQUIRE(stats.code == 0);
    const auto sj = nlohmann::json::parse(stats.out);
    CHECK(sj["years"] == nlohmann::json({1877, 1901, 1916}));
    CHECK(sj["municipalities"] == nlohmann::json({"aarberg", "bargen"}));

    const auto nt = cli(ws.with({"dump"}));
    REQUIRE(nt.code == 0);
    CHECK(nt.out == seeland_store().to_ntriples());

    const Workspace fresh("nostore");
    const auto missing = cli(fresh.with({"dump"}));
    CHECK(missing.code == 1);
    CHECK(missing.err.find("store.nt") != std::string::npos);
}

TEST_CASE("query from stdin and from a file") {
    const Workspace ws("query");
    ws.build();
    const auto ask = cli(ws.with({"query", "-"}), "ASK { ?f cmo:featureType \"lake\" ; cmo:municipality \"bargen\" }");
    CHECK(ask.code == 0);
    CHECK(ask.out == "true\n");
    CHECK(cli(ws.with({"query", "-"}), "ASK { ?f cmo:featureType \"glacier\" }").out == "false\n");

    const auto file = ws.dir / "q.rq";
    std::ofstream(file) << "SELECT ?y (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType \"forest\" ; cmo:year ?y } GROUP BY ?y ORDER BY ?y";
    const auto sel = cli(ws.with({"query", file.string()}));
    CHECK(sel.code == 0);
    CHECK(sel.out == "y\tn\n1877\t10\n1901\t18\n1916\t17\n");

    const auto js = cli(ws.with({"--json", "query", file.string()}));
    CHECK(js.code == 0);
    CHECK(nlohmann::json::parse(js.out)["results"]["bindings"].size() == 3);

    const auto bad = cli(ws.with({"--json", "query", "-"}), "SELECT ?x WHERE {");
    CHECK(bad.code == 1);
    CHECK(nlohmann::json::parse(bad.out)["error"]["code"] == "parse_error");
    CHECK(cli(ws.with({"query", "/nonexistent.rq"})).code == 1);
}

TEST_CASE("qa subcommands") {
    const Workspace ws("qa");
    ws.build();
    const auto f = cli(ws.with({"qa", "factual", "How many lakes were there in Bargen in 1916?"}));
    CHECK(f.code == 0);
    CHECK(f.out == "The answer is 2.\n");

    const auto fj = cli(ws.with({"--json", "qa", "factual", "How", "many", "lakes", "were", "there", "in", "Bargen", "in", "1916?"}));
    CHECK(fj.code == 0);
    CHECK(nlohmann::json::parse(fj.out)["attempts"] == 1);

    const auto failed = cli(ws.with({"qa", "factual", "Who drew the map?"}));
    CHECK(failed.code == 1);
    CHECK(failed.err.find("stage parse") != std::string::npos);

    const auto d = cli(ws.with({"--json", "qa", "descriptive", "--search", "What was Bargen like in 1916?"}));
    CHECK(d.code == 0);
    CHECK(nlohmann::json::parse(d.out)["contexts"] == nlohmann::json({"kg", "search"}));
}

TEST_CASE("bench generate, run and report") {
    const Workspace ws("bench");
    ws.build();
    const auto items = ws.dir / "bench.json";
    const auto gen = cli(ws.with({"bench", "generate", "--out", items.string(), "--seed", "5"}));
    REQUIRE(gen.code == 0);
    CHECK(eval::load_benchmark(items).size() == 100);
    // Same seed from stdout matches the file.
    const auto again = cli(ws.with({"bench", "generate", "--seed", "5"}));
    CHECK(nlohmann::json::parse(again.out) == nlohmann::json::parse(slurp(items)));

    const auto small = ws.dir / "small.json";
    REQUIRE(cli(ws.with({"bench", "generate", "--out", small.string(), "--yesno", "4", "--numeric", "4", "--overview", "1"})).code == 0);
    const auto log = ws.dir / "outcomes.jsonl";
    const auto report = ws.dir / "report.json";
    const auto run = cli(ws.with({"--gateway", "scripted", "bench", "run", "--items", small.string(), "--log", log.string(),
                                  "--report", report.string()}));
    REQUIRE(run.code == 0);
    CHECK(eval::read_log(log).size() == 9);
    CHECK(run.out.find("Factual QA (8 questions)") != std::string::npos);

    const auto rep = cli(ws.with({"bench", "report", "--log", log.string()}));
    CHECK(rep.code == 0);
    CHECK(rep.out == run.out);
    const auto rep_json = cli(ws.with({"--json", "bench", "report", "--log", log.string()}));
    CHECK(eval::EvalReport::from_json(nlohmann::json::parse(rep_json.out)) ==
          eval::EvalReport::from_json(nlohmann::json::parse(slurp(report))));

    CHECK(cli(ws.with({"bench", "report", "--log", (ws.dir / "none.jsonl").string()})).code == 1);
    CHECK(cli(ws.with({"bench", "run", "--items", "/nonexistent.json", "--log", log.string()})).code == 1);
}

TEST_CASE("bench run under a replay transcript is byte-identical") {
    const Workspace ws("replay", "replay");
    ws.build();
    const auto items = ws.dir / "bench.json";
    REQUIRE(cli(ws.with({"bench", "generate", "--out", items.string(), "--yesno", "6", "--numeric", "6", "--overview", "2"})).code == 0);

    // Record a transcript by running the scripted backend through a recorder.
    {
        auto cfg = service::AppConfig::load(ws.config);
        const auto store = service::load_store(cfg);
        const auto bundle = qa::build_prompt(store, store.schema(), cfg.fewshot);
        auto scripted = llm::ScriptedChatClient::from_file(*cfg.scripted_rules);
        llm::RecordingChatClient recorder(scripted, *cfg.transcript);
        const qa::Gateways gw{&recorder, &recorder, &recorder, nullptr};
        eval::run_benchmark(eval::load_benchmark(items), bundle, gw, &recorder, store);
    }

    auto run = [&](const std::string& tag) {
        const auto log = ws.dir / ("log_" + tag + ".jsonl");
        const auto report = ws.dir / ("report_" + tag + ".json");
        const auto r = cli(ws.with({"bench", "run", "--items", items.string(), "--log", log.string(), "--report", report.string()}));
        REQUIRE(r.code == 0);
        return std::make_pair(slurp(log), slurp(report));
    };
    const auto first = run("a");
    const auto second = run("b");
    CHECK(!first.first.empty());
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
}
