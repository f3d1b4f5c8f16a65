#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <mutex>

#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/qa/pipeline.hpp"
#include "support/seeland.hpp"

using namespace chronomap;
using namespace chronomap::testing;

namespace {

const kg::Store& store() {
    static const kg::Store s = seeland_store();
    return s;
}

const qa::PromptBundle& bundle() {
    static const qa::PromptBundle b = qa::build_prompt(store(), store().schema(), std::filesystem::path(kFewshot));
    return b;
}

const QaPair kLakes{"How many lakes were there in Bargen in 1916?",
                    R"(SELECT (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType "lake" ; cmo:municipality "bargen" ; cmo:year 1916 })"};

// Records every request before delegating.
class Capture final : public llm::ChatClient {
public:
    explicit Capture(llm::ChatClient& inner) : inner_(inner) {}
    llm::ChatResponse complete(const llm::ChatRequest& req) override {
        {
            std::lock_guard lock(mu_);
            seen.push_back(req);
        }
        return inner_.complete(req);
    }
    std::vector<llm::ChatRequest> seen;

private:
    llm::ChatClient& inner_;
    std::mutex mu_;
};

qa::Gateways gateways(llm::ChatClient& c, llm::SearchClient* search = nullptr) { return {&c, &c, &c, search}; }

}  // namespace

TEST_CASE("build_prompt derives choice lists from the store") {
    const auto small = seeland_store({1877, 1901});
    const auto b = qa::build_prompt(small, small.schema(), std::filesystem::path(kFewshot));
    CHECK(b.years == std::vector<std::int64_t>{1877, 1901});
    CHECK(b.municipalities == std::vector<std::string>{"aarberg", "bargen"});
    CHECK(b.feature_types == std::vector<std::string>{"forest", "lake", "stream", "wetland"});
    CHECK(b.fewshot.size() == 3);
    CHECK(b.system_prompt().find("1877, 1901") != std::string::npos);
    CHECK(b.schema_modules.find("cmo:featureType (string)") != std::string::npos);
    CHECK(b.schema_modules.find("cmr:northOf (inverse cmr:southOf)") != std::string::npos);
    CHECK(b.constraints.size() >= 3);

    const auto again = qa::build_prompt(small, small.schema(), std::filesystem::path(kFewshot));
    CHECK(again.system_prompt() == b.system_prompt());

    CHECK_THROWS_AS(qa::build_prompt(small, small.schema(), std::filesystem::path("/nonexistent/fewshot.json")), qa::QaError);
    const auto empty = std::filesystem::temp_directory_path() / "chronomap_empty_fewshot.json";
    std::ofstream(empty) << "[]";
    CHECK_THROWS_AS(qa::build_prompt(small, small.schema(), empty), qa::QaError);
    std::filesystem::remove(empty);
    kg::Store unsealed;
    CHECK_THROWS_AS(qa::build_prompt(unsealed, unsealed.schema(), qa::load_fewshot(kFewshot)), qa::QaError);
}

TEST_CASE("factual question answered through all stages") {
    llm::ScriptedChatClient gw(concat(generic_rules(), generator_rules({kLakes})));
    const auto r = qa::answer_factual(kLakes.question, bundle(), gateways(gw), store());
    CHECK(r.delivered);
    CHECK(r.attempts == 1);
    CHECK(r.answer.find('2') != std::string::npos);
    REQUIRE(r.verdict);
    CHECK(r.verdict->kind == qa::VerdictKind::accepted);
    REQUIRE(r.solution);
    CHECK(r.solution->table.rows[0][0] == kg::Term::integer(2));
    const auto j = r.to_json(store());
    CHECK(j["status"] == "delivered");
    CHECK(j["solution"]["results"]["bindings"][0]["n"]["value"] == "2");
}

TEST_CASE("retries: garbage twice then valid") {
    llm::ScriptedChatClient gw(concat(generic_rules(), sabotage_rules({kLakes})));
    Capture cap(gw);
    const auto r = qa::answer_factual(kLakes.question, bundle(), gateways(cap), store());
    CHECK(r.delivered);
    CHECK(r.attempts == 3);
    // the second and third generator calls carry the failure feedback
    std::vector<std::string> gen;
    for (const auto& req : cap.seen) {
        if (req.tag == "generate") gen.push_back(req.last_text());
    }
    REQUIRE(gen.size() == 3);
    CHECK(gen[0] == "Question: " + kLakes.question);
    CHECK(gen[1].rfind("Attempt 1 failed at stage parse: ", 0) == 0);
    CHECK(gen[2].rfind("Attempt 2 failed at stage parse: ", 0) == 0);
}

TEST_CASE("retries: always garbage fails at parse") {
    llm::ScriptedChatClient gw(concat(generic_rules(), {{".*", "this is not a query", "generate"}}));
    const auto r = qa::answer_factual(kLakes.question, bundle(), gateways(gw), store());
    CHECK_FALSE(r.delivered);
    CHECK(r.failed_stage == "parse");
    CHECK(r.attempts == 3);
    CHECK_FALSE(r.solution);
    CHECK(r.to_json(store())["failure"]["stage"] == "parse");
}

TEST_CASE("retry budget is configurable") {
    llm::ScriptedChatClient gw(concat(generic_rules(), {{".*", "nope", "generate"}}));
    qa::QaConfig cfg;
    cfg.retry_max = 0;
    CHECK(qa::answer_factual(kLakes.question, bundle(), gateways(gw), store(), cfg).attempts == 1);
}

TEST_CASE("schema violations and gateway failures") {
    llm::ScriptedChatClient bad_schema(
        concat(generic_rules(), {{".*", "SELECT ?f WHERE { ?f cmo:population ?p }", "generate"}}));
    const auto r = qa::answer_factual(kLakes.question, bundle(), gateways(bad_schema), store());
    CHECK_FALSE(r.delivered);
    CHECK(r.failed_stage == "schema");
    CHECK(r.failure_reason.find("cmo:population") != std::string::npos);

    llm::ScriptedChatClient no_generator(generic_rules());
    const auto g = qa::answer_factual(kLakes.question, bundle(), gateways(no_generator), store());
    CHECK(g.failed_stage == "generate");
    CHECK(g.attempts == 3);

    llm::ScriptedChatClient no_answer(concat({{".*", "ACCEPT", "validate"}}, generator_rules({kLakes})));
    const auto a = qa::answer_factual(kLakes.question, bundle(), gateways(no_answer), store());
    CHECK_FALSE(a.delivered);
    CHECK(a.failed_stage == "answer");
    CHECK(a.attempts == 1);
}

TEST_CASE("validator revisions and rejections") {
    const std::string pond = R"(SELECT (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType "pond" ; cmo:year 1916 })";
    llm::ScriptedChatClient reviser(concat(
        {{"featureType \"pond\"", "REVISE:\n" + kLakes.query, "validate"}},
        concat(generic_rules(), {{".*", pond, "generate"}})));
    Capture cap(reviser);
    const auto r = qa::answer_factual(kLakes.question, bundle(), gateways(cap), store());
    CHECK(r.delivered);
    REQUIRE(r.verdict);
    CHECK(r.verdict->kind == qa::VerdictKind::revised);
    CHECK(r.query == kLakes.query);
    int validations = 0;
    for (const auto& req : cap.seen) validations += req.tag == "validate";
    CHECK(validations == 2);

    // A revision that does not parse is ignored.
    llm::ScriptedChatClient broken(concat({{"featureType \"lake\"", "REVISE:\nSELECT {", "validate"}},
                                          concat(generic_rules(), generator_rules({kLakes}))));
    const auto b = qa::answer_factual(kLakes.question, bundle(), gateways(broken), store());
    CHECK(b.delivered);
    CHECK(b.query == kLakes.query);

    llm::ScriptedChatClient rejecter(concat({{".*", "REJECT: ignores the municipality", "validate"}},
                                            concat(generic_rules(), generator_rules({kLakes}))));
    const auto x = qa::answer_factual(kLakes.question, bundle(), gateways(rejecter), store());
    CHECK_FALSE(x.delivered);
    CHECK(x.failed_stage == "validate");
    CHECK(x.failure_reason == "ignores the municipality");
    CHECK(x.attempts == 3);
}

TEST_CASE("extract_query strips fences and chatter") {
    CHECK(qa::extract_query("```sparql\nASK { ?s ?p ?o }\n```") == "ASK { ?s ?p ?o }");
    CHECK(qa::extract_query("Here you go: SELECT ?f WHERE { ?f ?p ?o }") == "SELECT ?f WHERE { ?f ?p ?o }");
    CHECK(qa::extract_query("  garbage  ") == "garbage");
}

TEST_CASE("decompose uses the scripted list or falls back") {
    const std::string q = "Please provide an overview about Aarberg in 1901.";
    llm::ScriptedChatClient dec({{"overview about Aarberg", "1. How many forests were there in Aarberg in 1901?\n"
                                                             "2. Were there wetlands in Aarberg in 1901?\n\n",
                                  "decompose"}});
    CHECK(qa::decompose(q, bundle(), dec, store()) ==
          std::vector<std::string>{"How many forests were there in Aarberg in 1901?", "Were there wetlands in Aarberg in 1901?"});

    llm::ScriptedChatClient none({});
    const auto fb = qa::decompose(q, bundle(), none, store());
    CHECK_FALSE(fb.empty());
    CHECK(fb == qa::fallback_subquestions(q, bundle(), store()));
    CHECK(fb[0] == "How many forest features were there in Aarberg in 1901?");
    CHECK(std::find(fb.begin(), fb.end(), "What was the total length of stream features in Aarberg in 1901?") != fb.end());
    CHECK(std::find(fb.begin(), fb.end(), "How many wetland features in Aarberg changed between 1877 and 1901?") != fb.end());

    // Two feature types and a previous year: 2 x 3 templates + 2 change questions.
    kg::Store two;
    int seq = 0;
    for (const char* type : {"lake", "forest"}) {
        for (const int year : {1877, 1901}) {
            const auto f = kg::Term::iri(kg::feature_iri("t", year, type, static_cast<std::size_t>(seq++)));
            two.insert(f, kg::Term::iri(kg::cmo("featureType")), kg::Term::string(type));
            two.insert(f, kg::Term::iri(kg::cmo("year")), kg::Term::integer(year));
        }
    }
    two.seal();
    const auto tb = qa::build_prompt(two, two.schema(), qa::load_fewshot(kFewshot));
    CHECK(qa::fallback_subquestions("Overview of the area in 1901", tb, two).size() == 2 * 3 + 2);
    CHECK(qa::fallback_subquestions("Overview of the area in 1877", tb, two).size() == 2 * 3);
}

TEST_CASE("scope_of finds municipality and year") {
    const auto s = qa::scope_of("What was Aarberg like in 1901?", bundle());
    CHECK(s.municipality == "aarberg");
    CHECK(s.year == 1901);
    const auto none = qa::scope_of("Tell me about rivers", bundle());
    CHECK_FALSE(none.municipality);
    CHECK_FALSE(none.year);
}

TEST_CASE("results_to_text") {
    std::vector<qa::FactualResult> rs(3);
    rs[0].question = "Q1?";
    rs[0].answer = "A1.";
    rs[0].delivered = true;
    rs[1].question = "Q2?";
    rs[1].failed_stage = "parse";
    rs[2].question = "Q3?";
    rs[2].answer = "A3.";
    rs[2].delivered = true;
    const auto text = qa::results_to_text(rs, 6000);
    CHECK(text == "- Q: Q1? A: A1.\n- Q: Q3? A: A3.");
    CHECK(qa::results_to_text({}, 6000).empty());
    const auto capped = qa::results_to_text(rs, 20);
    CHECK(capped == "- Q: Q1? A: A1.");
    CHECK(capped.size() <= 20);
    CHECK(qa::results_to_text(rs, 3).empty());
}

namespace {

const std::vector<QaPair> kOverviewPairs{
    {"How many forests were there in Aarberg in 1901?",
     R"(SELECT (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType "forest" ; cmo:municipality "aarberg" ; cmo:year 1901 })"},
    {"Were there wetlands in Aarberg in 1901?",
     R"(ASK { ?f cmo:featureType "wetland" ; cmo:municipality "aarberg" ; cmo:year 1901 })"},
};

std::vector<llm::ScriptedChatClient::Rule> overview_rules() {
    auto rules = concat(generic_rules(), generator_rules(kOverviewPairs));
    rules.push_back({"overview about Aarberg",
                     "- How many forests were there in Aarberg in 1901?\n- Were there wetlands in Aarberg in 1901?",
                     "decompose"});
    rules.push_back({".*", "Aarberg in 1901 was largely forested.", "compose"});
    return rules;
}

}  // namespace

TEST_CASE("descriptive: knowledge graph only") {
    llm::ScriptedChatClient gw(overview_rules());
    Capture cap(gw);
    const auto r = qa::answer_descriptive("Please provide an overview about Aarberg in 1901.", {}, bundle(), gateways(cap), store());
    CHECK(r.delivered);
    CHECK(r.answer == "Aarberg in 1901 was largely forested.");
    CHECK(r.contexts == std::vector<std::string>{"kg"});
    CHECK(r.facts ==
          "- Q: How many forests were there in Aarberg in 1901? A: The answer is 18.\n"
          "- Q: Were there wetlands in Aarberg in 1901? A: yes.");
    const auto& compose = cap.seen.back();
    CHECK(compose.tag == "compose");
    CHECK(compose.parts.size() == 1);
}

TEST_CASE("descriptive: search and map contexts") {
    llm::ScriptedChatClient gw(overview_rules());
    auto search = llm::FixtureSearchClient::from_file(std::string(CHRONOMAP_FIXTURES) + "/llm/search.json");
    Capture cap(gw);
    const auto tiles = std::filesystem::temp_directory_path() / "chronomap_tiles";
    std::filesystem::create_directories(tiles);
    std::ofstream(tiles / "aarberg_1901.png", std::ios::binary) << std::string("\x89PNG\r\n\x1a\n", 8);
    qa::QaConfig cfg;
    cfg.tiles_dir = tiles;

    const auto r = qa::answer_descriptive("Please provide an overview about Aarberg in 1901.", {true, true}, bundle(),
                                          gateways(cap, &search), store(), cfg);
    CHECK(r.delivered);
    CHECK(r.contexts == std::vector<std::string>{"kg", "map-image", "search"});
    const auto& compose = cap.seen.back();
    REQUIRE(compose.parts.size() == 3);
    CHECK(std::holds_alternative<llm::ImagePart>(compose.parts[1]));
    CHECK(compose.last_text().find("Aarberg is a municipality in the Seeland district.") != std::string::npos);

    // Missing tile: context dropped with a warning.
    const auto m = qa::answer_descriptive("Please provide an overview about Aarberg in 1877.", {true, false}, bundle(),
                                          gateways(gw), store(), cfg);
    CHECK(m.delivered);
    CHECK(std::find(m.contexts.begin(), m.contexts.end(), "map-image") == m.contexts.end());
    CHECK_FALSE(m.warnings.empty());
    std::filesystem::remove_all(tiles);
}

TEST_CASE("descriptive: composition runs even when every sub-question fails") {
    llm::ScriptedChatClient gw({{".*", "garbage", "generate"},
                                {".*", "One.\nTwo.", "decompose"},
                                {".*", "A description from context alone.", "compose"}});
    const auto r = qa::answer_descriptive("Overview of Aarberg in 1901", {}, bundle(), gateways(gw), store());
    CHECK(r.delivered);
    CHECK(r.facts.empty());
    CHECK(r.contexts.empty());
    CHECK(r.sub_results.size() == 2);
    CHECK_FALSE(r.warnings.empty());

    llm::ScriptedChatClient no_compose({{".*", "garbage", "generate"}});
    const auto f = qa::answer_descriptive("Overview of Aarberg in 1901", {}, bundle(), gateways(no_compose), store());
    CHECK_FALSE(f.delivered);
    CHECK(f.failed_stage == "compose");
}

TEST_CASE("property: descriptive output is independent of parallel width") {
    llm::ScriptedChatClient gw(concat(generic_rules(), {{".*", "SELECT (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType \"forest\" }", "generate"},
                                                        {".*", "composed", "compose"}}));
    const std::string q = "Please provide an overview about Aarberg in 1901.";
    std::string reference;
    for (const int width : {1, 2, 4, 8}) {
        qa::QaConfig cfg;
        cfg.parallel_width = width;
        const auto size_before = store().size();
        const auto dump = qa::answer_descriptive(q, {}, bundle(), gateways(gw), store(), cfg).to_json(store()).dump();
        CHECK(store().size() == size_before);
        if (reference.empty()) reference = dump;
        CHECK(dump == reference);
    }
}
