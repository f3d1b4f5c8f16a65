#include "chronomap/qa/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::qa {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool starts_with_ci(const std::string& s, std::string_view prefix) {
    return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(std::string(prefix));
}

std::string display_name(const std::string& stored) {
    std::string out = stored;
    bool start = true;
    for (auto& c : out) {
        if (start && std::isalpha(static_cast<unsigned char>(c))) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        start = c == ' ' || c == '-';
    }
    return out;
}

std::string cell_text(const std::optional<kg::Term>& t) {
    if (!t) return "";
    switch (t->kind()) {
        case kg::TermKind::iri: return kg::compact_iri(t->text());
        case kg::TermKind::geometry: return "<geometry>";
        case kg::TermKind::string: return t->text();
        default: return t->lexical();
    }
}

template <typename T>
std::vector<T> distinct_objects(const kg::Store& store, const std::string& predicate) {
    std::set<T> seen;
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(predicate), std::nullopt)) {
        if constexpr (std::is_same_v<T, std::string>) {
            if (t.object.kind() == kg::TermKind::string) seen.insert(t.object.text());
        } else {
            if (t.object.kind() == kg::TermKind::integer) seen.insert(t.object.as_integer());
        }
    }
    return {seen.begin(), seen.end()};
}

template <typename T>
std::string join(const std::vector<T>& items, std::string_view sep) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) os << sep;
        os << items[i];
    }
    return os.str();
}

constexpr std::string_view kValidatorSystem =
    "You check SPARQL queries generated for questions about a historical map knowledge graph.\n"
    "Reply with exactly one of:\n"
    "ACCEPT\n"
    "REVISE:\\n<corrected query>\n"
    "REJECT: <reason>\n";

constexpr std::string_view kAnswerSystem =
    "You answer a question about a historical map using the result of a SPARQL query.\n"
    "Reason over the result rows, rank them by relevance to the question and give a short answer.\n"
    "Start yes/no answers with Yes or No. State numbers with digits.\n";

constexpr std::string_view kDecomposeSystem =
    "Break the question into short factual sub-questions that a SPARQL query over the map knowledge graph can "
    "answer. Reply with one sub-question per line and nothing else.\n";

constexpr std::string_view kComposeSystem =
    "Write an answer to the descriptive question about a historical map. Ground statements in the facts "
    "provided; use the map image and search results when present.\n";

llm::ChatRequest request(std::string system, std::vector<llm::UserPart> parts, std::string tag) {
    llm::ChatRequest r;
    r.system = std::move(system);
    r.parts = std::move(parts);
    r.tag = std::move(tag);
    return r;
}

struct AttemptFailure {
    std::string stage;
    std::string reason;
};

std::optional<std::string> schema_problem(const query::Query& q, const kg::Schema& schema) {
    const auto violations = query::validate_against_schema(q, schema);
    if (violations.empty()) return std::nullopt;
    std::string msg = "predicates not in the schema:";
    for (const auto& v : violations) msg += " " + kg::compact_iri(v.iri);
    return msg;
}

ValidationVerdict parse_verdict(const std::string& reply) {
    const std::string t = trim(reply);
    if (starts_with_ci(t, "REVISE:")) return {VerdictKind::revised, extract_query(t.substr(7))};
    if (starts_with_ci(t, "REJECT:")) return {VerdictKind::rejected, trim(t.substr(7))};
    if (!starts_with_ci(t, "ACCEPT")) spdlog::warn("unrecognized validator reply treated as ACCEPT: {}", t.substr(0, 80));
    return {VerdictKind::accepted, ""};
}

}  // namespace

std::vector<FewShot> load_fewshot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw QaError("cannot open few-shot file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw QaError("bad few-shot file " + path.string() + ": " + e.what());
    }
    if (!j.is_array() || j.empty()) throw QaError("few-shot file " + path.string() + " has no examples");
    std::vector<FewShot> out;
    for (const auto& e : j) out.push_back({e.at("question").get<std::string>(), e.at("query").get<std::string>()});
    return out;
}

std::string PromptBundle::system_prompt() const {
    std::ostringstream os;
    os << "You translate questions about a historical topographic map into SPARQL over its knowledge graph.\n\n"
       << "## Analysis\n" << analysis_instructions << "\n## Schema\n" << schema_modules << "\n## Rules\n";
    for (std::size_t i = 0; i < constraints.size(); ++i) os << i + 1 << ". " << constraints[i] << '\n';
    os << "\n## Examples\n";
    for (const auto& f : fewshot) os << "Question: " << f.question << "\nQuery:\n" << f.query << "\n\n";
    return os.str();
}

std::string schema_catalog(const kg::Schema& schema) {
    std::ostringstream sm;
    sm << "Prefixes: cmf: <" << kg::kFeatureNs << ">, cmo: <" << kg::kOntologyNs << ">, cmr: <" << kg::kRelationNs
       << ">\n";
    for (const auto card : {kg::Cardinality::fixed, kg::Cardinality::optional}) {
        sm << (card == kg::Cardinality::fixed ? "Fixed properties:\n" : "Optional properties:\n");
        for (const auto& p : schema.properties()) {
            if (p.cardinality != card) continue;
            sm << "  " << kg::compact_iri(p.iri) << " (" << kg::to_string(p.range) << (p.multi ? ", several values" : "")
               << ")\n";
        }
    }
    sm << "Relations:\n";
    for (const auto& r : schema.relations()) {
        sm << "  " << kg::compact_iri(r.iri);
        if (r.inverse) sm << " (inverse " << kg::compact_iri(*r.inverse) << ")";
        sm << '\n';
    }
    return sm.str();
}

PromptBundle build_prompt(const kg::Store& store, const kg::Schema& schema, std::vector<FewShot> fewshot) {
    if (!store.sealed()) throw QaError("build_prompt needs a sealed store");
    if (fewshot.empty()) throw QaError("at least one few-shot example is required");
    PromptBundle b;
    b.municipalities = distinct_objects<std::string>(store, kg::cmo("municipality"));
    b.feature_types = distinct_objects<std::string>(store, kg::cmo("featureType"));
    b.years = distinct_objects<std::int64_t>(store, kg::cmo("year"));
    b.fewshot = std::move(fewshot);

    std::ostringstream ai;
    ai << "Identify the place name in the question and map it to one of these municipalities: "
       << join(b.municipalities, ", ") << ".\n"
       << "Identify the feature type from: " << join(b.feature_types, ", ") << ".\n"
       << "Identify the year from: " << join(b.years, ", ") << ".\n";
    b.analysis_instructions = ai.str();

    b.schema_modules = schema_catalog(schema);

    b.constraints = {
        "Use only the predicates listed in the schema.",
        "When the question names a year, bind it with cmo:year.",
        "Match a place with cmo:municipality using the lowercase name from the municipality list.",
        "Use ASK for yes/no questions and SELECT with an aggregate for quantities.",
        "Reply with the query only.",
    };
    return b;
}

PromptBundle build_prompt(const kg::Store& store, const kg::Schema& schema, const std::filesystem::path& fewshot_file) {
    return build_prompt(store, schema, load_fewshot(fewshot_file));
}

QaConfig QaConfig::from_json(const nlohmann::json& j) {
    QaConfig c;
    c.retry_max = j.value("retry_max", c.retry_max);
    c.parallel_width = j.value("parallel_width", c.parallel_width);
    c.facts_cap_chars = j.value("facts_cap_chars", c.facts_cap_chars);
    c.tiles_dir = j.value("tiles_dir", std::string());
    if (c.retry_max < 0) throw QaError("qa.retry_max must be >= 0");
    if (c.parallel_width < 1) throw QaError("qa.parallel_width must be >= 1");
    return c;
}

std::string extract_query(const std::string& reply) {
    std::string text = reply;
    if (const auto fence = text.find("```"); fence != std::string::npos) {
        const auto body = text.find('\n', fence);
        const auto close = body == std::string::npos ? std::string::npos : text.find("```", body);
        if (body != std::string::npos) text = text.substr(body + 1, close == std::string::npos ? std::string::npos : close - body - 1);
    }
    static const std::regex kw(R"(\b(PREFIX|SELECT|ASK)\b)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(text, m, kw)) text = text.substr(static_cast<std::size_t>(m.position(0)));
    return trim(text);
}

std::string solution_text(const query::QueryResult& r, std::size_t max_rows) {
    if (r.form == query::Form::ask) return r.boolean ? "Result: yes" : "Result: no";
    std::ostringstream os;
    os << "Result:\n" << join(r.table.vars, "\t") << '\n';
    if (r.table.rows.empty()) os << "(no rows)\n";
    const auto n = std::min(max_rows, r.table.rows.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = r.table.rows[i];
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "\t" : "") << cell_text(row[c]);
        os << '\n';
    }
    if (r.table.rows.size() > n) os << "(" << r.table.rows.size() - n << " more rows)\n";
    return trim(os.str());
}

std::string retry_feedback(int attempt, const std::string& stage, const std::string& error, const std::string& question) {
    return "Attempt " + std::to_string(attempt) + " failed at stage " + stage + ": " + error +
           "\nRegenerate the query for: " + question;
}

FactualResult answer_factual(const std::string& question, const PromptBundle& bundle, const Gateways& gw,
                             const kg::Store& store, const QaConfig& cfg) {
    if (!gw.generator || !gw.validator || !gw.composer) throw QaError("generator, validator and composer are required");
    const kg::Schema& schema = store.schema();
    FactualResult out;
    out.question = question;
    const std::string system = bundle.system_prompt();
    std::optional<AttemptFailure> last;

    for (int attempt = 1; attempt <= 1 + cfg.retry_max; ++attempt) {
        out.attempts = attempt;
        std::vector<llm::UserPart> parts{std::string("Question: " + question)};
        if (last) parts.emplace_back(retry_feedback(attempt - 1, last->stage, last->reason, question));
        auto fail = [&](std::string stage, std::string reason) { last = AttemptFailure{std::move(stage), std::move(reason)}; };

        std::string text;
        try {
            text = extract_query(gw.generator->complete(request(system, std::move(parts), "generate")).text);
        } catch (const llm::GatewayError& e) {
            fail("generate", e.what());
            continue;
        }
        out.query = text;
        query::Query q;
        try {
            q = query::parse(text);
        } catch (const query::QueryError& e) {
            fail("parse", e.what());
            continue;
        }
        if (const auto problem = schema_problem(q, schema)) {
            fail("schema", *problem);
            continue;
        }

        // Validation pass, with one re-validation of a revision.
        std::string current = text;
        ValidationVerdict verdict{VerdictKind::accepted, ""};
        for (int round = 0; round < 2; ++round) {
            ValidationVerdict v;
            try {
                v = parse_verdict(gw.validator->complete(request(std::string(kValidatorSystem) + bundle.schema_modules,
                                                                 {std::string("Question: " + question),
                                                                  std::string("Query:\n" + current)},
                                                                 "validate"))
                                      .text);
            } catch (const llm::GatewayError& e) {
                spdlog::warn("validator unavailable, keeping query: {}", e.what());
                break;
            }
            if (v.kind != VerdictKind::revised) {
                if (v.kind == VerdictKind::rejected) verdict = v;
                break;
            }
            try {
                const auto revised = query::parse(v.detail);
                if (schema_problem(revised, schema)) throw std::runtime_error("revision violates the schema");
                q = revised;
                current = v.detail;
                verdict = v;
            } catch (const std::exception& e) {
                spdlog::warn("ignoring invalid revision: {}", e.what());
                break;
            }
        }
        out.verdict = verdict;
        out.query = current;
        if (verdict.kind == VerdictKind::rejected) {
            fail("validate", verdict.detail);
            continue;
        }

        try {
            out.solution = query::evaluate(q, store);
        } catch (const std::exception& e) {
            fail("evaluate", e.what());
            continue;
        }

        try {
            out.answer = trim(gw.composer
                                  ->complete(request(std::string(kAnswerSystem),
                                                     {std::string("Question: " + question),
                                                      std::string("Query:\n" + current), solution_text(*out.solution)},
                                                     "answer"))
                                  .text);
        } catch (const llm::GatewayError& e) {
            out.failed_stage = "answer";
            out.failure_reason = e.what();
            return out;
        }
        if (out.answer.empty()) {
            out.failed_stage = "answer";
            out.failure_reason = "empty answer";
            return out;
        }
        out.delivered = true;
        return out;
    }
    out.failed_stage = last ? last->stage : "generate";
    out.failure_reason = last ? last->reason : "no attempts";
    out.solution.reset();
    return out;
}

nlohmann::json FactualResult::to_json(const kg::Store& store) const {
    nlohmann::json j{{"question", question},
                     {"query", query},
                     {"answer", answer},
                     {"status", delivered ? "delivered" : "failed"},
                     {"attempts", attempts}};
    if (verdict) {
        static constexpr const char* kinds[] = {"accepted", "revised", "rejected"};
        j["verdict"] = {{"kind", kinds[static_cast<int>(verdict->kind)]}, {"detail", verdict->detail}};
    } else {
        j["verdict"] = nullptr;
    }
    j["solution"] = solution ? query::to_sparql_json(*solution, store) : nlohmann::json(nullptr);
    if (!delivered) j["failure"] = {{"stage", failed_stage}, {"reason", failure_reason}};
    return j;
}

QuestionScope scope_of(const std::string& question, const PromptBundle& bundle) {
    QuestionScope s;
    const std::string q = lower(question);
    std::size_t best = 0;
    for (const auto& m : bundle.municipalities) {
        const std::regex re("\\b" + std::regex_replace(m, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") + "\\b");
        if (m.size() > best && std::regex_search(q, re)) {
            s.municipality = m;
            best = m.size();
        }
    }
    static const std::regex year_re(R"(\b(\d{4})\b)");
    std::optional<std::int64_t> first;
    for (auto it = std::sregex_iterator(q.begin(), q.end(), year_re); it != std::sregex_iterator(); ++it) {
        const std::int64_t y = std::stoll((*it)[1].str());
        if (!first) first = y;
        if (std::find(bundle.years.begin(), bundle.years.end(), y) != bundle.years.end()) {
            s.year = y;
            break;
        }
    }
    if (!s.year) s.year = first;
    return s;
}

std::vector<std::string> fallback_subquestions(const std::string& question, const PromptBundle& bundle,
                                               const kg::Store& store) {
    const auto scope = scope_of(question, bundle);
    const std::string place = scope.municipality ? " in " + display_name(*scope.municipality) : "";
    std::optional<std::int64_t> year = scope.year;
    if (!year && !bundle.years.empty()) year = bundle.years.back();
    const std::string when = year ? " in " + std::to_string(*year) : "";
    std::optional<std::int64_t> prev;
    for (const auto y : bundle.years) {
        if (year && y < *year) prev = y;
    }

    // A type is linear when any of its features carries a length.
    std::set<std::string> linear;
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(kg::cmo("lengthM")), std::nullopt)) {
        for (const auto& ft : store.match(t.subject, kg::Term::iri(kg::cmo("featureType")), std::nullopt)) {
            linear.insert(ft.object.text());
        }
    }

    std::vector<std::string> out;
    for (const auto& type : bundle.feature_types) {
        const bool is_linear = linear.count(type) > 0;
        out.push_back("How many " + type + " features were there" + place + when + "?");
        out.push_back("What was the total " + std::string(is_linear ? "length" : "area") + " of " + type +
                      " features" + place + when + "?");
        out.push_back("What was the largest " + type + " feature" + place + when + "?");
    }
    if (prev) {
        for (const auto& type : bundle.feature_types) {
            out.push_back("How many " + type + " features" + place + " changed between " + std::to_string(*prev) +
                          " and " + std::to_string(*year) + "?");
        }
    }
    return out;
}

std::vector<std::string> decompose(const std::string& question, const PromptBundle& bundle, llm::ChatClient& generator,
                                   const kg::Store& store) {
    std::vector<std::string> subs;
    try {
        const auto reply = generator.complete(
            request(std::string(kDecomposeSystem) + bundle.analysis_instructions, {question}, "decompose"));
        static const std::regex marker(R"(^\s*(?:[-*•]|\d+[.)])\s*)");
        std::istringstream in(reply.text);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(std::regex_replace(line, marker, ""));
            if (!line.empty()) subs.push_back(line);
        }
    } catch (const llm::GatewayError& e) {
        spdlog::warn("decomposition failed, using templates: {}", e.what());
    }
    if (subs.empty()) subs = fallback_subquestions(question, bundle, store);
    return subs;
}

std::string results_to_text(const std::vector<FactualResult>& results, std::size_t cap_chars) {
    std::vector<std::string> lines;
    for (const auto& r : results) {
        if (r.delivered) lines.push_back("- Q: " + r.question + " A: " + r.answer);
    }
    auto total = [&] {
        std::size_t n = 0;
        for (const auto& l : lines) n += l.size();
        return lines.empty() ? 0 : n + lines.size() - 1;
    };
    while (!lines.empty() && total() > cap_chars) lines.pop_back();
    return join(lines, "\n");
}

llm::ChatRequest composition_request(const std::string& question, const std::string& facts,
                                     const std::optional<llm::ImagePart>& tile,
                                     const std::vector<llm::SearchResult>& search) {
    std::vector<llm::UserPart> parts{std::string("Question: " + question + "\nFacts:\n" + facts)};
    if (tile) parts.emplace_back(*tile);
    if (!search.empty()) {
        std::string s = "Search results:";
        for (const auto& r : search) s += "\n- " + r.title + " (" + r.url + "): " + r.snippet;
        parts.emplace_back(std::move(s));
    }
    return request(std::string(kComposeSystem), std::move(parts), "compose");
}

DescriptiveResult answer_descriptive(const std::string& question, const DescriptiveOptions& options,
                                     const PromptBundle& bundle, const Gateways& gw, const kg::Store& store,
                                     const QaConfig& cfg) {
    if (!gw.generator || !gw.composer) throw QaError("generator and composer are required");
    DescriptiveResult out;
    out.question = question;
    auto warn = [&](std::string w) {
        spdlog::warn("{}", w);
        out.warnings.push_back(std::move(w));
    };

    out.sub_questions = decompose(question, bundle, *gw.generator, store);
    out.sub_results.resize(out.sub_questions.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < out.sub_questions.size(); i = next++) {
            out.sub_results[i] = answer_factual(out.sub_questions[i], bundle, gw, store, cfg);
        }
    };
    const auto width = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.parallel_width)), out.sub_questions.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < width; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    out.facts = results_to_text(out.sub_results, cfg.facts_cap_chars);
    if (out.facts.empty()) {
        warn("no sub-question was answered; composing without knowledge graph facts");
    } else {
        out.contexts.push_back("kg");
    }

    std::optional<llm::ImagePart> tile;
    if (options.use_map_image) {
        const auto scope = scope_of(question, bundle);
        if (!scope.municipality || !scope.year || cfg.tiles_dir.empty()) {
            warn("no map tile can be resolved for this question");
        } else {
            const auto path = cfg.tiles_dir / (*scope.municipality + "_" + std::to_string(*scope.year) + ".png");
            std::ifstream in(path, std::ios::binary);
            if (!in) {
                warn("missing map tile " + path.string());
            } else {
                std::ostringstream bytes;
                bytes << in.rdbuf();
                tile = llm::ImagePart{"image/png", bytes.str()};
                out.contexts.push_back("map-image");
            }
        }
    }

    std::vector<llm::SearchResult> hits;
    if (options.use_search) {
        if (!gw.search) {
            warn("search requested but no search backend is configured");
        } else {
            hits = gw.search->search(question, 3);
            if (hits.empty()) {
                warn("search returned no results");
            } else {
                out.contexts.push_back("search");
            }
        }
    }

    try {
        out.answer = trim(gw.composer->complete(composition_request(question, out.facts, tile, hits)).text);
    } catch (const llm::GatewayError& e) {
        out.failed_stage = "compose";
        out.failure_reason = e.what();
        return out;
    }
    if (out.answer.empty()) {
        out.failed_stage = "compose";
        out.failure_reason = "empty answer";
        return out;
    }
    out.delivered = true;
    return out;
}

nlohmann::json DescriptiveResult::to_json(const kg::Store& store) const {
    auto subs = nlohmann::json::array();
    for (const auto& r : sub_results) subs.push_back(r.to_json(store));
    nlohmann::json j{{"question", question},
                     {"sub_questions", sub_questions},
                     {"sub_results", subs},
                     {"facts", facts},
                     {"contexts", contexts},
                     {"answer", answer},
                     {"status", delivered ? "delivered" : "failed"},
                     {"warnings", warnings}};
    if (!delivered) j["failure"] = {{"stage", failed_stage}, {"reason", failure_reason}};
    return j;
}

}  // namespace chronomap::qa
