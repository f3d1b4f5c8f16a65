#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "chronomap/eval/evalkit.hpp"
#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::eval {

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

std::string first_word(const std::string& text) {
    std::string w;
    for (const char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!w.empty() || !std::isspace(static_cast<unsigned char>(c))) {
            break;
        }
    }
    return w;
}

bool contains(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

llm::ChatRequest request(std::string system, std::vector<llm::UserPart> parts, std::string tag) {
    llm::ChatRequest r;
    r.system = std::move(system);
    r.parts = std::move(parts);
    r.tag = std::move(tag);
    return r;
}

void collect_predicates(const query::GroupPattern& g, std::set<std::string>& out) {
    for (const auto& el : g.elements) {
        if (const auto* t = std::get_if<query::TriplePattern>(&el)) {
            if (const auto* term = std::get_if<kg::Term>(&t->predicate); term && term->is_iri()) out.insert(term->text());
        } else if (const auto* o = std::get_if<query::OptionalPattern>(&el)) {
            collect_predicates(*o->group, out);
        }
    }
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> mean(double sum, std::size_t n) {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

nlohmann::json opt_json(const std::optional<bool>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<bool> opt_bool(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<bool>();
}

std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

bool is_factual(const OutcomeRecord& r) { return r.kind != AnswerKind::open; }

constexpr std::string_view kJudgeSystem =
    "You review SPARQL queries written for questions about a historical map knowledge graph. Decide whether the "
    "query answers the question as asked, including place and year constraints. Reply 'correct' or 'incorrect' "
    "followed by a short rationale.";

constexpr std::string_view kExtractSystem =
    "Find the statements in the answer that concern map features, their properties or their relations. For each, "
    "write one yes/no question that checks it. Reply with a JSON array of objects {\"statement\", \"question\"}.";

}  // namespace

AnswerNormalization AnswerNormalization::from_json(const nlohmann::json& j) {
    AnswerNormalization n;
    if (j.contains("affirmative")) n.affirmative = j["affirmative"].get<std::vector<std::string>>();
    if (j.contains("negative")) n.negative = j["negative"].get<std::vector<std::string>>();
    return n;
}

std::vector<double> extract_numbers(const std::string& text) {
    static const std::regex num(R"((^|[^\w.])(-?\d{1,3}(?:[,']\d{3})+(?:\.\d+)?|-?\d+(?:\.\d+)?))");
    std::vector<double> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), num); it != std::sregex_iterator(); ++it) {
        std::string digits = (*it)[2].str();
        digits.erase(std::remove_if(digits.begin(), digits.end(), [](char c) { return c == ',' || c == '\''; }), digits.end());
        out.push_back(std::stod(digits));
    }
    return out;
}

AccuracyVerdict answer_accuracy(const std::string& answer, const std::string& gold, AnswerKind kind,
                                const AnswerNormalization& norm) {
    if (kind == AnswerKind::yesno) {
        const auto w = first_word(answer);
        std::optional<bool> said;
        if (contains(norm.affirmative, w)) said = true;
        if (contains(norm.negative, w)) said = false;
        if (!said) return {false, "unextractable"};
        const bool want = lower(trim(gold)) == "yes";
        return {*said == want, *said == want ? "" : "mismatch"};
    }
    if (kind == AnswerKind::numeric) {
        const auto got = extract_numbers(answer);
        const auto want = extract_numbers(gold);
        if (got.empty()) return {false, "unextractable"};
        if (want.empty()) return {false, "mismatch"};
        auto same = [](double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b)); };
        if (want.size() == 1) return {same(got.front(), want.front()), same(got.front(), want.front()) ? "" : "mismatch"};
        // Several gold values (a list of years): the sets must agree.
        std::set<double> g(got.begin(), got.end());
        std::set<double> w(want.begin(), want.end());
        return {g == w, g == w ? "" : "mismatch"};
    }
    return {false, "unextractable"};
}

namespace {

// Whole-word occurrence without regex, so names need no escaping.
bool contains_word(const std::string& text, const std::string& word) {
    if (word.empty()) return false;
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    for (auto pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
        const bool left = pos == 0 || !is_word(text[pos - 1]);
        const std::size_t end = pos + word.size();
        if (left && (end == text.size() || !is_word(text[end]))) return true;
    }
    return false;
}

}  // namespace

SparqlCheck sparql_semantic_check(const std::string& question, const std::string& query_text, const kg::Schema& schema,
                                  const std::vector<std::string>& municipalities, llm::ChatClient* judge) {
    query::Query q;
    try {
        q = query::parse(query_text);
    } catch (const query::QueryError& e) {
        return {false, std::string("query does not parse: ") + e.what()};
    }
    if (!query::validate_against_schema(q, schema).empty()) return {false, "query uses predicates outside the schema"};
    std::set<std::string> preds;
    collect_predicates(q.where, preds);
    static const std::regex year_re(R"(\b(1\d{3}|20\d{2})\b)");
    if (std::regex_search(question, year_re) && !preds.count(kg::cmo("year"))) {
        return {false, "question names a year but the query does not constrain cmo:year"};
    }
    const std::string lq = lower(question);
    for (const auto& m : municipalities) {
        if (contains_word(lq, lower(m)) && !preds.count(kg::cmo("municipality"))) {
            return {false, "question names a municipality but the query does not constrain cmo:municipality"};
        }
    }
    if (!judge) return {true, "structural checks passed"};
    try {
        const auto reply = judge->complete(request(std::string(kJudgeSystem),
                                                   {std::string("Question: " + question), std::string("Query:\n" + query_text),
                                                    std::string("Schema:\n" + qa::schema_catalog(schema))},
                                                   "sparql_judge"))
                               .text;
        const auto w = first_word(reply);
        if (w == "correct" || w == "yes" || w == "true" || w == "valid") return {true, trim(reply)};
        if (w == "incorrect" || w == "wrong" || w == "no" || w == "false" || w == "invalid") return {false, trim(reply)};
        return {std::nullopt, "unparseable judge reply: " + trim(reply).substr(0, 200)};
    } catch (const llm::GatewayError& e) {
        return {std::nullopt, std::string("judge failed: ") + e.what()};
    }
}

std::optional<double> FactReport::accuracy_auto() const {
    std::size_t yes = 0;
    std::size_t no = 0;
    for (const auto& f : facts) {
        yes += f.verdict == "yes";
        no += f.verdict == "no";
    }
    return ratio(yes, yes + no);
}

std::optional<double> FactReport::accuracy_manual() const {
    if (std::none_of(facts.begin(), facts.end(), [](const auto& f) { return f.manual_override.has_value(); })) return std::nullopt;
    std::size_t yes = 0;
    std::size_t judged = 0;
    for (const auto& f : facts) {
        std::optional<bool> v = f.manual_override;
        if (!v && f.verdict != "error") v = f.verdict == "yes";
        if (!v) continue;
        ++judged;
        yes += *v;
    }
    return ratio(yes, judged);
}

nlohmann::json FactReport::to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& f : facts) {
        arr.push_back({{"statement", f.statement},
                       {"question", f.question},
                       {"answer", f.answer},
                       {"verdict", f.verdict},
                       {"manual_override", opt_json(f.manual_override)}});
    }
    return {{"answer", answer},
            {"facts", arr},
            {"extraction_error", extraction_error},
            {"fact_accuracy_auto", opt_json(accuracy_auto())},
            {"fact_accuracy_manual", opt_json(accuracy_manual())}};
}

FactReport FactReport::from_json(const nlohmann::json& j) {
    FactReport r;
    r.answer = j.value("answer", std::string());
    r.extraction_error = j.value("extraction_error", false);
    for (const auto& f : j.at("facts")) {
        r.facts.push_back({f.value("statement", std::string()), f.value("question", std::string()),
                           f.value("answer", std::string()), f.value("verdict", std::string("error")),
                           opt_bool(f, "manual_override")});
    }
    return r;
}

FactReport fact_check(const std::string& answer, llm::ChatClient& extractor, const FactualFn& factual) {
    FactReport report;
    report.answer = answer;
    std::string reply;
    try {
        reply = extractor.complete(request(std::string(kExtractSystem), {answer}, "extract_facts")).text;
    } catch (const llm::GatewayError& e) {
        spdlog::warn("fact extraction failed: {}", e.what());
        report.extraction_error = true;
        return report;
    }
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    bool parsed = false;
    if (open != std::string::npos && close != std::string::npos && close > open) {
        try {
            const auto arr = nlohmann::json::parse(reply.substr(open, close - open + 1));
            for (const auto& e : arr) {
                ExtractedFact f;
                if (e.is_string()) {
                    f.question = f.statement = e.get<std::string>();
                } else {
                    f.question = e.at("question").get<std::string>();
                    f.statement = e.value("statement", f.question);
                }
                report.facts.push_back(std::move(f));
            }
            parsed = true;
        } catch (const nlohmann::json::exception&) {
            report.facts.clear();
        }
    }
    if (!parsed) {
        static const std::regex marker(R"(^\s*(?:[-*]|\d+[.)])\s*)");
        std::istringstream in(reply);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(std::regex_replace(line, marker, ""));
            if (!line.empty() && line.back() == '?') report.facts.push_back({line, line, "", "", std::nullopt});
        }
    }
    for (auto& f : report.facts) {
        const auto r = factual(f.question);
        f.answer = r.answer;
        if (!r.delivered) {
            f.verdict = "error";
        } else {
            f.verdict = answer_accuracy(r.answer, "yes", AnswerKind::yesno).correct ? "yes" : "no";
        }
    }
    return report;
}

std::optional<double> parse_score(const std::string& reply) {
    const std::string t = trim(reply);
    static const std::regex num(R"(^[+-]?(\d+(\.\d*)?|\.\d+)$)");
    if (!std::regex_match(t, num)) return std::nullopt;
    return std::clamp(std::stod(t), 0.0, 1.0);
}

QualityScores content_quality(const std::string& question, const std::string& answer, llm::ChatClient& judge) {
    auto score = [&](const char* tag, const char* rubric) -> std::optional<double> {
        try {
            const auto reply = judge.complete(request(std::string(rubric) + " Reply with a single number between 0 and 1.",
                                                      {std::string("Question: " + question), std::string("Answer: " + answer)},
                                                      tag));
            const auto s = parse_score(reply.text);
            if (!s) spdlog::warn("unparseable {} score: {}", tag, reply.text.substr(0, 80));
            return s;
        } catch (const llm::GatewayError& e) {
            spdlog::warn("{} judge failed: {}", tag, e.what());
            return std::nullopt;
        }
    };
    QualityScores q;
    q.relevance = score("relevance", "Rate whether the answer addresses the geospatial question.");
    q.fluency = score("fluency", "Rate the naturalness, fluency and readability of the answer.");
    q.informativeness = score("informativeness", "Rate whether the answer gives informative content relevant to the question.");
    return q;
}

nlohmann::json OutcomeRecord::to_json() const {
    nlohmann::json j{{"id", id},
                     {"question", question},
                     {"category", to_string(category)},
                     {"answer_kind", to_string(kind)},
                     {"delivered", delivered},
                     {"answer", answer},
                     {"generated_query", generated_query},
                     {"attempts", attempts},
                     {"failed_stage", failed_stage},
                     {"correct", opt_json(correct)},
                     {"correct_reason", correct_reason},
                     {"sparql_ok_auto", opt_json(sparql_auto)},
                     {"sparql_auto_error", sparql_auto_error},
                     {"sparql_rationale", sparql_rationale},
                     {"sparql_ok_manual", opt_json(sparql_manual)}};
    if (kind == AnswerKind::open) {
        j["factual_questions"] = factual_questions;
        j["facts"] = facts ? facts->to_json() : nlohmann::json(nullptr);
        j["quality"] = {{"relevance", opt_json(quality.relevance)},
                        {"fluency", opt_json(quality.fluency)},
                        {"informativeness", opt_json(quality.informativeness)}};
    }
    return j;
}

OutcomeRecord OutcomeRecord::from_json(const nlohmann::json& j) {
    OutcomeRecord r;
    r.id = j.value("id", std::string());
    r.question = j.at("question").get<std::string>();
    r.category = category_from(j.at("category").get<std::string>());
    r.kind = kind_from(j.at("answer_kind").get<std::string>());
    r.delivered = j.at("delivered").get<bool>();
    r.answer = j.value("answer", std::string());
    r.generated_query = j.value("generated_query", std::string());
    r.attempts = j.value("attempts", 0);
    r.failed_stage = j.value("failed_stage", std::string());
    r.correct = opt_bool(j, "correct");
    if (!r.delivered) r.correct.reset();
    r.correct_reason = j.value("correct_reason", std::string());
    r.sparql_auto = opt_bool(j, "sparql_ok_auto");
    r.sparql_auto_error = j.value("sparql_auto_error", false);
    r.sparql_rationale = j.value("sparql_rationale", std::string());
    r.sparql_manual = opt_bool(j, "sparql_ok_manual");
    r.factual_questions = j.value("factual_questions", std::size_t{0});
    if (j.contains("facts") && !j["facts"].is_null()) r.facts = FactReport::from_json(j["facts"]);
    if (j.contains("quality")) {
        r.quality = {opt_double(j["quality"], "relevance"), opt_double(j["quality"], "fluency"),
                     opt_double(j["quality"], "informativeness")};
    }
    return r;
}

void write_log(const OutcomeLog& log, std::ostream& out) {
    for (const auto& r : log) out << r.to_json().dump() << '\n';
}

void write_log(const OutcomeLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write outcome log " + path.string());
    write_log(log, out);
}

OutcomeLog read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open outcome log " + path.string());
    OutcomeLog log;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            log.push_back(OutcomeRecord::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return log;
}

double delivery_rate(const OutcomeLog& log) {
    const auto r = summarize(log).delivery_rate();
    if (!r) throw std::invalid_argument("delivery rate of an empty log");
    return *r;
}

double accuracy(const OutcomeLog& log) {
    const auto r = summarize(log).accuracy();
    if (!r) throw std::invalid_argument("accuracy of an empty log");
    return *r;
}

std::string fmt2(std::optional<double> v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", std::round(*v * 100.0) / 100.0);
    return buf;
}

std::optional<double> EvalReport::delivery_rate() const { return ratio(delivered, factual_items); }
std::optional<double> EvalReport::accuracy() const { return ratio(correct, factual_items); }
std::optional<double> EvalReport::sparql_accuracy_auto() const { return ratio(sparql_auto_true, sparql_auto_judged); }
std::optional<double> EvalReport::sparql_accuracy_manual() const { return ratio(sparql_manual_true, sparql_manual_judged); }
std::optional<double> EvalReport::fact_accuracy_auto() const { return ratio(fact_yes, fact_yes + fact_no); }
std::optional<double> EvalReport::fact_accuracy_manual() const { return ratio(fact_manual_yes, fact_manual_judged); }
std::optional<double> EvalReport::mean_factual_questions() const {
    return mean(static_cast<double>(factual_questions), descriptive_items);
}
std::optional<double> EvalReport::relevance() const { return mean(relevance_sum, relevance_n); }
std::optional<double> EvalReport::fluency() const { return mean(fluency_sum, fluency_n); }
std::optional<double> EvalReport::informativeness() const { return mean(informativeness_sum, informativeness_n); }

std::string EvalReport::factual_row() const {
    return fmt2(delivery_rate()) + " / " + fmt2(accuracy()) + " / " + fmt2(sparql_accuracy_auto()) + " / " +
           fmt2(sparql_accuracy_manual());
}

std::string EvalReport::descriptive_row() const {
    std::string questions = "n/a";
    if (const auto m = mean_factual_questions()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", std::round(*m * 10.0) / 10.0);
        questions = buf;
    }
    return fmt2(fact_accuracy_auto()) + " / " + fmt2(fact_accuracy_manual()) + " / " + questions + " / n/a / " +
           fmt2(relevance()) + " / " + fmt2(fluency()) + " / " + fmt2(informativeness());
}

std::string EvalReport::render_text() const {
    std::ostringstream os;
    if (factual_items > 0) {
        os << "Factual QA (" << factual_items << " questions)\n"
           << "SPARQL generator: delivery rate / accuracy / SPARQL accuracy (auto) / SPARQL accuracy (manual)\n"
           << label << ": " << factual_row() << '\n';
        if (sparql_auto_errors > 0) os << "SPARQL judge errors excluded: " << sparql_auto_errors << '\n';
    }
    if (descriptive_items > 0) {
        if (factual_items > 0) os << '\n';
        os << "Descriptive QA (" << descriptive_items << " questions)\n"
           << "Context sources: fact accuracy (auto) / fact accuracy (manual) / factual questions / perplexity / "
              "relevance / fluency / informativeness\n"
           << contexts_label << ": " << descriptive_row() << '\n';
    }
    return os.str();
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j{{"label", label}, {"contexts_label", contexts_label}};
    if (factual_items > 0) {
        j["factual"] = {{"items", factual_items},
                        {"delivered", delivered},
                        {"correct", correct},
                        {"sparql_auto_true", sparql_auto_true},
                        {"sparql_auto_judged", sparql_auto_judged},
                        {"sparql_auto_errors", sparql_auto_errors},
                        {"sparql_manual_true", sparql_manual_true},
                        {"sparql_manual_judged", sparql_manual_judged},
                        {"delivery_rate", fmt2(delivery_rate())},
                        {"accuracy", fmt2(accuracy())},
                        {"sparql_accuracy_auto", fmt2(sparql_accuracy_auto())},
                        {"sparql_accuracy_manual", fmt2(sparql_accuracy_manual())}};
    }
    if (descriptive_items > 0) {
        j["descriptive"] = {{"items", descriptive_items},
                            {"fact_yes", fact_yes},
                            {"fact_no", fact_no},
                            {"fact_errors", fact_errors},
                            {"fact_manual_yes", fact_manual_yes},
                            {"fact_manual_judged", fact_manual_judged},
                            {"factual_questions", factual_questions},
                            {"relevance_sum", relevance_sum},
                            {"relevance_n", relevance_n},
                            {"fluency_sum", fluency_sum},
                            {"fluency_n", fluency_n},
                            {"informativeness_sum", informativeness_sum},
                            {"informativeness_n", informativeness_n},
                            {"fact_accuracy_auto", fmt2(fact_accuracy_auto())},
                            {"fact_accuracy_manual", fmt2(fact_accuracy_manual())},
                            {"perplexity", "n/a"},
                            {"relevance", fmt2(relevance())},
                            {"fluency", fmt2(fluency())},
                            {"informativeness", fmt2(informativeness())}};
    }
    j["table"] = render_text();
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.label = j.value("label", r.label);
    r.contexts_label = j.value("contexts_label", r.contexts_label);
    if (j.contains("factual")) {
        const auto& f = j["factual"];
        r.factual_items = f.at("items");
        r.delivered = f.at("delivered");
        r.correct = f.at("correct");
        r.sparql_auto_true = f.at("sparql_auto_true");
        r.sparql_auto_judged = f.at("sparql_auto_judged");
        r.sparql_auto_errors = f.at("sparql_auto_errors");
        r.sparql_manual_true = f.at("sparql_manual_true");
        r.sparql_manual_judged = f.at("sparql_manual_judged");
    }
    if (j.contains("descriptive")) {
        const auto& d = j["descriptive"];
        r.descriptive_items = d.at("items");
        r.fact_yes = d.at("fact_yes");
        r.fact_no = d.at("fact_no");
        r.fact_errors = d.at("fact_errors");
        r.fact_manual_yes = d.at("fact_manual_yes");
        r.fact_manual_judged = d.at("fact_manual_judged");
        r.factual_questions = d.at("factual_questions");
        r.relevance_sum = d.at("relevance_sum");
        r.relevance_n = d.at("relevance_n");
        r.fluency_sum = d.at("fluency_sum");
        r.fluency_n = d.at("fluency_n");
        r.informativeness_sum = d.at("informativeness_sum");
        r.informativeness_n = d.at("informativeness_n");
    }
    return r;
}

EvalReport summarize(const OutcomeLog& log, std::string label, std::string contexts_label) {
    EvalReport r;
    r.label = std::move(label);
    r.contexts_label = std::move(contexts_label);
    for (const auto& rec : log) {
        if (is_factual(rec)) {
            ++r.factual_items;
            r.delivered += rec.delivered;
            r.correct += rec.delivered && rec.correct.value_or(false);
            if (rec.sparql_auto_error) {
                ++r.sparql_auto_errors;
            } else if (rec.sparql_auto) {
                ++r.sparql_auto_judged;
                r.sparql_auto_true += *rec.sparql_auto;
            }
            if (rec.sparql_manual) {
                ++r.sparql_manual_judged;
                r.sparql_manual_true += *rec.sparql_manual;
            }
            continue;
        }
        ++r.descriptive_items;
        r.factual_questions += rec.factual_questions;
        if (rec.facts) {
            const bool any_override = std::any_of(rec.facts->facts.begin(), rec.facts->facts.end(),
                                                  [](const auto& f) { return f.manual_override.has_value(); });
            for (const auto& f : rec.facts->facts) {
                r.fact_yes += f.verdict == "yes";
                r.fact_no += f.verdict == "no";
                r.fact_errors += f.verdict == "error";
                if (!any_override) continue;
                std::optional<bool> v = f.manual_override;
                if (!v && f.verdict != "error") v = f.verdict == "yes";
                if (!v) continue;
                ++r.fact_manual_judged;
                r.fact_manual_yes += *v;
            }
        }
        if (rec.quality.relevance) {
            r.relevance_sum += *rec.quality.relevance;
            ++r.relevance_n;
        }
        if (rec.quality.fluency) {
            r.fluency_sum += *rec.quality.fluency;
            ++r.fluency_n;
        }
        if (rec.quality.informativeness) {
            r.informativeness_sum += *rec.quality.informativeness;
            ++r.informativeness_n;
        }
    }
    return r;
}

}  // namespace chronomap::eval
