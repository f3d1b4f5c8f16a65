#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "chronomap/eval/evalkit.hpp"
#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::eval {

namespace {

struct Fill {
    std::string type;
    std::string type2;
    std::string muni;
    std::int64_t year{0};
    std::int64_t year2{0};
    std::int64_t threshold{0};
};

struct Template {
    Category category;
    AnswerKind kind;
    std::function<std::string(const Fill&)> question;
    std::function<std::string(const Fill&)> query;
    std::vector<Fill> candidates;
};

std::string plural(const std::string& t) {
    if (t.empty()) return t;
    if (t.back() == 's' || t.back() == 'x' || t.ends_with("sh") || t.ends_with("ch")) return t + "es";
    if (t.back() == 'y' && t.size() > 1 && std::string_view("aeiou").find(t[t.size() - 2]) == std::string_view::npos) {
        return t.substr(0, t.size() - 1) + "ies";
    }
    return t + "s";
}

std::string article(const std::string& t) {
    return (!t.empty() && std::string_view("aeiou").find(t[0]) != std::string_view::npos ? "an " : "a ") + t;
}

std::string display(const std::string& m) {
    std::string out = m;
    bool start = true;
    for (auto& c : out) {
        if (start) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        start = c == ' ' || c == '-';
    }
    return out;
}

std::string lit(const std::string& s) { return "\"" + s + "\""; }

std::string scope(const Fill& f, std::int64_t year) {
    return "?f cmo:featureType " + lit(f.type) + " ; cmo:municipality " + lit(f.muni) + " ; cmo:year " + std::to_string(year);
}

// Seeded Fisher-Yates; std::shuffle's algorithm is library-specific.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
}

struct StoreFacts {
    std::vector<std::string> types;
    std::vector<std::string> munis;
    std::vector<std::int64_t> years;
    std::set<std::string> areal;
    std::set<std::string> linear;
    std::map<std::string, std::vector<std::int64_t>> thresholds;
};

StoreFacts facts_of(const kg::Store& store) {
    StoreFacts f;
    std::set<std::string> types;
    std::set<std::string> munis;
    std::set<std::int64_t> years;
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(kg::cmo("featureType")), std::nullopt)) types.insert(t.object.text());
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(kg::cmo("municipality")), std::nullopt)) munis.insert(t.object.text());
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(kg::cmo("year")), std::nullopt)) {
        if (t.object.kind() == kg::TermKind::integer) years.insert(t.object.as_integer());
    }
    f.types.assign(types.begin(), types.end());
    f.munis.assign(munis.begin(), munis.end());
    f.years.assign(years.begin(), years.end());

    std::map<std::string, std::vector<std::int64_t>> areas;
    auto type_of = [&](const kg::Term& s) {
        const auto m = store.match(s, kg::Term::iri(kg::cmo("featureType")), std::nullopt);
        return m.empty() ? std::string() : m.front().object.text();
    };
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(kg::cmo("areaSqm")), std::nullopt)) {
        const auto ty = type_of(t.subject);
        f.areal.insert(ty);
        areas[ty].push_back(t.object.as_integer());
    }
    for (const auto& t : store.match(std::nullopt, kg::Term::iri(kg::cmo("lengthM")), std::nullopt)) f.linear.insert(type_of(t.subject));
    // Thresholds at the quartiles of the observed areas, rounded to 100 m².
    for (auto& [ty, v] : areas) {
        std::sort(v.begin(), v.end());
        std::set<std::int64_t> qs;
        for (const double p : {0.25, 0.5, 0.75}) {
            const auto raw = v[static_cast<std::size_t>(p * static_cast<double>(v.size() - 1))];
            qs.insert(std::max<std::int64_t>(100, (raw + 50) / 100 * 100));
        }
        f.thresholds[ty].assign(qs.begin(), qs.end());
    }
    return f;
}

std::vector<Template> templates(const StoreFacts& sf) {
    std::vector<Template> ts;
    auto each_tmy = [&](auto&& pred) {
        std::vector<Fill> out;
        for (const auto& t : sf.types) {
            for (const auto& m : sf.munis) {
                for (const auto y : sf.years) {
                    Fill f{t, "", m, y, 0, 0};
                    if (pred(f)) out.push_back(f);
                }
            }
        }
        return out;
    };
    auto all = [](const Fill&) { return true; };
    auto adjacent = [&] {
        std::vector<Fill> out;
        for (const auto& t : sf.types) {
            for (const auto& m : sf.munis) {
                for (std::size_t i = 1; i < sf.years.size(); ++i) out.push_back({t, "", m, sf.years[i - 1], sf.years[i], 0});
            }
        }
        return out;
    };

    // yes/no
    ts.push_back({Category::property, AnswerKind::yesno,
                  [](const Fill& f) { return "Were there " + plural(f.type) + " in " + display(f.muni) + " in " + std::to_string(f.year) + "?"; },
                  [](const Fill& f) { return "ASK { " + scope(f, f.year) + " }"; }, each_tmy(all)});
    {
        std::vector<Fill> c;
        for (auto f : each_tmy([&](const Fill& f) { return sf.areal.count(f.type) > 0; })) {
            for (const auto th : sf.thresholds.at(f.type)) {
                f.threshold = th;
                c.push_back(f);
            }
        }
        ts.push_back({Category::qualifier, AnswerKind::yesno,
                      [](const Fill& f) {
                          return "Was there " + article(f.type) + " larger than " + std::to_string(f.threshold) +
                                 " square meters in " + display(f.muni) + " in " + std::to_string(f.year) + "?";
                      },
                      [](const Fill& f) {
                          return "ASK { " + scope(f, f.year) + " ; cmo:areaSqm ?a FILTER(?a > " + std::to_string(f.threshold) + ") }";
                      },
                      c});
    }
    {
        std::vector<Fill> c;
        for (auto f : each_tmy(all)) {
            for (const auto& t2 : sf.types) {
                if (t2 == f.type) continue;
                f.type2 = t2;
                c.push_back(f);
            }
        }
        ts.push_back({Category::relationship, AnswerKind::yesno,
                      [](const Fill& f) {
                          return "Was there " + article(f.type) + " near " + article(f.type2) + " in " + display(f.muni) +
                                 " in " + std::to_string(f.year) + "?";
                      },
                      [](const Fill& f) {
                          return "ASK { " + scope(f, f.year) + " ; cmr:near ?g . ?g cmo:featureType " + lit(f.type2) + " }";
                      },
                      c});
    }
    ts.push_back({Category::spatial_temporal, AnswerKind::yesno,
                  [](const Fill& f) {
                      return "Did any " + f.type + " in " + display(f.muni) + " change between " + std::to_string(f.year) +
                             " and " + std::to_string(f.year2) + "?";
                  },
                  [](const Fill& f) { return "ASK { " + scope(f, f.year) + " ; cmr:changedTo ?g }"; }, adjacent()});

    // numeric
    ts.push_back({Category::aggregate, AnswerKind::numeric,
                  [](const Fill& f) {
                      return "How many " + plural(f.type) + " were there in " + display(f.muni) + " in " + std::to_string(f.year) + "?";
                  },
                  [](const Fill& f) { return "SELECT (COUNT(?f) AS ?n) WHERE { " + scope(f, f.year) + " }"; }, each_tmy(all)});
    ts.push_back({Category::aggregate, AnswerKind::numeric,
                  [&sf](const Fill& f) {
                      const bool lin = sf.linear.count(f.type) > 0;
                      return "What was the total " + std::string(lin ? "length" : "area") + " of " + plural(f.type) + " in " +
                             display(f.muni) + " in " + std::to_string(f.year) + "?";
                  },
                  [&sf](const Fill& f) {
                      const bool lin = sf.linear.count(f.type) > 0;
                      return "SELECT (SUM(?v) AS ?total) WHERE { " + scope(f, f.year) + (lin ? " ; cmo:lengthM ?v }" : " ; cmo:areaSqm ?v }");
                  },
                  each_tmy([&](const Fill& f) { return sf.areal.count(f.type) || sf.linear.count(f.type); })});
    ts.push_back({Category::superlative, AnswerKind::numeric,
                  [](const Fill& f) {
                      return "What was the area of the largest " + f.type + " in " + display(f.muni) + " in " + std::to_string(f.year) + "?";
                  },
                  [](const Fill& f) { return "SELECT (MAX(?a) AS ?max) WHERE { " + scope(f, f.year) + " ; cmo:areaSqm ?a }"; },
                  each_tmy([&](const Fill& f) { return sf.areal.count(f.type) > 0; })});
    {
        std::vector<Fill> c;
        for (const auto& t : sf.types) {
            for (const auto& m : sf.munis) c.push_back({t, "", m, 0, 0, 0});
        }
        ts.push_back({Category::property, AnswerKind::numeric,
                      [](const Fill& f) { return "In which years were there " + plural(f.type) + " in " + display(f.muni) + "?"; },
                      [](const Fill& f) {
                          return "SELECT DISTINCT ?y WHERE { ?f cmo:featureType " + lit(f.type) + " ; cmo:municipality " + lit(f.muni) +
                                 " ; cmo:year ?y } ORDER BY ?y";
                      },
                      c});
    }
    ts.push_back({Category::spatial_temporal, AnswerKind::numeric,
                  [](const Fill& f) {
                      return "How many " + plural(f.type) + " in " + display(f.muni) + " changed between " + std::to_string(f.year) +
                             " and " + std::to_string(f.year2) + "?";
                  },
                  [](const Fill& f) { return "SELECT (COUNT(DISTINCT ?f) AS ?n) WHERE { " + scope(f, f.year) + " ; cmr:changedTo ?g }"; },
                  adjacent()});

    // overview
    {
        std::vector<Fill> c;
        for (const auto& m : sf.munis) {
            for (const auto y : sf.years) c.push_back({"", "", m, y, 0, 0});
        }
        ts.push_back({Category::overview, AnswerKind::open,
                      [](const Fill& f) { return "Please provide an overview about " + display(f.muni) + " in " + std::to_string(f.year) + "."; },
                      [](const Fill&) { return std::string(); }, c});
        ts.push_back({Category::overview, AnswerKind::open,
                      [](const Fill& f) { return "What was " + display(f.muni) + " like in " + std::to_string(f.year) + "?"; },
                      [](const Fill&) { return std::string(); }, c});
    }
    return ts;
}

}  // namespace

const char* to_string(Category c) {
    switch (c) {
        case Category::property: return "property";
        case Category::relationship: return "relationship";
        case Category::qualifier: return "qualifier";
        case Category::aggregate: return "aggregate";
        case Category::superlative: return "superlative";
        case Category::spatial_temporal: return "spatial-temporal";
        default: return "overview";
    }
}

const char* to_string(AnswerKind k) {
    switch (k) {
        case AnswerKind::yesno: return "yesno";
        case AnswerKind::numeric: return "numeric";
        default: return "open";
    }
}

Category category_from(const std::string& s) {
    for (const auto c : {Category::property, Category::relationship, Category::qualifier, Category::aggregate,
                         Category::superlative, Category::spatial_temporal, Category::overview}) {
        if (s == to_string(c)) return c;
    }
    throw std::invalid_argument("unknown category: " + s);
}

AnswerKind kind_from(const std::string& s) {
    for (const auto k : {AnswerKind::yesno, AnswerKind::numeric, AnswerKind::open}) {
        if (s == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown answer kind: " + s);
}

nlohmann::json BenchmarkItem::to_json() const {
    nlohmann::json j{{"id", id},
                     {"question", question},
                     {"category", to_string(category)},
                     {"answer_kind", to_string(kind)},
                     {"gold_query", gold_query}};
    j["gold_answer"] = kind == AnswerKind::open ? nlohmann::json(nullptr) : nlohmann::json(gold_answer);
    return j;
}

BenchmarkItem BenchmarkItem::from_json(const nlohmann::json& j) {
    BenchmarkItem it;
    it.id = j.value("id", std::string());
    it.question = j.at("question").get<std::string>();
    it.category = category_from(j.at("category").get<std::string>());
    it.kind = kind_from(j.at("answer_kind").get<std::string>());
    it.gold_query = j.value("gold_query", std::string());
    if (j.contains("gold_answer") && !j["gold_answer"].is_null()) it.gold_answer = j["gold_answer"].get<std::string>();
    return it;
}

std::optional<std::string> render_gold(const query::QueryResult& r, AnswerKind kind) {
    if (kind == AnswerKind::open) return std::nullopt;
    if (r.form == query::Form::ask) return kind == AnswerKind::yesno ? std::optional<std::string>(r.boolean ? "yes" : "no") : std::nullopt;
    if (kind != AnswerKind::numeric || r.table.vars.size() != 1 || r.table.rows.empty()) return std::nullopt;
    std::string out;
    for (const auto& row : r.table.rows) {
        const auto& cell = row[0];
        if (!cell || (cell->kind() != kg::TermKind::integer && cell->kind() != kg::TermKind::decimal)) return std::nullopt;
        if (!out.empty()) out += ", ";
        out += cell->lexical();
    }
    return out;
}

std::vector<BenchmarkItem> generate_benchmark(const kg::Store& store, const BenchmarkCounts& counts, std::uint64_t seed,
                                              llm::ChatClient* paraphraser, std::vector<std::string>* warnings) {
    if (!store.sealed()) throw std::invalid_argument("generate_benchmark needs a sealed store");
    const auto sf = facts_of(store);
    if (sf.munis.empty() || sf.years.size() < 2) {
        throw std::invalid_argument("benchmark generation needs at least one municipality and two years");
    }
    std::mt19937_64 rng(seed);
    auto ts = templates(sf);
    for (auto& t : ts) shuffle(t.candidates, rng);

    std::vector<BenchmarkItem> items;
    std::set<std::string> seen;
    auto draw = [&](auto kind_filter, int want, const char* label) {
        std::vector<Template*> group;
        for (auto& t : ts) {
            if (kind_filter(t.kind)) group.push_back(&t);
        }
        std::vector<std::size_t> cursor(group.size(), 0);
        int got = 0;
        bool progress = true;
        while (got < want && progress) {
            progress = false;
            for (std::size_t g = 0; g < group.size() && got < want; ++g) {
                auto& t = *group[g];
                while (cursor[g] < t.candidates.size()) {
                    const Fill& f = t.candidates[cursor[g]++];
                    BenchmarkItem it;
                    it.question = t.question(f);
                    if (seen.count(it.question)) continue;
                    it.category = t.category;
                    it.kind = t.kind;
                    it.gold_query = t.query(f);
                    if (t.kind != AnswerKind::open) {
                        const auto gold = render_gold(query::evaluate(query::parse(it.gold_query), store), t.kind);
                        if (!gold) continue;
                        it.gold_answer = *gold;
                    }
                    seen.insert(it.question);
                    items.push_back(std::move(it));
                    ++got;
                    progress = true;
                    break;
                }
            }
        }
        if (got < want) {
            const std::string w = std::string("only ") + std::to_string(got) + " of " + std::to_string(want) + " " + label +
                                  " questions could be generated";
            spdlog::warn("{}", w);
            if (warnings) warnings->push_back(w);
        }
    };
    draw([](AnswerKind k) { return k == AnswerKind::yesno; }, counts.yesno, "yes/no");
    draw([](AnswerKind k) { return k == AnswerKind::numeric; }, counts.numeric, "numeric");
    draw([](AnswerKind k) { return k == AnswerKind::open; }, counts.overview, "overview");

    for (std::size_t i = 0; i < items.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "q%03zu", i + 1);
        items[i].id = id;
        if (!paraphraser) continue;
        llm::ChatRequest req;
        req.system = "Rephrase the question without changing its meaning, place names, years or numbers. Reply with the question only.";
        req.parts.emplace_back(items[i].question);
        req.tag = "paraphrase";
        try {
            auto text = paraphraser->complete(req).text;
            const auto b = text.find_first_not_of(" \t\r\n");
            const auto e = text.find_last_not_of(" \t\r\n");
            if (b != std::string::npos) items[i].question = text.substr(b, e - b + 1);
        } catch (const llm::GatewayError& e) {
            spdlog::warn("paraphrase failed for {}: {}", items[i].id, e.what());
        }
    }
    return items;
}

void save_benchmark(const std::vector<BenchmarkItem>& items, const std::filesystem::path& path) {
    auto arr = nlohmann::json::array();
    for (const auto& it : items) arr.push_back(it.to_json());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << arr.dump(2) << '\n';
}

std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open benchmark " + path.string());
    const auto j = nlohmann::json::parse(in);
    std::vector<BenchmarkItem> items;
    for (const auto& e : j) items.push_back(BenchmarkItem::from_json(e));
    return items;
}

}  // namespace chronomap::eval
