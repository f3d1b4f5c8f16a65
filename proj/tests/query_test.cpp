#include <doctest.h>

#include <algorithm>

#include "chronomap/kgstore/schema.hpp"
#include "chronomap/kgstore/store.hpp"
#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/query/query.hpp"
#include "support/naive_query.hpp"

using namespace chronomap;
using chronomap::testing::Rng;

namespace {

kg::Store lakes_store() {
    kg::Store store;
    const std::int64_t areas[] = {500, 1500, 2000};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto f = kg::Term::iri(kg::feature_iri("s1", 1916, "lake", i));
        store.insert(f, kg::Term::iri(kg::cmo("featureType")), kg::Term::string("lake"));
        store.insert(f, kg::Term::iri(kg::cmo("year")), kg::Term::integer(1916));
        store.insert(f, kg::Term::iri(kg::cmo("areaSqm")), kg::Term::integer(areas[i]));
    }
    store.seal();
    return store;
}

bool is_subset(std::vector<std::string> sub, const std::vector<std::string>& super) {
    std::sort(sub.begin(), sub.end());
    return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

}  // namespace

TEST_CASE("example queries parse") {
    const auto ask = query::parse(R"(ASK { ?f cmo:featureType "lake" })");
    CHECK(ask.form == query::Form::ask);
    CHECK(ask.where.elements.size() == 1);

    const auto count = query::parse(
        R"(SELECT (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType "lake" . ?f cmo:year 1916 })");
    REQUIRE(count.projection.size() == 1);
    const auto& agg = std::get<query::Aggregate>(count.projection[0]);
    CHECK(agg.fn == query::AggFn::count);
    CHECK(agg.alias == "n");
    const auto& year = std::get<query::TriplePattern>(count.where.elements[1]);
    CHECK(std::get<kg::Term>(year.object) == kg::Term::integer(1916));

    const auto filt = query::parse(R"(SELECT ?f WHERE { ?f cmo:areaSqm ?a FILTER(?a > 1000) })");
    CHECK(filt.where.elements.size() == 2);
    CHECK(std::holds_alternative<query::Filter>(filt.where.elements[1]));
}

TEST_CASE("schema validation flags unknown predicates only") {
    const auto& schema = kg::Schema::standard();
    const auto bad = query::validate_against_schema(
        query::parse(R"(SELECT ?f WHERE { ?f cmo:featureType "lake" . ?f cmo:population ?p })"), schema);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].iri == kg::cmo("population"));
    CHECK(bad[0].pattern_index == 2);
    CHECK(query::validate_against_schema(query::parse("SELECT ?p WHERE { ?f ?p ?o }"), schema).empty());
    CHECK(query::validate_against_schema(query::parse("SELECT ?g WHERE { ?f cmr:northOf ?g }"), schema).empty());
}

TEST_CASE("evaluation on three lakes") {
    const auto store = lakes_store();
    const auto big = query::evaluate(query::parse(R"(SELECT ?f WHERE { ?f cmo:areaSqm ?a FILTER(?a > 1000) })"), store);
    CHECK(big.table.rows.size() == 2);

    const auto top = query::evaluate(
        query::parse("SELECT ?f ?a WHERE { ?f cmo:areaSqm ?a } ORDER BY DESC(?a) LIMIT 1"), store);
    REQUIRE(top.table.rows.size() == 1);
    CHECK(top.table.rows[0][1] == kg::Term::integer(2000));
    CHECK(top.table.rows[0][0] == kg::Term::iri(kg::feature_iri("s1", 1916, "lake", 2)));

    const auto n = query::evaluate(
        query::parse(R"(SELECT (COUNT(?f) AS ?n) WHERE { ?f cmo:featureType "lake" . ?f cmo:year 1916 })"), store);
    REQUIRE(n.table.rows.size() == 1);
    CHECK(n.table.rows[0][0] == kg::Term::integer(3));

    const auto sum = query::evaluate(query::parse("SELECT (SUM(?a) AS ?s) (AVG(?a) AS ?m) WHERE { ?f cmo:areaSqm ?a }"), store);
    CHECK(sum.table.rows[0][0] == kg::Term::integer(4000));
    CHECK(sum.table.rows[0][1]->as_number() == doctest::Approx(4000.0 / 3.0));

    kg::Store empty;
    empty.seal();
    const auto ask = query::evaluate(query::parse(R"(ASK { ?f cmo:featureType "lake" })"), empty);
    CHECK(ask.form == query::Form::ask);
    CHECK_FALSE(ask.boolean);
    CHECK(query::evaluate(query::parse(R"(ASK { ?f cmo:featureType "lake" })"), store).boolean);

    const auto none = query::evaluate(query::parse(R"(SELECT (COUNT(?f) AS ?n) (MAX(?f) AS ?m) WHERE { ?f cmo:featureType "bog" })"), store);
    REQUIRE(none.table.rows.size() == 1);
    CHECK(none.table.rows[0][0] == kg::Term::integer(0));
    CHECK_FALSE(none.table.rows[0][1].has_value());
}

TEST_CASE("type errors in filters drop rows and are tallied") {
    const auto store = lakes_store();
    const auto r = query::evaluate(
        query::parse(R"(SELECT ?f WHERE { ?f cmo:featureType ?t FILTER(?t > 5) })"), store);
    CHECK(r.table.rows.empty());
    CHECK(r.filter_type_mismatches == 3);
    // a true disjunct masks the error
    const auto ok = query::evaluate(
        query::parse(R"(SELECT ?f WHERE { ?f cmo:featureType ?t FILTER(?t > 5 || ?t = "lake") })"), store);
    CHECK(ok.table.rows.size() == 3);
    CHECK(ok.filter_type_mismatches == 0);
}

TEST_CASE("sparql json results") {
    const auto store = lakes_store();
    const auto r = query::evaluate(query::parse("SELECT ?f ?a WHERE { ?f cmo:areaSqm ?a } ORDER BY ?a"), store);
    const auto j = query::to_sparql_json(r, store);
    CHECK(j["head"]["vars"] == nlohmann::json::array({"f", "a"}));
    REQUIRE(j["results"]["bindings"].size() == 3);
    const auto& first = j["results"]["bindings"][0];
    CHECK(first["f"]["type"] == "uri");
    CHECK(first["a"]["type"] == "literal");
    CHECK(first["a"]["value"] == "500");
    CHECK(first["a"]["datatype"] == kg::xsd("integer"));

    const auto ask = query::to_sparql_json(query::evaluate(query::parse("ASK { ?f ?p ?o }"), store), store);
    CHECK(ask["boolean"] == true);
}

TEST_CASE("errors carry line and column") {
    try {
        query::parse("SELECT ?f WHERE {\n  ?f foo:bar ?o }");
        FAIL("expected unknown prefix");
    } catch (const query::QueryError& e) {
        CHECK(e.code() == query::QueryError::Code::unknown_prefix);
        CHECK(e.line() == 2);
        CHECK(e.column() == 6);
    }
    try {
        query::parse("SELECT ?f WHERE { ?f cmo:year }");
        FAIL("expected syntax error");
    } catch (const query::QueryError& e) {
        CHECK(e.code() == query::QueryError::Code::syntax);
        CHECK(e.line() == 1);
        CHECK(e.column() == 31);
        CHECK_FALSE(e.expected().empty());
    }
    CHECK_THROWS_AS(query::parse("SELECT ?x WHERE { ?f cmo:year ?y }"), query::QueryError);
    CHECK_THROWS_AS(query::parse("SELECT ?f (COUNT(?y) AS ?n) WHERE { ?f cmo:year ?y }"), query::QueryError);
}

TEST_CASE("property: parse of print is a fixed point") {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto q = testing::random_query(rng);
        const auto text = query::print(q);
        const auto back = query::parse(text);
        CHECK_MESSAGE(back == q, text);
        CHECK(query::print(back) == text);
    }
    const auto q = query::parse(R"(PREFIX ex: <http://example.org/>
        SELECT DISTINCT ?f WHERE { ?f ex:p "a\"b"@en ; ex:q -2.5 , true . OPTIONAL { ?f ex:r ?r FILTER(!(?r != ?f)) } }
        ORDER BY DESC(?f) LIMIT 3 OFFSET 1 # trailing comment
    )");
    CHECK(query::parse(query::print(q)) == q);
}

TEST_CASE("property: evaluator agrees with naive enumeration") {
    Rng rng(2024);
    int checked = 0;
    for (int round = 0; round < 10; ++round) {
        const auto store = testing::random_query_store(rng, 8);
        for (int i = 0; i < 20; ++i) {
            const auto q = query::parse(query::print(testing::random_query(rng)));
            const auto got = query::evaluate(q, store);
            const auto want = testing::naive_evaluate(q, store);
            const auto text = query::print(q);
            if (q.form == query::Form::ask) {
                CHECK_MESSAGE(got.boolean == want.boolean, text);
                continue;
            }
            CHECK_MESSAGE(got.table.vars == want.vars, text);
            const auto got_rows = testing::row_strings(got.table.rows);
            const auto want_rows = testing::row_strings(want.rows);
            const std::size_t skip = q.offset.value_or(0);
            std::size_t expected = want_rows.size() > skip ? want_rows.size() - skip : 0;
            if (q.limit) expected = std::min(expected, *q.limit);
            CHECK_MESSAGE(got_rows.size() == expected, text);
            if (!q.limit && !q.offset) {
                CHECK_MESSAGE(got_rows == want_rows, text);
            } else {
                CHECK_MESSAGE(is_subset(got_rows, want_rows), text);
            }
            if (!q.order_by.empty()) {
                const auto& key = q.order_by[0];
                const auto col = static_cast<std::size_t>(
                    std::find(got.table.vars.begin(), got.table.vars.end(), key.var) - got.table.vars.begin());
                if (col < got.table.vars.size()) {
                    for (std::size_t r = 1; r < got.table.rows.size(); ++r) {
                        const auto& a = got.table.rows[r - 1][col];
                        const auto& b = got.table.rows[r][col];
                        if (!a) {
                            CHECK_MESSAGE(!b, text);  // unbound sorts last
                        } else if (b) {
                            const int c = testing::naive_order(*a, *b);
                            CHECK_MESSAGE((key.descending ? c >= 0 : c <= 0), text);
                        }
                    }
                }
            }
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("property: COUNT(*) over one free pattern equals store size") {
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const auto store = testing::random_query_store(rng, 3 + static_cast<int>(rng.index(10)));
        const auto r = query::evaluate(query::parse("SELECT (COUNT(*) AS ?n) WHERE { ?s ?p ?o }"), store);
        CHECK(r.table.rows[0][0] == kg::Term::integer(static_cast<std::int64_t>(store.size())));
    }
}

TEST_CASE("property: LIMIT bounds rows and DISTINCT removes duplicates") {
    Rng rng(6);
    const auto store = testing::random_query_store(rng, 12);
    for (std::size_t k = 0; k < 6; ++k) {
        const auto r = query::evaluate(
            query::parse("SELECT ?t WHERE { ?f cmo:featureType ?t } LIMIT " + std::to_string(k)), store);
        CHECK(r.table.rows.size() <= k);
    }
    const auto d = query::evaluate(query::parse("SELECT DISTINCT ?t WHERE { ?f cmo:featureType ?t }"), store);
    auto rows = testing::row_strings(d.table.rows);
    CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
    CHECK(rows.size() <= 3);
}
