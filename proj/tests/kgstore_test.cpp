#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "chronomap/geometry/io.hpp"
#include "chronomap/kgstore/store.hpp"
#include "chronomap/kgstore/vocab.hpp"
#include "support/random_geometry.hpp"

using namespace chronomap::kg;
using chronomap::testing::Rng;

namespace {

Term feat(const std::string& local) { return Term::iri(std::string(kFeatureNs) + local); }
Term prop(const std::string& local) { return Term::iri(cmo(local)); }
Term rel(const std::string& local) { return Term::iri(cmr(local)); }

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "chronomap_kgstore_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

// Random store plus the plain triple list it was built from.
std::pair<Store, std::vector<Triple>> random_store(Rng& rng, int features) {
    Store store;
    std::vector<Triple> all;
    auto add = [&](const Term& s, const Term& p, const Term& o) {
        if (store.insert(s, p, o)) all.push_back({s, p, o});
    };
    const char* types[] = {"lake", "forest", "river"};
    for (int i = 0; i < features; ++i) {
        const Term f = feat("s_" + std::to_string(1877 + static_cast<int>(rng.index(3))) + "_" + std::to_string(i));
        add(f, prop("featureType"), Term::string(types[rng.index(3)]));
        add(f, prop("year"), Term::integer(rng.coin() ? 1901 : 1916));
        if (rng.coin()) add(f, prop("areaSqm"), Term::integer(static_cast<std::int64_t>(rng.index(5000))));
        if (rng.coin()) add(f, prop("municipality"), Term::string(rng.coin() ? "aarberg" : "seedorf"));
        const auto h = store.add_geometry(chronomap::testing::random_rect(rng, 1000, 5, 50));
        add(f, prop("wkt"), Term::geometry(h));
    }
    for (int i = 0; i < features; ++i) {
        const Term a = feat("s_x_" + std::to_string(rng.index(static_cast<std::size_t>(features))));
        const Term b = feat("s_x_" + std::to_string(rng.index(static_cast<std::size_t>(features))));
        add(a, rel("near"), b);
    }
    return {std::move(store), std::move(all)};
}

std::vector<Triple> brute_match(const std::vector<Triple>& all, const std::optional<Term>& s,
                                const std::optional<Term>& p, const std::optional<Term>& o) {
    std::vector<Triple> out;
    for (const auto& t : all) {
        if ((!s || t.subject == *s) && (!p || t.predicate == *p) && (!o || t.object == *o)) out.push_back(t);
    }
    std::sort(out.begin(), out.end(), [](const Triple& a, const Triple& b) {
        return std::tuple(a.subject.to_ntriples(), a.predicate.to_ntriples(), a.object.to_ntriples()) <
               std::tuple(b.subject.to_ntriples(), b.predicate.to_ntriples(), b.object.to_ntriples());
    });
    return out;
}

}  // namespace

TEST_CASE("insert and match") {
    Store store;
    CHECK(store.match(std::nullopt, std::nullopt, std::nullopt).empty());

    CHECK(store.insert(feat("A"), prop("year"), Term::integer(1901)));
    CHECK(store.match(feat("A"), prop("year"), std::nullopt).size() == 1);
    CHECK_FALSE(store.insert(feat("A"), prop("year"), Term::integer(1901)));
    CHECK(store.size() == 1);

    SUBCASE("closed catalog") {
        try {
            store.insert(feat("A"), prop("bogus"), Term::integer(1));
            FAIL("expected schema violation");
        } catch (const StoreError& e) {
            CHECK(e.code() == StoreError::Code::schema_violation);
        }
    }
    SUBCASE("literal type checked against range") {
        try {
            store.insert(feat("A"), prop("featureType"), Term::integer(3));
            FAIL("expected type violation");
        } catch (const StoreError& e) {
            CHECK(e.code() == StoreError::Code::type_violation);
        }
        CHECK_THROWS_AS(store.insert(feat("B"), prop("year"), Term::integer(190)), StoreError);
        CHECK_THROWS_AS(store.insert(feat("B"), rel("near"), Term::string("x")), StoreError);
    }
    SUBCASE("fixed properties are single-valued") {
        try {
            store.insert(feat("A"), prop("year"), Term::integer(1916));
            FAIL("expected schema violation");
        } catch (const StoreError& e) {
            CHECK(e.code() == StoreError::Code::schema_violation);
        }
        store.insert(feat("A"), prop("municipality"), Term::string("aarberg"));
        CHECK(store.insert(feat("A"), prop("municipality"), Term::string("seedorf")));
    }
}

TEST_CASE("match by object on a three-lake fixture") {
    Store store;
    for (const char* id : {"l1", "l2", "l3"}) store.insert(feat(id), prop("featureType"), Term::string("lake"));
    store.insert(feat("f1"), prop("featureType"), Term::string("forest"));
    store.insert(feat("l1"), prop("year"), Term::integer(1901));
    CHECK(store.match(std::nullopt, prop("featureType"), Term::string("lake")).size() == 3);
    const auto a = store.match(feat("l1"), std::nullopt, std::nullopt);
    CHECK(a.size() == 2);
    for (const auto& t : a) CHECK(t.subject == feat("l1"));
}

TEST_CASE("seal") {
    Store store;
    store.insert(feat("A"), prop("sheet"), Term::string("TA-138"));
    const auto before = store.match(std::nullopt, std::nullopt, std::nullopt);
    store.seal();
    store.seal();
    CHECK(store.match(std::nullopt, std::nullopt, std::nullopt) == before);
    try {
        store.insert(feat("B"), prop("sheet"), Term::string("TA-139"));
        FAIL("expected sealed error");
    } catch (const StoreError& e) {
        CHECK(e.code() == StoreError::Code::sealed);
    }
}

TEST_CASE("schema catalog") {
    const Schema& s = Schema::standard();
    for (const auto& r : s.relations()) {
        REQUIRE(r.inverse);
        CHECK(s.inverse_of(*r.inverse) == r.iri);
    }
    CHECK(s.inverse_of(cmr("contains")) == cmr("within"));
    CHECK(s.inverse_of(cmr("northEastOf")) == cmr("southWestOf"));
    CHECK(Schema::from_json(s.to_json()) == s);
    CHECK_THROWS_AS(Schema({}, {{cmr("a"), cmr("b")}}), SchemaError);
    CHECK_THROWS_AS(Schema({}, {{cmr("a"), cmr("b")}, {cmr("b"), std::nullopt}}), SchemaError);
}

TEST_CASE("terms") {
    CHECK(Term::literal("1901", xsd("integer")) == Term::integer(1901));
    CHECK(Term::literal("12.5", xsd("decimal")) == Term::decimal(12.5));
    CHECK(Term::literal("true", xsd("boolean")) == Term::boolean(true));
    CHECK_THROWS_AS(Term::literal("12x", xsd("integer")), TermError);
    CHECK_THROWS_AS(Term::iri("relative"), TermError);
    CHECK(Term::string("a \"b\"\n").to_ntriples() ==
          "\"a \\\"b\\\"\\n\"^^<http://www.w3.org/2001/XMLSchema#string>");
    CHECK(feature_iri("TA-138", 1901, "lake", 7) == "http://chronomap.local/feature/TA-138_1901_lake_0007");
    CHECK(compact_iri(cmo("year")) == "cmo:year");
}

TEST_CASE("property: every index answers every pattern identically") {
    Rng rng(21);
    for (int round = 0; round < 5; ++round) {
        auto [store, all] = random_store(rng, 40);
        if (round % 2 == 1) store.seal();
        for (int q = 0; q < 200; ++q) {
            const Triple& pick = all[rng.index(all.size())];
            std::optional<Term> s;
            std::optional<Term> p;
            std::optional<Term> o;
            if (rng.coin()) s = pick.subject;
            if (rng.coin()) p = pick.predicate;
            if (rng.coin()) o = pick.object;
            const auto expected = brute_match(all, s, p, o);
            for (auto via : {IndexChoice::automatic, IndexChoice::spo, IndexChoice::pos, IndexChoice::osp}) {
                CHECK(store.match(s, p, o, via) == expected);
            }
        }
        CHECK(store.match(feat("missing"), std::nullopt, std::nullopt).empty());
    }
}

TEST_CASE("dump and load") {
    Rng rng(4);
    auto [store, all] = random_store(rng, 20);
    store.seal();
    CHECK(store.size() >= 100);
    const auto path = temp_file("round.nt");
    store.dump(path);
    Store loaded = Store::load(path);
    loaded.seal();
    CHECK(loaded.schema() == store.schema());
    CHECK(loaded.size() == store.size());
    CHECK(loaded.to_ntriples() == store.to_ntriples());
    const auto path2 = temp_file("round2.nt");
    loaded.dump(path2);
    std::ifstream a(path);
    std::ifstream b(path2);
    CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

    // schema closure on the reloaded store
    for (const auto& t : loaded.match(std::nullopt, std::nullopt, std::nullopt)) {
        CHECK(loaded.schema().contains(t.predicate.text()));
    }
    // geometries survive the round trip
    const auto wkt = store.match(std::nullopt, prop("wkt"), std::nullopt);
    for (const auto& t : wkt) {
        CHECK(loaded.geometry_of(t.subject.text()) == store.geometry(t.object.handle()));
    }
}

TEST_CASE("load errors") {
    const std::string good =
        "<http://chronomap.local/feature/a> <http://chronomap.local/ontology/year> "
        "\"1901\"^^<http://www.w3.org/2001/XMLSchema#integer> .\n";
    SUBCASE("unknown predicate reports its line") {
        const std::string text = good + "\n<http://chronomap.local/feature/a> <http://chronomap.local/ontology/nope> "
                                        "<http://chronomap.local/feature/b> .\n";
        try {
            (void)Store::from_ntriples(text);
            FAIL("expected schema violation");
        } catch (const StoreError& e) {
            CHECK(e.code() == StoreError::Code::schema_violation);
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("malformed line") {
        try {
            (void)Store::from_ntriples(good + "<http://x/a> <http://x/b>\n");
            FAIL("expected parse error");
        } catch (const StoreError& e) {
            CHECK(e.code() == StoreError::Code::parse_error);
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("empty file") {
        const auto path = temp_file("empty.nt");
        std::ofstream(path).close();
        std::filesystem::remove(Store::schema_path(path));
        CHECK(Store::load(path).size() == 0);
    }
}

TEST_CASE("spatial lookup") {
    Store store;
    const auto h1 = store.add_geometry(chronomap::geo::parse_wkt("POLYGON ((0 0, 10 0, 10 10, 0 10, 0 0))"));
    const auto h2 = store.add_geometry(chronomap::geo::parse_wkt("POINT (100 100)"));
    store.insert(feat("a"), prop("wkt"), Term::geometry(h1));
    store.insert(feat("b"), prop("wkt"), Term::geometry(h2));
    store.seal();
    CHECK(store.features_in({5, 5, 6, 6}) == std::vector<std::string>{feat("a").text()});
    CHECK(store.features_in({0, 0, 200, 200}).size() == 2);
}
