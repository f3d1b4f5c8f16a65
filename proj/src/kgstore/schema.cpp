#include "chronomap/kgstore/schema.hpp"

#include <algorithm>

#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::kg {

std::string_view to_string(Cardinality c) noexcept { return c == Cardinality::fixed ? "fixed" : "optional"; }

std::string_view to_string(Range r) noexcept {
    switch (r) {
        case Range::iri: return "iri";
        case Range::string: return "string";
        case Range::integer: return "integer";
        case Range::decimal: return "decimal";
        case Range::boolean: return "boolean";
        case Range::year: return "year";
        case Range::geometry: return "geometry";
    }
    return "?";
}

namespace {

Range parse_range(const std::string& s) {
    for (auto r : {Range::iri, Range::string, Range::integer, Range::decimal, Range::boolean, Range::year,
                   Range::geometry}) {
        if (to_string(r) == s) return r;
    }
    throw SchemaError("unknown range: " + s);
}

}  // namespace

Schema::Schema(std::vector<PropertyDef> properties, std::vector<RelationDef> relations)
    : properties_(std::move(properties)), relations_(std::move(relations)) {
    for (const auto& r : relations_) {
        if (property(r.iri) != nullptr) throw SchemaError("predicate declared twice: " + r.iri);
        if (!r.inverse) continue;
        const RelationDef* inv = relation(*r.inverse);
        if (inv == nullptr) throw SchemaError("inverse of " + r.iri + " is not declared: " + *r.inverse);
        if (inv->inverse != r.iri) throw SchemaError("inverse of " + r.iri + " is not symmetric");
    }
}

const Schema& Schema::standard() {
    static const Schema schema = [] {
        std::vector<PropertyDef> props{
            {cmo("featureType"), Cardinality::fixed, Range::string, false},
            {cmo("year"), Cardinality::fixed, Range::year, false},
            {cmo("sheet"), Cardinality::fixed, Range::string, false},
            {cmo("municipality"), Cardinality::optional, Range::string, true},
            {cmo("areaSqm"), Cardinality::optional, Range::integer, false},
            {cmo("lengthM"), Cardinality::optional, Range::integer, false},
            {cmo("currentName"), Cardinality::optional, Range::string, false},
            {cmo("osmId"), Cardinality::optional, Range::string, false},
            {cmo("wkt"), Cardinality::fixed, Range::geometry, false},
        };
        std::vector<RelationDef> rels;
        auto pair = [&](std::string_view a, std::string_view b) {
            rels.push_back({cmr(a), cmr(b)});
            if (a != b) rels.push_back({cmr(b), cmr(a)});
        };
        pair("intersects", "intersects");
        pair("touches", "touches");
        pair("contains", "within");
        pair("crosses", "crosses");
        pair("near", "near");
        pair("northOf", "southOf");
        pair("northEastOf", "southWestOf");
        pair("eastOf", "westOf");
        pair("southEastOf", "northWestOf");
        pair("changedTo", "changedFrom");
        pair("transformedTo", "transformedFrom");
        return Schema(std::move(props), std::move(rels));
    }();
    return schema;
}

const PropertyDef* Schema::property(std::string_view iri) const noexcept {
    const auto it = std::find_if(properties_.begin(), properties_.end(), [&](const auto& p) { return p.iri == iri; });
    return it == properties_.end() ? nullptr : &*it;
}

const RelationDef* Schema::relation(std::string_view iri) const noexcept {
    const auto it = std::find_if(relations_.begin(), relations_.end(), [&](const auto& r) { return r.iri == iri; });
    return it == relations_.end() ? nullptr : &*it;
}

std::optional<std::string> Schema::inverse_of(std::string_view iri) const {
    const RelationDef* r = relation(iri);
    return r ? r->inverse : std::nullopt;
}

bool Schema::accepts(Range range, const Term& v) noexcept {
    switch (range) {
        case Range::iri: return v.kind() == TermKind::iri;
        case Range::string: return v.kind() == TermKind::string;
        case Range::integer: return v.kind() == TermKind::integer;
        case Range::decimal: return v.kind() == TermKind::decimal;
        case Range::boolean: return v.kind() == TermKind::boolean;
        case Range::year: return v.kind() == TermKind::integer && v.as_integer() >= 1000 && v.as_integer() <= 9999;
        case Range::geometry: return v.kind() == TermKind::geometry;
    }
    return false;
}

nlohmann::json Schema::to_json() const {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : properties_) {
        props.push_back({{"iri", p.iri},
                         {"cardinality", to_string(p.cardinality)},
                         {"range", to_string(p.range)},
                         {"multi", p.multi}});
    }
    nlohmann::json rels = nlohmann::json::array();
    for (const auto& r : relations_) {
        rels.push_back({{"iri", r.iri}, {"inverse", r.inverse ? nlohmann::json(*r.inverse) : nlohmann::json()}});
    }
    return {{"properties", props}, {"relations", rels}};
}

Schema Schema::from_json(const nlohmann::json& j) {
    try {
        std::vector<PropertyDef> props;
        for (const auto& p : j.at("properties")) {
            const auto card = p.at("cardinality").get<std::string>();
            if (card != "fixed" && card != "optional") throw SchemaError("unknown cardinality: " + card);
            props.push_back({p.at("iri").get<std::string>(),
                             card == "fixed" ? Cardinality::fixed : Cardinality::optional,
                             parse_range(p.at("range").get<std::string>()), p.value("multi", false)});
        }
        std::vector<RelationDef> rels;
        for (const auto& r : j.at("relations")) {
            RelationDef def{r.at("iri").get<std::string>(), std::nullopt};
            if (r.contains("inverse") && !r.at("inverse").is_null()) def.inverse = r.at("inverse").get<std::string>();
            rels.push_back(std::move(def));
        }
        return Schema(std::move(props), std::move(rels));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed schema document: ") + e.what());
    }
}

}  // namespace chronomap::kg
