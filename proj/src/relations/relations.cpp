#include "chronomap/relations/relations.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "chronomap/common/hash.hpp"
#include "chronomap/geometry/spatial_index.hpp"
#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::relations {

using nlohmann::json;

void RelationConfig::validate() const {
    for (double d : {eps_m, near_m, cardinal_max_m}) {
        if (!(d >= 0.0)) throw ConfigError("relation distances must be >= 0");
    }
    for (double r : {change_iou, transform_overlap}) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("change_iou and transform_overlap must lie in (0, 1]");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        if (timestamps[i] <= timestamps[i - 1]) throw ConfigError("timestamps must be strictly increasing");
    }
}

json RelationConfig::to_json() const {
    return {{"eps_m", eps_m},
            {"near_m", near_m},
            {"cardinal_max_m", cardinal_max_m},
            {"change_iou", change_iou},
            {"transform_overlap", transform_overlap},
            {"timestamps", timestamps}};
}

RelationConfig RelationConfig::from_json(const json& j) {
    RelationConfig cfg;
    try {
        cfg.eps_m = j.value("eps_m", cfg.eps_m);
        cfg.near_m = j.value("near_m", cfg.near_m);
        cfg.cardinal_max_m = j.value("cardinal_max_m", cfg.cardinal_max_m);
        cfg.change_iou = j.value("change_iou", cfg.change_iou);
        cfg.transform_overlap = j.value("transform_overlap", cfg.transform_overlap);
        cfg.timestamps = j.value("timestamps", cfg.timestamps);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad relation config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string RelationConfig::hash() const { return sha256_hex(to_json().dump()); }

bool edge_less(const RelationEdge& a, const RelationEdge& b) {
    return std::tie(a.from, a.to, a.predicate) < std::tie(b.from, b.to, b.predicate);
}

std::string cardinal_predicate(geo::CardinalDirection d) {
    using geo::CardinalDirection;
    switch (d) {
        case CardinalDirection::E: return kg::cmr("eastOf");
        case CardinalDirection::NE: return kg::cmr("northEastOf");
        case CardinalDirection::N: return kg::cmr("northOf");
        case CardinalDirection::NW: return kg::cmr("northWestOf");
        case CardinalDirection::W: return kg::cmr("westOf");
        case CardinalDirection::SW: return kg::cmr("southWestOf");
        case CardinalDirection::S: return kg::cmr("southOf");
        case CardinalDirection::SE: return kg::cmr("southEastOf");
    }
    return {};
}

std::vector<FeatureView> features_from_store(const kg::Store& store) {
    const auto P = [](std::string_view l) { return kg::Term::iri(kg::cmo(l)); };
    std::vector<FeatureView> out;
    for (const auto& t : store.match(std::nullopt, P("featureType"), std::nullopt)) {
        const auto year = store.match(t.subject, P("year"), std::nullopt);
        const auto wkt = store.match(t.subject, P("wkt"), std::nullopt);
        if (year.empty() || wkt.empty()) continue;
        const auto& g = store.geometry(wkt.front().object.handle());
        if (g.empty()) continue;
        out.push_back({t.subject.text(), t.object.text(), static_cast<int>(year.front().object.as_integer()), g});
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(const std::vector<FeatureView>& features,
                                                                 const RelationConfig& cfg) {
    const double reach = std::max({cfg.eps_m, cfg.near_m, cfg.cardinal_max_m});
    std::vector<geo::BBox> boxes;
    boxes.reserve(features.size());
    for (const auto& f : features) boxes.push_back(f.geometry.bbox().expanded(reach));
    const geo::SpatialIndex index(boxes);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (std::size_t j : index.query(boxes[i])) {
            if (j > i) out.emplace_back(i, j);
        }
    }
    return out;
}

namespace {

void both_ways(std::vector<RelationEdge>& out, const std::string& a, const std::string& b, const std::string& forward,
               const std::string& backward, const char* metric, double value) {
    out.push_back({a, b, forward, metric, value});
    out.push_back({b, a, backward, metric, value});
}

void finish(std::vector<RelationEdge>& edges) {
    std::sort(edges.begin(), edges.end(), edge_less);
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const RelationEdge& x, const RelationEdge& y) { return !edge_less(x, y) && !edge_less(y, x); }),
                edges.end());
}

}  // namespace

std::vector<RelationEdge> compute_spatial(const std::vector<FeatureView>& features, const RelationConfig& cfg) {
    cfg.validate();
    using geo::Relation;
    const std::string intersects = kg::cmr("intersects");
    const std::string touches = kg::cmr("touches");
    const std::string contains = kg::cmr("contains");
    const std::string within = kg::cmr("within");
    const std::string crosses = kg::cmr("crosses");
    const std::string near = kg::cmr("near");

    std::vector<RelationEdge> out;
    for (const auto& [i, j] : candidate_pairs(features, cfg)) {
        const FeatureView& a = features[i];
        const FeatureView& b = features[j];
        if (a.iri == b.iri) continue;
        const double dist = geo::distance(a.geometry, b.geometry);
        const geo::RelationSet rs = geo::relate(a.geometry, b.geometry, cfg.eps_m);
        if (rs.has(Relation::intersects)) {
            both_ways(out, a.iri, b.iri, intersects, intersects, "distance", dist);
            if (rs.has(Relation::touches)) both_ways(out, a.iri, b.iri, touches, touches, "distance", dist);
            if (rs.has(Relation::contains)) both_ways(out, a.iri, b.iri, contains, within, "distance", dist);
            if (rs.has(Relation::within)) both_ways(out, a.iri, b.iri, within, contains, "distance", dist);
            if (rs.has(Relation::crosses)) both_ways(out, a.iri, b.iri, crosses, crosses, "distance", dist);
        } else if (dist > 0.0 && dist <= cfg.near_m) {
            both_ways(out, a.iri, b.iri, near, near, "distance", dist);
        }
        const geo::Point ca = geo::centroid(a.geometry);
        const geo::Point cb = geo::centroid(b.geometry);
        const double cdist = std::hypot(cb.x - ca.x, cb.y - ca.y);
        if (ca != cb && cdist <= cfg.cardinal_max_m) {
            // b lies in direction d as seen from a.
            const geo::CardinalDirection d = geo::cardinal(ca, cb);
            both_ways(out, b.iri, a.iri, cardinal_predicate(d), cardinal_predicate(geo::opposite(d)),
                      "centroid_distance", cdist);
        }
    }
    finish(out);
    return out;
}

std::vector<RelationEdge> compute_temporal(const std::vector<FeatureView>& features, const RelationConfig& cfg) {
    cfg.validate();
    std::vector<int> years = cfg.timestamps;
    if (years.empty()) {
        std::set<int> seen;
        for (const auto& f : features) seen.insert(f.year);
        years.assign(seen.begin(), seen.end());
    }
    std::map<int, std::vector<std::size_t>> by_year;
    for (std::size_t i = 0; i < features.size(); ++i) by_year[features[i].year].push_back(i);

    const std::string changed_to = kg::cmr("changedTo");
    const std::string changed_from = kg::cmr("changedFrom");
    const std::string transformed_to = kg::cmr("transformedTo");
    const std::string transformed_from = kg::cmr("transformedFrom");

    std::vector<RelationEdge> out;
    for (std::size_t y = 0; y + 1 < years.size(); ++y) {
        const auto& older = by_year[years[y]];
        const auto& newer = by_year[years[y + 1]];
        std::vector<geo::BBox> boxes;
        for (auto k : newer) boxes.push_back(features[k].geometry.bbox());
        const geo::SpatialIndex index(boxes);
        for (auto ia : older) {
            const FeatureView& a = features[ia];
            for (auto slot : index.query(a.geometry.bbox().expanded(cfg.eps_m))) {
                const FeatureView& b = features[newer[slot]];
                if (a.type == b.type) {
                    if (a.geometry.is_areal() && b.geometry.is_areal()) {
                        const double iou = geo::overlap_ratio(a.geometry, b.geometry);
                        if (iou >= cfg.change_iou) both_ways(out, a.iri, b.iri, changed_to, changed_from, "iou", iou);
                    } else if (a.geometry.is_linear() && b.geometry.is_linear()) {
                        const double la = geo::length(a.geometry);
                        const double lb = geo::length(b.geometry);
                        if (la == 0.0 || lb == 0.0) continue;
                        const double share = std::min(geo::length_within(a.geometry, b.geometry, cfg.eps_m) / la,
                                                      geo::length_within(b.geometry, a.geometry, cfg.eps_m) / lb);
                        if (share >= cfg.change_iou) {
                            both_ways(out, a.iri, b.iri, changed_to, changed_from, "length_share", share);
                        }
                    } else if (a.geometry.is_point() && b.geometry.is_point()) {
                        const double d = geo::distance(a.geometry, b.geometry);
                        if (d <= cfg.eps_m) both_ways(out, a.iri, b.iri, changed_to, changed_from, "distance", d);
                    }
                } else if (a.geometry.is_areal() && b.geometry.is_areal()) {
                    const double smaller = std::min(geo::area(a.geometry), geo::area(b.geometry));
                    if (smaller <= 0.0) continue;
                    const double inter = geo::intersection_area(a.geometry, b.geometry);
                    if (inter > 0.0 && inter >= cfg.transform_overlap * smaller) {
                        both_ways(out, a.iri, b.iri, transformed_to, transformed_from, "overlap_share", inter / smaller);
                    }
                }
            }
        }
    }
    finish(out);
    return out;
}

std::vector<RelationEdge> compute_all(const std::vector<FeatureView>& features, const RelationConfig& cfg) {
    std::map<int, std::vector<FeatureView>> by_year;
    for (const auto& f : features) by_year[f.year].push_back(f);
    std::vector<RelationEdge> out;
    for (const auto& [year, group] : by_year) {
        auto edges = compute_spatial(group, cfg);
        out.insert(out.end(), edges.begin(), edges.end());
    }
    auto temporal = compute_temporal(features, cfg);
    out.insert(out.end(), temporal.begin(), temporal.end());
    finish(out);
    return out;
}

std::size_t materialize(const std::vector<RelationEdge>& edges, kg::Store& store, const RelationConfig& cfg,
                        std::ostream* provenance) {
    std::size_t added = 0;
    const std::string hash = provenance ? cfg.hash() : std::string();
    for (const auto& e : edges) {
        if (e.from == e.to) throw std::logic_error("self edge on " + e.from);
        if (store.schema().relation(e.predicate) == nullptr) {
            throw std::logic_error("edge predicate missing from schema: " + e.predicate);
        }
        if (store.insert(kg::Term::iri(e.from), kg::Term::iri(e.predicate), kg::Term::iri(e.to))) ++added;
        if (provenance) {
            *provenance << json{{"from", e.from},
                                {"to", e.to},
                                {"predicate", e.predicate},
                                {"metric", e.metric},
                                {"value", e.value},
                                {"config-hash", hash}}
                               .dump()
                        << '\n';
        }
    }
    return added;
}

std::vector<std::string> missing_inverses(const kg::Store& store) {
    std::vector<std::string> out;
    for (const auto& rel : store.schema().relations()) {
        if (!rel.inverse) continue;
        const kg::Term inverse = kg::Term::iri(*rel.inverse);
        for (const auto& t : store.match(std::nullopt, kg::Term::iri(rel.iri), std::nullopt)) {
            if (store.match(t.object, inverse, t.subject).empty()) {
                out.push_back(t.subject.text() + " " + rel.iri + " " + t.object.text());
            }
        }
    }
    return out;
}

}  // namespace chronomap::relations
