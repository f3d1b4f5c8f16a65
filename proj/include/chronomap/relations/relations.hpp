#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chronomap/geometry/geometry.hpp"
#include "chronomap/kgstore/store.hpp"

namespace chronomap::relations {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RelationConfig {
    double eps_m{25.0};
    double near_m{100.0};
    double cardinal_max_m{2000.0};
    double change_iou{0.3};
    double transform_overlap{0.5};
    /// Empty means: the distinct years present in the data.
    std::vector<int> timestamps;

    /// Throws ConfigError on negative distances, ratios outside (0, 1] or
    /// timestamps that are not strictly increasing.
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static RelationConfig from_json(const nlohmann::json& j);
    /// SHA-256 of the canonical JSON form, recorded with every edge.
    [[nodiscard]] std::string hash() const;
};

struct FeatureView {
    std::string iri;
    std::string type;
    int year{0};
    geo::Geometry geometry;
};

struct RelationEdge {
    std::string from;
    std::string to;
    std::string predicate;
    std::string metric;
    double value{0.0};

    friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

/// Orders by (from, to, predicate).
bool edge_less(const RelationEdge& a, const RelationEdge& b);

/// Relation predicate IRI for "target lies in direction d of source".
std::string cardinal_predicate(geo::CardinalDirection d);

/// Features with featureType, year and wkt, ordered by IRI.
std::vector<FeatureView> features_from_store(const kg::Store& store);

/// Index pairs (i < j) whose bounding boxes, each expanded by the largest
/// distance threshold, intersect.
std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(const std::vector<FeatureView>& features,
                                                                 const RelationConfig& cfg);

/// Topological, proximity and cardinal edges among features of one year,
/// both directions, sorted.
std::vector<RelationEdge> compute_spatial(const std::vector<FeatureView>& features, const RelationConfig& cfg);

/// Change and transform edges between adjacent timestamps, sorted.
std::vector<RelationEdge> compute_temporal(const std::vector<FeatureView>& features, const RelationConfig& cfg);

/// Spatial edges for every year plus temporal edges.
std::vector<RelationEdge> compute_all(const std::vector<FeatureView>& features, const RelationConfig& cfg);

/// Inserts edges; returns the number of new triples. When `provenance` is
/// given, one JSON line per edge is written to it.
std::size_t materialize(const std::vector<RelationEdge>& edges, kg::Store& store, const RelationConfig& cfg,
                        std::ostream* provenance = nullptr);

/// Relation triples whose declared inverse is missing, as "s p o" strings.
std::vector<std::string> missing_inverses(const kg::Store& store);

}  // namespace chronomap::relations
