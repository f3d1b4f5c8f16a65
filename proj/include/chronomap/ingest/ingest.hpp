#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronomap/geometry/geometry.hpp"
#include "chronomap/kgstore/store.hpp"

namespace chronomap::ingest {

struct FeatureRecord {
    std::string local_id;
    std::string iri;
    std::string type;
    int year{0};
    std::string sheet;
    geo::Geometry geometry;
    std::map<std::string, std::string> attributes;
};

struct MunicipalityBoundary {
    std::string name;
    geo::Geometry geometry;
};

struct GazetteerEntry {
    std::string feature_class;
    std::string name;
    std::string external_id;
    geo::Point point;
};

struct GazetteerMatch {
    std::string name;
    std::string external_id;
    double distance{0.0};
};

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Transport-level failure of a gazetteer lookup. Never fatal for ingest.
class GazetteerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GazetteerClient {
public:
    virtual ~GazetteerClient() = default;
    /// Candidates of one class around a location. May over-return; the caller
    /// applies the distance cap.
    virtual std::vector<GazetteerEntry> candidates(const std::string& feature_class, geo::Point near,
                                                   double radius_m) = 0;
};

/// Backed by a JSON array of {class, name, external-id, point: [x, y]}.
class FixtureGazetteer final : public GazetteerClient {
public:
    explicit FixtureGazetteer(std::vector<GazetteerEntry> entries) : entries_(std::move(entries)) {}
    static FixtureGazetteer from_file(const std::filesystem::path& path);
    static FixtureGazetteer from_json(const nlohmann::json& j);

    std::vector<GazetteerEntry> candidates(const std::string& feature_class, geo::Point near,
                                           double radius_m) override;

private:
    std::vector<GazetteerEntry> entries_;
};

/// Queries `GET {base}/candidates?class=..&x=..&y=..&radius=..`, which must
/// answer with the fixture array format.
class HttpGazetteer final : public GazetteerClient {
public:
    explicit HttpGazetteer(std::string base_url, int timeout_s = 10);
    std::vector<GazetteerEntry> candidates(const std::string& feature_class, geo::Point near,
                                           double radius_m) override;

private:
    std::string base_url_;
    int timeout_s_;
};

struct IngestConfig {
    std::string type_attribute{"type"};
    double cap_m{50.0};
    double eps_m{25.0};

    /// Reads `type_attribute`, `enrich.cap_m` and `eps_m`; absent keys keep
    /// their defaults.
    static IngestConfig from_json(const nlohmann::json& j);
};

/// Feature metrics as triples: areaSqm for areal, lengthM for linear
/// geometries, rounded to whole units; nothing for points.
std::vector<kg::Triple> derive_metrics(const FeatureRecord& f);

/// Names of all municipalities the feature intersects within eps.
std::vector<std::string> assign_municipality(const FeatureRecord& f, const std::vector<MunicipalityBoundary>& boundaries,
                                             double eps_m);

/// Nearest same-class gazetteer entry within the cap (centroid to point),
/// ties broken by the smaller external id. Transport errors propagate as
/// GazetteerError.
std::optional<GazetteerMatch> enrich(const FeatureRecord& f, GazetteerClient& client, double cap_m);

/// GeoJSON FeatureCollection with a `name` property per boundary.
std::vector<MunicipalityBoundary> load_boundaries(const std::filesystem::path& path);
std::vector<MunicipalityBoundary> boundaries_from_json(const nlohmann::json& j);

struct IngestReport {
    std::size_t input{0};
    std::size_t ingested{0};
    std::size_t skipped{0};
    std::vector<std::string> warnings;
};

/// Collects feature records from per-year files and emits their triples.
class Ingestor {
public:
    Ingestor(IngestConfig cfg, std::vector<MunicipalityBoundary> boundaries, GazetteerClient* gazetteer = nullptr);

    /// Returns the number of records ingested from this collection. Skipped
    /// features are tallied as warnings; a malformed document throws.
    std::size_t ingest_features(const std::filesystem::path& path, int year, const std::string& sheet);
    std::size_t ingest_collection(const nlohmann::json& collection, int year, const std::string& sheet);

    /// Inserts all records into the store in input order.
    void emit(kg::Store& store);

    [[nodiscard]] const std::vector<FeatureRecord>& records() const noexcept { return records_; }
    [[nodiscard]] const IngestReport& report() const noexcept { return report_; }

private:
    void warn(std::string message);

    IngestConfig cfg_;
    std::vector<MunicipalityBoundary> boundaries_;
    GazetteerClient* gazetteer_;
    std::vector<FeatureRecord> records_;
    IngestReport report_;
};

}  // namespace chronomap::ingest
