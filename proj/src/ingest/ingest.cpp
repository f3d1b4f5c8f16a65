#include "chronomap/ingest/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "chronomap/geometry/io.hpp"
#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::ingest {

using nlohmann::json;

namespace {

std::string normalize_name(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    const auto last = s.find_last_not_of(" \t\r\n");
    s = first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IngestError(path.string() + ": " + e.what());
    }
}

std::string attribute_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

}  // namespace

IngestConfig IngestConfig::from_json(const json& j) {
    IngestConfig cfg;
    cfg.type_attribute = j.value("type_attribute", cfg.type_attribute);
    cfg.eps_m = j.value("eps_m", cfg.eps_m);
    if (j.contains("enrich")) cfg.cap_m = j.at("enrich").value("cap_m", cfg.cap_m);
    if (cfg.eps_m < 0 || cfg.cap_m < 0) throw IngestError("eps_m and enrich.cap_m must be >= 0");
    return cfg;
}

std::vector<kg::Triple> derive_metrics(const FeatureRecord& f) {
    const kg::Term s = kg::Term::iri(f.iri);
    if (f.geometry.is_areal()) {
        return {{s, kg::Term::iri(kg::cmo("areaSqm")), kg::Term::integer(std::llround(geo::area(f.geometry)))}};
    }
    if (f.geometry.is_linear()) {
        return {{s, kg::Term::iri(kg::cmo("lengthM")), kg::Term::integer(std::llround(geo::length(f.geometry)))}};
    }
    return {};
}

std::vector<std::string> assign_municipality(const FeatureRecord& f, const std::vector<MunicipalityBoundary>& boundaries,
                                             double eps_m) {
    if (boundaries.empty()) throw IngestError("no municipality boundaries loaded");
    std::vector<std::string> out;
    const geo::BBox box = f.geometry.bbox().expanded(eps_m);
    for (const auto& b : boundaries) {
        if (!box.intersects(b.geometry.bbox())) continue;
        if (geo::relate(f.geometry, b.geometry, eps_m).has(geo::Relation::intersects)) out.push_back(b.name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<GazetteerMatch> enrich(const FeatureRecord& f, GazetteerClient& client, double cap_m) {
    const geo::Point c = geo::centroid(f.geometry);
    std::optional<GazetteerMatch> best;
    for (const auto& e : client.candidates(f.type, c, cap_m)) {
        if (e.feature_class != f.type) continue;
        const double d = std::hypot(e.point.x - c.x, e.point.y - c.y);
        if (d > cap_m) continue;
        if (!best || d < best->distance || (d == best->distance && e.external_id < best->external_id)) {
            best = GazetteerMatch{e.name, e.external_id, d};
        }
    }
    return best;
}

FixtureGazetteer FixtureGazetteer::from_json(const json& j) {
    if (!j.is_array()) throw IngestError("gazetteer fixture must be a JSON array");
    std::vector<GazetteerEntry> entries;
    try {
        for (const auto& e : j) {
            const auto& pt = e.at("point");
            entries.push_back({normalize_name(e.at("class").get<std::string>()), e.at("name").get<std::string>(),
                               e.at("external-id").get<std::string>(), {pt.at(0).get<double>(), pt.at(1).get<double>()}});
        }
    } catch (const json::exception& ex) {
        throw IngestError(std::string("malformed gazetteer entry: ") + ex.what());
    }
    return FixtureGazetteer(std::move(entries));
}

FixtureGazetteer FixtureGazetteer::from_file(const std::filesystem::path& path) { return from_json(read_json(path)); }

std::vector<GazetteerEntry> FixtureGazetteer::candidates(const std::string& feature_class, geo::Point near,
                                                         double radius_m) {
    std::vector<GazetteerEntry> out;
    for (const auto& e : entries_) {
        if (e.feature_class == feature_class && std::hypot(e.point.x - near.x, e.point.y - near.y) <= radius_m) {
            out.push_back(e);
        }
    }
    return out;
}

std::vector<MunicipalityBoundary> boundaries_from_json(const json& j) {
    if (!j.is_object() || j.value("type", "") != "FeatureCollection" || !j.contains("features")) {
        throw IngestError("municipality file must be a GeoJSON FeatureCollection");
    }
    std::vector<MunicipalityBoundary> out;
    for (const auto& f : j.at("features")) {
        const auto& props = f.value("properties", json::object());
        const std::string name = normalize_name(props.value("name", ""));
        if (name.empty()) throw IngestError("municipality boundary without a name");
        geo::Geometry g;
        try {
            g = geo::from_geojson(f.value("geometry", json()));
        } catch (const geo::GeometryError& e) {
            throw IngestError("municipality " + name + ": " + e.what());
        }
        if (!g.is_areal()) throw IngestError("municipality " + name + " is not areal");
        for (const auto& b : out) {
            if (b.name == name) throw IngestError("duplicate municipality name: " + name);
        }
        out.push_back({name, std::move(g)});
    }
    return out;
}

std::vector<MunicipalityBoundary> load_boundaries(const std::filesystem::path& path) {
    return boundaries_from_json(read_json(path));
}

Ingestor::Ingestor(IngestConfig cfg, std::vector<MunicipalityBoundary> boundaries, GazetteerClient* gazetteer)
    : cfg_(std::move(cfg)), boundaries_(std::move(boundaries)), gazetteer_(gazetteer) {}

void Ingestor::warn(std::string message) { report_.warnings.push_back(std::move(message)); }

std::size_t Ingestor::ingest_features(const std::filesystem::path& path, int year, const std::string& sheet) {
    return ingest_collection(read_json(path), year, sheet);
}

std::size_t Ingestor::ingest_collection(const json& collection, int year, const std::string& sheet) {
    if (year < 1000 || year > 9999) throw IngestError("year must have four digits: " + std::to_string(year));
    if (!collection.is_object() || collection.value("type", "") != "FeatureCollection" ||
        !collection.contains("features") || !collection.at("features").is_array()) {
        throw IngestError("input is not a GeoJSON FeatureCollection");
    }
    const auto& features = collection.at("features");
    std::size_t count = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        ++report_.input;
        const std::string where = sheet + "/" + std::to_string(year) + " feature " + std::to_string(i);
        const json props = f.is_object() ? f.value("properties", json::object()) : json::object();
        FeatureRecord rec;
        if (props.is_object()) {
            for (const auto& [k, v] : props.items()) rec.attributes[k] = attribute_text(v);
        }
        const auto type_it = rec.attributes.find(cfg_.type_attribute);
        rec.type = type_it == rec.attributes.end() ? std::string() : normalize_name(type_it->second);
        if (rec.type.empty()) {
            ++report_.skipped;
            warn(where + ": missing type attribute '" + cfg_.type_attribute + "'");
            continue;
        }
        try {
            rec.geometry = geo::from_geojson(f.is_object() ? f.value("geometry", json()) : json());
            if (rec.geometry.empty()) throw geo::GeometryError(geo::GeometryError::Code::empty_geometry, "empty");
        } catch (const geo::GeometryError& e) {
            ++report_.skipped;
            warn(where + ": invalid geometry (" + e.what() + ")");
            continue;
        }
        char local[16];
        std::snprintf(local, sizeof local, "%04zu", i);
        rec.local_id = local;
        rec.iri = kg::feature_iri(sheet, year, rec.type, i);
        rec.year = year;
        rec.sheet = sheet;
        records_.push_back(std::move(rec));
        ++report_.ingested;
        ++count;
    }
    return count;
}

void Ingestor::emit(kg::Store& store) {
    const auto P = [](std::string_view local) { return kg::Term::iri(kg::cmo(local)); };
    for (const auto& rec : records_) {
        const kg::Term s = kg::Term::iri(rec.iri);
        store.insert(s, P("featureType"), kg::Term::string(rec.type));
        store.insert(s, P("year"), kg::Term::integer(rec.year));
        store.insert(s, P("sheet"), kg::Term::string(rec.sheet));
        store.insert(s, P("wkt"), kg::Term::geometry(store.add_geometry(rec.geometry)));
        for (const auto& t : derive_metrics(rec)) store.insert(t);

        if (!boundaries_.empty()) {
            const auto names = assign_municipality(rec, boundaries_, cfg_.eps_m);
            if (names.empty()) warn(rec.iri + ": outside all municipality boundaries");
            for (const auto& n : names) store.insert(s, P("municipality"), kg::Term::string(n));
        }
        if (gazetteer_ != nullptr) {
            try {
                if (const auto m = enrich(rec, *gazetteer_, cfg_.cap_m)) {
                    store.insert(s, P("currentName"), kg::Term::string(m->name));
                    store.insert(s, P("osmId"), kg::Term::string(m->external_id));
                }
            } catch (const GazetteerError& e) {
                warn(rec.iri + ": gazetteer lookup failed (" + e.what() + ")");
            }
        }
    }
}

}  // namespace chronomap::ingest
