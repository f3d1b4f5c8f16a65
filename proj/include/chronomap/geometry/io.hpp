#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "chronomap/geometry/geometry.hpp"

// WKT and GeoJSON geometry serialization.

namespace chronomap::geo {

/// Accepts POINT, LINESTRING, POLYGON and MULTIPOLYGON (including
/// MULTIPOLYGON EMPTY), case-insensitive. Throws GeometryError with the
/// character offset on malformed input.
Geometry parse_wkt(std::string_view text);

/// Full-precision WKT in fixed notation, e.g. "POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))".
std::string to_wkt(const Geometry& g);

Geometry from_geojson(const nlohmann::json& geometry);
nlohmann::json to_geojson(const Geometry& g);

/// Shortest round-trip decimal in fixed notation ("12", "0.1", "-3.25").
std::string format_number(double v);

}  // namespace chronomap::geo
