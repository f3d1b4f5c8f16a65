#include <cmath>

#include <boost/geometry.hpp>

#include "chronomap/geometry/geometry.hpp"

namespace chronomap::geo {

namespace {

namespace bg = boost::geometry;

using BPoint = bg::model::d2::point_xy<double>;
using BPolygon = bg::model::polygon<BPoint, false, true>;
using BMulti = bg::model::multi_polygon<BPolygon>;
using BLine = bg::model::linestring<BPoint>;
using BMultiPoint = bg::model::multi_point<BPoint>;

constexpr int kPointsPerCircle = 64;

BPolygon to_boost(const Polygon& p) {
    BPolygon out;
    for (const auto& v : p.exterior) out.outer().emplace_back(v.x, v.y);
    for (const auto& h : p.holes) {
        out.inners().emplace_back();
        for (const auto& v : h) out.inners().back().emplace_back(v.x, v.y);
    }
    return out;
}

Ring from_boost(const bg::model::ring<BPoint, false, true>& r) {
    Ring out;
    out.reserve(r.size());
    for (const auto& v : r) out.push_back({v.x(), v.y()});
    return out;
}

Geometry from_boost(const BMulti& m) {
    std::vector<Polygon> parts;
    for (const auto& p : m) {
        Polygon poly{from_boost(p.outer()), {}};
        for (const auto& h : p.inners()) poly.holes.push_back(from_boost(h));
        parts.push_back(std::move(poly));
    }
    if (parts.size() == 1) return Geometry::polygon(std::move(parts.front()));
    return Geometry::multipolygon(std::move(parts));
}

template <typename Input>
BMulti run_buffer(const Input& in, double r) {
    const bg::strategy::buffer::distance_symmetric<double> dist(r);
    const bg::strategy::buffer::join_round join(kPointsPerCircle);
    const bg::strategy::buffer::end_round end(kPointsPerCircle);
    const bg::strategy::buffer::point_circle circle(kPointsPerCircle);
    const bg::strategy::buffer::side_straight side;
    BMulti out;
    bg::buffer(in, out, dist, side, join, end, circle);
    return out;
}

Geometry hull(const Geometry& g) {
    BMultiPoint pts;
    for (const auto& s : segments_of(g)) {
        pts.emplace_back(s.a.x, s.a.y);
        pts.emplace_back(s.b.x, s.b.y);
    }
    BPolygon h;
    bg::convex_hull(pts, h);
    Ring ring = from_boost(h.outer());
    while (ring.size() < 4) ring.push_back(ring.empty() ? Point{} : ring.back());
    return Geometry::polygon(std::move(ring));
}

}  // namespace

Geometry buffer(const Geometry& g, double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw GeometryError(GeometryError::Code::negative_radius, "buffer radius must be >= 0");
    }
    if (g.empty()) throw GeometryError(GeometryError::Code::empty_geometry, "buffer of empty geometry");
    if (r == 0.0) return g.is_areal() ? g : hull(g);

    switch (g.kind()) {
        case GeometryKind::point:
            return from_boost(run_buffer(BPoint{g.coords()[0].x, g.coords()[0].y}, r));
        case GeometryKind::linestring: {
            BLine line;
            for (const auto& p : g.coords()) line.emplace_back(p.x, p.y);
            bg::unique(line);
            if (line.size() < 2) return from_boost(run_buffer(line.front(), r));
            return from_boost(run_buffer(line, r));
        }
        default: {
            BMulti m;
            for (const auto& p : g.polygons()) m.push_back(to_boost(p));
            return from_boost(run_buffer(m, r));
        }
    }
}

}  // namespace chronomap::geo
