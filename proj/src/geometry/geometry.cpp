#include "chronomap/geometry/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "kernel.hpp"

namespace chronomap::geo {

using detail::cross;
using detail::kTol;

std::string_view to_string(GeometryKind k) noexcept {
    switch (k) {
        case GeometryKind::point: return "point";
        case GeometryKind::linestring: return "linestring";
        case GeometryKind::polygon: return "polygon";
        case GeometryKind::multipolygon: return "multipolygon";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

namespace {

void require_finite(Point p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "non-finite coordinate");
    }
}

double signed_ring_area(const Ring& r) {
    double s = 0.0;
    if (r.empty()) return 0.0;
    const Point o = r.front();
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        s += cross({0, 0}, {r[i].x - o.x, r[i].y - o.y}, {r[i + 1].x - o.x, r[i + 1].y - o.y});
    }
    return s / 2.0;
}

Ring normalize_ring(Ring ring, bool counterclockwise) {
    for (const auto& p : ring) require_finite(p);
    if (!ring.empty() && ring.front() != ring.back()) ring.push_back(ring.front());
    if (ring.size() < 4) {
        throw GeometryError(GeometryError::Code::invalid_geometry,
                            "ring needs at least 4 vertices, got " + std::to_string(ring.size()));
    }
    const double a = signed_ring_area(ring);
    if ((counterclockwise && a < 0.0) || (!counterclockwise && a > 0.0)) {
        std::reverse(ring.begin(), ring.end());
    }
    return ring;
}

Polygon normalize_polygon(Polygon p) {
    p.exterior = normalize_ring(std::move(p.exterior), true);
    for (auto& h : p.holes) h = normalize_ring(std::move(h), false);
    return p;
}

}  // namespace

Geometry Geometry::point(Point p) {
    require_finite(p);
    Geometry g;
    g.kind_ = GeometryKind::point;
    g.coords_ = {p};
    return g;
}

Geometry Geometry::linestring(std::vector<Point> points) {
    if (points.size() < 2) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "linestring needs at least 2 points");
    }
    for (const auto& p : points) require_finite(p);
    Geometry g;
    g.kind_ = GeometryKind::linestring;
    g.coords_ = std::move(points);
    return g;
}

Geometry Geometry::polygon(Ring exterior, std::vector<Ring> holes) {
    return polygon(Polygon{std::move(exterior), std::move(holes)});
}

Geometry Geometry::polygon(Polygon poly) {
    Geometry g;
    g.kind_ = GeometryKind::polygon;
    g.polygons_.push_back(normalize_polygon(std::move(poly)));
    return g;
}

Geometry Geometry::multipolygon(std::vector<Polygon> parts) {
    Geometry g;
    g.kind_ = GeometryKind::multipolygon;
    g.polygons_.reserve(parts.size());
    for (auto& p : parts) g.polygons_.push_back(normalize_polygon(std::move(p)));
    return g;
}

int Geometry::dimension() const noexcept {
    switch (kind_) {
        case GeometryKind::point: return 0;
        case GeometryKind::linestring: return 1;
        default: return 2;
    }
}

bool Geometry::empty() const noexcept { return is_areal() ? polygons_.empty() : coords_.empty(); }

BBox Geometry::bbox() const {
    if (empty()) throw GeometryError(GeometryError::Code::empty_geometry, "bbox of empty geometry");
    constexpr double inf = std::numeric_limits<double>::infinity();
    BBox b{inf, inf, -inf, -inf};
    auto grow = [&b](Point p) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    };
    for (const auto& p : coords_) grow(p);
    for (const auto& poly : polygons_) {
        for (const auto& p : poly.exterior) grow(p);
    }
    return b;
}

std::vector<Segment> segments_of(const Geometry& g) {
    std::vector<Segment> out;
    switch (g.kind()) {
        case GeometryKind::point:
            out.push_back({g.coords()[0], g.coords()[0]});
            break;
        case GeometryKind::linestring: {
            const auto c = g.coords();
            for (std::size_t i = 0; i + 1 < c.size(); ++i) out.push_back({c[i], c[i + 1]});
            break;
        }
        default:
            for (const auto& poly : g.polygons()) {
                auto add = [&out](const Ring& r) {
                    for (std::size_t i = 0; i + 1 < r.size(); ++i) out.push_back({r[i], r[i + 1]});
                };
                add(poly.exterior);
                for (const auto& h : poly.holes) add(h);
            }
    }
    return out;
}

Location locate(Point p, const Geometry& areal) {
    if (!areal.is_areal()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry, "locate needs an areal geometry");
    }
    bool inside = false;
    for (const auto& poly : areal.polygons()) {
        auto scan = [&](const Ring& r) {
            for (std::size_t i = 0; i + 1 < r.size(); ++i) {
                const Point a = r[i];
                const Point b = r[i + 1];
                if (detail::point_segment_distance(p, {a, b}) <= kTol) return true;
                if ((a.y > p.y) != (b.y > p.y)) {
                    const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if (p.x < x) inside = !inside;
                }
            }
            return false;
        };
        if (scan(poly.exterior)) return Location::boundary;
        for (const auto& h : poly.holes) {
            if (scan(h)) return Location::boundary;
        }
    }
    return inside ? Location::interior : Location::exterior;
}

// ---------------------------------------------------------------------------
// measures
// ---------------------------------------------------------------------------

double area(const Geometry& g) {
    if (!g.is_areal()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry,
                            "area of " + std::string(to_string(g.kind())));
    }
    double total = 0.0;
    for (const auto& poly : g.polygons()) {
        double a = std::abs(signed_ring_area(poly.exterior));
        for (const auto& h : poly.holes) a -= std::abs(signed_ring_area(h));
        total += a;
    }
    return std::max(0.0, total);
}

double length(const Geometry& g) {
    if (!g.is_linear()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry,
                            "length of " + std::string(to_string(g.kind())));
    }
    double total = 0.0;
    for (const auto& s : segments_of(g)) total += detail::seg_length(s);
    return total;
}

double perimeter(const Geometry& g) {
    if (!g.is_areal()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry, "perimeter needs an areal geometry");
    }
    double total = 0.0;
    for (const auto& s : segments_of(g)) total += detail::seg_length(s);
    return total;
}

double distance(const Geometry& a, const Geometry& b) {
    if (a.empty() || b.empty()) {
        throw GeometryError(GeometryError::Code::empty_geometry, "distance to empty geometry");
    }
    const auto sa = segments_of(a);
    const auto sb = segments_of(b);
    // One vertex per edge is enough to detect containment without boundary contact.
    if (b.is_areal()) {
        for (const auto& s : sa) {
            if (locate(s.a, b) != Location::exterior) return 0.0;
        }
    }
    if (a.is_areal()) {
        for (const auto& s : sb) {
            if (locate(s.a, a) != Location::exterior) return 0.0;
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : sa) {
        for (const auto& t : sb) {
            best = std::min(best, detail::segment_distance(s, t));
            if (best == 0.0) return 0.0;
        }
    }
    return best;
}

Point centroid(const Geometry& g) {
    if (g.empty()) throw GeometryError(GeometryError::Code::empty_geometry, "centroid of empty geometry");
    const auto segs = segments_of(g);
    if (g.is_point()) return g.coords()[0];

    const Point o = segs.front().a;
    if (g.is_areal()) {
        double a2 = 0.0;
        double cx = 0.0;
        double cy = 0.0;
        for (const auto& s : segs) {
            const double x0 = s.a.x - o.x;
            const double y0 = s.a.y - o.y;
            const double x1 = s.b.x - o.x;
            const double y1 = s.b.y - o.y;
            const double c = x0 * y1 - x1 * y0;
            a2 += c;
            cx += (x0 + x1) * c;
            cy += (y0 + y1) * c;
        }
        if (std::abs(a2) > 0.0) return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
        // zero-area rings fall through to the boundary centroid
    }
    double total = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& s : segs) {
        const double l = detail::seg_length(s);
        total += l;
        cx += l * ((s.a.x + s.b.x) / 2.0 - o.x);
        cy += l * ((s.a.y + s.b.y) / 2.0 - o.y);
    }
    if (total == 0.0) return o;
    return {o.x + cx / total, o.y + cy / total};
}

// ---------------------------------------------------------------------------
// clipping-based measures
// ---------------------------------------------------------------------------

double intersection_area(const Geometry& a, const Geometry& b) {
    if (!a.is_areal() || !b.is_areal()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry, "intersection_area needs areal inputs");
    }
    if (a.empty() || b.empty() || !a.bbox().intersects(b.bbox())) return 0.0;

    const auto ea = segments_of(a);
    const auto eb = segments_of(b);
    const BBox ba = a.bbox();
    const BBox bb = b.bbox();
    const Point o{ba.min_x, ba.min_y};
    auto contrib = [&o](Point p, Point q) { return (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y); };

    double twice = 0.0;
    // Pieces of a's boundary inside b, plus shared boundary running the same way.
    for (const auto& s : ea) {
        const BBox sb{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y), std::max(s.a.x, s.b.x),
                      std::max(s.a.y, s.b.y)};
        if (!sb.intersects(bb.expanded(kTol))) continue;
        for (const auto& piece : detail::split_segment(s, eb)) {
            const Point m{(piece.a.x + piece.b.x) / 2.0, (piece.a.y + piece.b.y) / 2.0};
            const Location loc = locate(m, b);
            if (loc == Location::interior ||
                (loc == Location::boundary && detail::runs_along_same_way(piece, eb))) {
                twice += contrib(piece.a, piece.b);
            }
        }
    }
    // Pieces of b's boundary strictly inside a; shared runs were counted above.
    for (const auto& s : eb) {
        const BBox sb{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y), std::max(s.a.x, s.b.x),
                      std::max(s.a.y, s.b.y)};
        if (!sb.intersects(ba.expanded(kTol))) continue;
        for (const auto& piece : detail::split_segment(s, ea)) {
            const Point m{(piece.a.x + piece.b.x) / 2.0, (piece.a.y + piece.b.y) / 2.0};
            if (locate(m, a) == Location::interior) twice += contrib(piece.a, piece.b);
        }
    }
    return std::max(0.0, twice / 2.0);
}

double length_within(const Geometry& line, const Geometry& other, double eps) {
    if (!line.is_linear()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry, "length_within needs a linestring");
    }
    const auto targets = segments_of(other);
    const double r = std::max(eps, kTol);
    double total = 0.0;
    for (const auto& s : segments_of(line)) {
        const double len = detail::seg_length(s);
        if (len == 0.0) continue;
        std::vector<detail::Interval> spans;
        for (const auto& t : targets) {
            if (auto iv = detail::capsule_interval(s, t, r)) spans.push_back(*iv);
        }
        if (other.is_areal()) {
            for (const auto& iv : detail::inside_intervals(s, targets, other)) spans.push_back(iv);
        }
        total += detail::covered_fraction(std::move(spans)) * len;
    }
    return std::min(total, length(line));
}

bool covers(const Geometry& a, const Geometry& b) {
    if (a.empty() || b.empty()) return false;
    switch (a.dimension()) {
        case 0: {
            const Point p = a.coords()[0];
            for (const auto& s : segments_of(b)) {
                if (detail::point_distance(s.a, p) > kTol || detail::point_distance(s.b, p) > kTol) return false;
            }
            return true;
        }
        case 1: {
            if (b.is_point()) return distance(a, b) <= kTol;
            if (b.is_areal()) return area(b) == 0.0 && distance(a, b) <= kTol;
            const double lb = length(b);
            if (lb == 0.0) return distance(a, Geometry::point(b.coords()[0])) <= kTol;
            return lb - length_within(b, a, 0.0) <= detail::length_tolerance(lb);
        }
        default: {
            if (b.is_point()) return locate(b.coords()[0], a) != Location::exterior;
            if (b.is_linear()) {
                const double lb = length(b);
                if (lb == 0.0) return locate(b.coords()[0], a) != Location::exterior;
                return detail::clip_line(b, a).outside <= detail::length_tolerance(lb);
            }
            const double ab = area(b);
            return ab - intersection_area(a, b) <= 1e-7 * std::max(1.0, ab);
        }
    }
}

// ---------------------------------------------------------------------------
// relate
// ---------------------------------------------------------------------------

std::string_view to_string(Relation r) noexcept {
    switch (r) {
        case Relation::intersects: return "intersects";
        case Relation::touches: return "touches";
        case Relation::contains: return "contains";
        case Relation::within: return "within";
        case Relation::crosses: return "crosses";
        case Relation::overlaps: return "overlaps";
        case Relation::disjoint: return "disjoint";
    }
    return "unknown";
}

std::vector<Relation> RelationSet::members() const {
    std::vector<Relation> out;
    for (auto r : {Relation::intersects, Relation::touches, Relation::contains, Relation::within,
                   Relation::crosses, Relation::overlaps, Relation::disjoint}) {
        if (has(r)) out.push_back(r);
    }
    return out;
}

std::string RelationSet::to_string() const {
    std::string s = "{";
    for (auto r : members()) {
        if (s.size() > 1) s += ", ";
        s += geo::to_string(r);
    }
    return s + "}";
}

namespace {

struct Interaction {
    bool interacts{false};
    bool crosses{false};
    bool shared{false};
};

bool is_closed_line(const Geometry& g) { return g.coords().front() == g.coords().back(); }

double distance_to_line_ends(Point p, const Geometry& line) {
    if (is_closed_line(line)) return std::numeric_limits<double>::infinity();
    return std::min(detail::point_distance(p, line.coords().front()),
                    detail::point_distance(p, line.coords().back()));
}

double distance_to_boundary(Point p, const Geometry& areal) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segments_of(areal)) best = std::min(best, detail::point_segment_distance(p, s));
    return best;
}

bool has_interior_crossing(const Geometry& p, const Geometry& q, double eps) {
    const auto sp = segments_of(p);
    const auto sq = segments_of(q);
    for (const auto& s : sp) {
        for (const auto& t : sq) {
            const auto x = detail::crossing_point(s, t);
            if (!x) continue;
            if (distance_to_line_ends(*x, p) > eps && distance_to_line_ends(*x, q) > eps) return true;
        }
    }
    return false;
}

// Length of p running within eps of q, ignoring the chord each proper
// crossing contributes; a crossing alone is not a shared run.
double shared_run(const Geometry& p, const Geometry& q, double eps) {
    const auto targets = segments_of(q);
    const double r = std::max(eps, kTol);
    double total = 0.0;
    for (const auto& s : segments_of(p)) {
        const double len = detail::seg_length(s);
        if (len == 0.0) continue;
        std::vector<detail::Interval> spans;
        for (const auto& t : targets) {
            if (detail::crossing_point(s, t)) continue;
            if (auto iv = detail::capsule_interval(s, t, r)) spans.push_back(*iv);
        }
        total += detail::covered_fraction(std::move(spans)) * len;
    }
    return total;
}

// p and q in canonical order, so p.dimension() <= q.dimension().
Interaction interaction(const Geometry& p, const Geometry& q, double eps) {
    Interaction ix;
    const double len_eps = eps + kTol;
    switch (p.dimension() * 3 + q.dimension()) {
        case 0:  // point / point
            ix.interacts = true;
            ix.shared = true;
            break;
        case 1: {  // point / line
            const Point pt = p.coords()[0];
            ix.interacts = distance_to_line_ends(pt, q) > eps;
            break;
        }
        case 2: {  // point / area
            const Point pt = p.coords()[0];
            ix.interacts = locate(pt, q) == Location::interior && distance_to_boundary(pt, q) > eps;
            break;
        }
        case 4: {  // line / line
            const double shared = std::min(shared_run(p, q, eps), shared_run(q, p, eps));
            ix.shared = shared > len_eps;
            const bool crossing = has_interior_crossing(p, q, eps);
            ix.interacts = ix.shared || crossing;
            ix.crosses = crossing && !ix.shared;
            break;
        }
        case 5: {  // line / area
            const double inside = detail::clip_line(p, q).inside;
            const double outside = length(p) - length_within(p, q, eps);
            ix.interacts = inside > len_eps;
            ix.crosses = ix.interacts && outside > len_eps;
            break;
        }
        case 8: {  // area / area
            ix.interacts = intersection_area(p, q) > eps * eps + 1e-6;
            ix.shared = ix.interacts;
            break;
        }
        default:
            break;
    }
    return ix;
}

bool buffered_covers(const Geometry& a, const Geometry& b, double eps) {
    if (eps == 0.0) return covers(a, b);
    if (b.is_point()) return distance(a, b) <= eps;
    if (b.is_linear()) {
        const double lb = length(b);
        if (lb == 0.0) return distance(a, b) <= eps;
        return lb - length_within(b, a, eps) <= detail::length_tolerance(lb);
    }
    return covers(buffer(a, eps), b);
}

}  // namespace

RelationSet relate(const Geometry& a, const Geometry& b, double eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
        throw GeometryError(GeometryError::Code::negative_radius, "relate tolerance must be >= 0");
    }
    RelationSet out;
    if (distance(a, b) > eps) {
        out.add(Relation::disjoint);
        return out;
    }
    out.add(Relation::intersects);

    const bool swap = detail::canonical_less(b, a);
    const Geometry& p = swap ? b : a;
    const Geometry& q = swap ? a : b;
    const Interaction ix = interaction(p, q, eps);
    if (!ix.interacts) {
        out.add(Relation::touches);
        return out;
    }
    const bool a_covers_b = buffered_covers(a, b, eps);
    const bool b_covers_a = buffered_covers(b, a, eps);
    if (a_covers_b) out.add(Relation::contains);
    if (b_covers_a) out.add(Relation::within);
    if (ix.crosses) out.add(Relation::crosses);
    if (a.dimension() == b.dimension() && ix.shared && !a_covers_b && !b_covers_a) {
        out.add(Relation::overlaps);
    }
    return out;
}

// ---------------------------------------------------------------------------
// cardinal directions
// ---------------------------------------------------------------------------

std::string_view to_string(CardinalDirection d) noexcept {
    static constexpr std::string_view names[] = {"E", "NE", "N", "NW", "W", "SW", "S", "SE"};
    return names[static_cast<int>(d)];
}

CardinalDirection opposite(CardinalDirection d) noexcept {
    return static_cast<CardinalDirection>((static_cast<int>(d) + 4) % 8);
}

CardinalDirection cardinal(Point from, Point to) {
    const double dx = to.x - from.x;
    const double dy = to.y - from.y;
    if (dx == 0.0 && dy == 0.0) {
        throw GeometryError(GeometryError::Code::no_direction, "coincident centroids have no direction");
    }
    // Lower half-plane directions are derived from their opposites, which
    // makes cardinal(a, b) == opposite(cardinal(b, a)) hold exactly.
    const bool upper = dy > 0.0 || (dy == 0.0 && dx > 0.0);
    if (!upper) return opposite(cardinal(to, from));
    const double deg = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    const int sector = std::clamp(static_cast<int>(std::floor((deg + 22.5) / 45.0)), 0, 4);
    return static_cast<CardinalDirection>(sector);
}

CardinalDirection cardinal(const Geometry& from, const Geometry& to) {
    return cardinal(centroid(from), centroid(to));
}

// ---------------------------------------------------------------------------
// overlap ratio
// ---------------------------------------------------------------------------

namespace {

struct IndexRange {
    long lo;
    long hi;
};

// Column ranges whose cell centers fall inside the geometry on one scan row.
std::vector<IndexRange> row_ranges(const std::vector<Segment>& edges, double y, double min_x, double cell,
                                   long ncols) {
    std::vector<double> xs;
    for (const auto& e : edges) {
        if ((e.a.y > y) != (e.b.y > y)) {
            xs.push_back(e.a.x + (y - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y));
        }
    }
    std::sort(xs.begin(), xs.end());
    std::vector<IndexRange> out;
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
        long lo = static_cast<long>(std::ceil((xs[i] - min_x) / cell - 0.5));
        long hi = static_cast<long>(std::floor((xs[i + 1] - min_x) / cell - 0.5));
        lo = std::max(lo, 0L);
        hi = std::min(hi, ncols - 1);
        if (lo > hi) continue;
        if (!out.empty() && lo <= out.back().hi + 0) {
            out.back().hi = std::max(out.back().hi, hi);
        } else {
            out.push_back({lo, hi});
        }
    }
    return out;
}

long range_count(const std::vector<IndexRange>& r) {
    long n = 0;
    for (const auto& x : r) n += x.hi - x.lo + 1;
    return n;
}

long intersect_count(const std::vector<IndexRange>& a, const std::vector<IndexRange>& b) {
    long n = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const long lo = std::max(a[i].lo, b[j].lo);
        const long hi = std::min(a[i].hi, b[j].hi);
        if (lo <= hi) n += hi - lo + 1;
        if (a[i].hi < b[j].hi) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

}  // namespace

double overlap_ratio(const Geometry& a, const Geometry& b, OverlapOptions opts) {
    if (!a.is_areal() || !b.is_areal()) {
        throw GeometryError(GeometryError::Code::unsupported_geometry, "overlap_ratio needs areal inputs");
    }
    if (a.empty() || b.empty()) return 0.0;
    if (opts.backend == OverlapBackend::exact) {
        const double inter = intersection_area(a, b);
        const double uni = area(a) + area(b) - inter;
        return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
    }
    if (!(opts.cell_size > 0.0)) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "grid cell size must be positive");
    }
    const BBox ba = a.bbox();
    const BBox bb = b.bbox();
    if (!ba.intersects(bb)) return 0.0;
    const BBox u{std::min(ba.min_x, bb.min_x), std::min(ba.min_y, bb.min_y), std::max(ba.max_x, bb.max_x),
                 std::max(ba.max_y, bb.max_y)};
    const double cell = opts.cell_size;
    const long ncols = std::max(1L, static_cast<long>(std::ceil(u.width() / cell)));
    const long nrows = std::max(1L, static_cast<long>(std::ceil(u.height() / cell)));
    const auto ea = segments_of(a);
    const auto eb = segments_of(b);

    long inter = 0;
    long uni = 0;
    for (long r = 0; r < nrows; ++r) {
        const double y = u.min_y + (static_cast<double>(r) + 0.5) * cell;
        const auto ra = row_ranges(ea, y, u.min_x, cell, ncols);
        const auto rb = row_ranges(eb, y, u.min_x, cell, ncols);
        const long i = intersect_count(ra, rb);
        inter += i;
        uni += range_count(ra) + range_count(rb) - i;
    }
    if (uni == 0) return overlap_ratio(a, b, {OverlapBackend::exact, cell});
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace chronomap::geo
