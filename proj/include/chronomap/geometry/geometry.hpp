#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Planar geometry kernel for map features. All coordinates are meters in a
// projected CRS; nothing here does geodesic math.

namespace chronomap::geo {

struct Point {
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct BBox {
    double min_x{0.0};
    double min_y{0.0};
    double max_x{0.0};
    double max_y{0.0};

    [[nodiscard]] BBox expanded(double by) const noexcept {
        return {min_x - by, min_y - by, max_x + by, max_y + by};
    }
    [[nodiscard]] bool intersects(const BBox& o) const noexcept {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
    [[nodiscard]] double width() const noexcept { return max_x - min_x; }
    [[nodiscard]] double height() const noexcept { return max_y - min_y; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

enum class GeometryKind : std::uint8_t { point, linestring, polygon, multipolygon };

std::string_view to_string(GeometryKind k) noexcept;

class GeometryError : public std::runtime_error {
public:
    enum class Code : std::uint8_t {
        invalid_geometry,
        unsupported_geometry,
        negative_radius,
        no_direction,
        empty_geometry,
    };

    GeometryError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] Code code() const noexcept { return code_; }

private:
    Code code_;
};

/// Immutable feature geometry. The factories validate coordinates, close open
/// rings and normalize winding (exterior counterclockwise, holes clockwise),
/// so every constructed value satisfies the ring invariants.
class Geometry {
public:
    /// Empty multipolygon.
    Geometry() = default;

    static Geometry point(Point p);
    static Geometry linestring(std::vector<Point> points);
    static Geometry polygon(Ring exterior, std::vector<Ring> holes = {});
    static Geometry polygon(Polygon poly);
    /// An empty part list is allowed and yields an empty multipolygon.
    static Geometry multipolygon(std::vector<Polygon> parts);

    [[nodiscard]] GeometryKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_point() const noexcept { return kind_ == GeometryKind::point; }
    [[nodiscard]] bool is_linear() const noexcept { return kind_ == GeometryKind::linestring; }
    [[nodiscard]] bool is_areal() const noexcept {
        return kind_ == GeometryKind::polygon || kind_ == GeometryKind::multipolygon;
    }
    /// Topological dimension: 0 for points, 1 for lines, 2 for areas.
    [[nodiscard]] int dimension() const noexcept;
    [[nodiscard]] bool empty() const noexcept;

    /// Coordinates of a point or linestring.
    [[nodiscard]] std::span<const Point> coords() const noexcept { return coords_; }
    /// Parts of a polygon (exactly one) or multipolygon.
    [[nodiscard]] std::span<const Polygon> polygons() const noexcept { return polygons_; }

    [[nodiscard]] BBox bbox() const;

    friend bool operator==(const Geometry&, const Geometry&) = default;

private:
    GeometryKind kind_{GeometryKind::multipolygon};
    std::vector<Point> coords_;
    std::vector<Polygon> polygons_;
};

struct Segment {
    Point a;
    Point b;
};

/// Every boundary edge of an areal geometry, every segment of a line, and a
/// zero-length segment for a point.
std::vector<Segment> segments_of(const Geometry& g);

enum class Location : std::uint8_t { interior, boundary, exterior };

/// Even-odd point location against an areal geometry.
Location locate(Point p, const Geometry& areal);

double area(const Geometry& g);
double length(const Geometry& g);
/// Perimeter of an areal geometry (all rings).
double perimeter(const Geometry& g);
double distance(const Geometry& a, const Geometry& b);
Point centroid(const Geometry& g);

/// Polygonal approximation of all points within r of g, with at least 64
/// vertices per full circle. r == 0 returns areal input unchanged and the
/// convex hull of the vertices otherwise.
Geometry buffer(const Geometry& g, double r);

/// Exact area of the intersection of two areal geometries (boundary
/// integration over clipped edges).
double intersection_area(const Geometry& a, const Geometry& b);

/// Length of the line `line` that lies within distance eps of `other`.
double length_within(const Geometry& line, const Geometry& other, double eps);

/// True when every point of b lies in the closure of a.
bool covers(const Geometry& a, const Geometry& b);

enum class Relation : std::uint8_t {
    intersects = 1u << 0,
    touches = 1u << 1,
    contains = 1u << 2,
    within = 1u << 3,
    crosses = 1u << 4,
    overlaps = 1u << 5,
    disjoint = 1u << 6,
};

std::string_view to_string(Relation r) noexcept;

class RelationSet {
public:
    constexpr RelationSet() = default;

    constexpr void add(Relation r) noexcept { bits_ |= static_cast<std::uint8_t>(r); }
    [[nodiscard]] constexpr bool has(Relation r) const noexcept {
        return (bits_ & static_cast<std::uint8_t>(r)) != 0;
    }
    [[nodiscard]] constexpr std::uint8_t bits() const noexcept { return bits_; }
    [[nodiscard]] std::vector<Relation> members() const;
    [[nodiscard]] std::string to_string() const;

    friend constexpr bool operator==(RelationSet, RelationSet) = default;

private:
    std::uint8_t bits_{0};
};

/// Tolerance-robust topological relations.
///
/// intersects holds iff distance(a, b) <= eps. The interiors "interact" when
/// the overlap exceeds the degeneracy threshold: intersection area > eps^2
/// for two areas, shared length > eps or a proper crossing away from line ends
/// for two lines, inside length > eps for a line against an area. touches is
/// intersects without interaction. contains(a, b) additionally requires
/// buffer(a, eps) to cover b; within is its mirror. crosses applies to
/// line/line (proper crossing, no shared run) and line/area (inside and
/// outside runs both > eps); overlaps to same-dimension pairs that interact
/// without containment. disjoint excludes everything else.
RelationSet relate(const Geometry& a, const Geometry& b, double eps);

enum class CardinalDirection : std::uint8_t { E, NE, N, NW, W, SW, S, SE };

std::string_view to_string(CardinalDirection d) noexcept;
CardinalDirection opposite(CardinalDirection d) noexcept;

/// Direction of `to` as seen from `from`, between centroids. Sectors are
/// half-open 45 degree wedges starting at E = [-22.5, 22.5).
CardinalDirection cardinal(const Geometry& from, const Geometry& to);
CardinalDirection cardinal(Point from, Point to);

enum class OverlapBackend : std::uint8_t { grid, exact };

struct OverlapOptions {
    OverlapBackend backend{OverlapBackend::grid};
    /// Grid cell edge in meters; sample points are cell centers over the
    /// union bounding box.
    double cell_size{1.0};
};

/// Intersection over union of two areal geometries. When the grid holds no
/// sample inside either geometry the exact backend is used instead.
double overlap_ratio(const Geometry& a, const Geometry& b, OverlapOptions opts = {});

}  // namespace chronomap::geo
