#pragma once

// Segment-level primitives shared by the geometry translation units.

#include <optional>
#include <vector>

#include "chronomap/geometry/geometry.hpp"

namespace chronomap::geo::detail {

/// Absolute snapping tolerance in meters for on-segment and boundary tests.
inline constexpr double kTol = 1e-7;

inline double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

double point_distance(Point a, Point b);
double point_segment_distance(Point p, Segment s);
double seg_length(Segment s);
bool segments_intersect(Segment s, Segment t);
double segment_distance(Segment s, Segment t);

/// Single intersection point of two non-parallel, non-degenerate segments.
std::optional<Point> crossing_point(Segment s, Segment t);

/// Sorted parameters in [0, 1] (always including both ends) where s meets
/// any of the edges.
std::vector<double> split_params(Segment s, const std::vector<Segment>& edges);
std::vector<Segment> split_segment(Segment s, const std::vector<Segment>& edges);

/// Whether a piece lying on one of the edges runs in the same direction.
bool runs_along_same_way(Segment piece, const std::vector<Segment>& edges);

struct Interval {
    double lo;
    double hi;
};

/// Parameter interval of s within distance r of segment t, clamped to [0, 1].
std::optional<Interval> capsule_interval(Segment s, Segment t, double r);

/// Parameter intervals of s lying in the interior of the areal geometry.
std::vector<Interval> inside_intervals(Segment s, const std::vector<Segment>& edges, const Geometry& areal);

/// Measure of the union of intervals within [0, 1].
double covered_fraction(std::vector<Interval> spans);

struct LineClip {
    double inside{0.0};
    double boundary{0.0};
    double outside{0.0};
};

LineClip clip_line(const Geometry& line, const Geometry& areal);

inline double length_tolerance(double len) { return 1e-7 * (len > 1.0 ? len : 1.0); }

/// Deterministic total order on geometries (kind, then vertices).
bool canonical_less(const Geometry& a, const Geometry& b);

}  // namespace chronomap::geo::detail
