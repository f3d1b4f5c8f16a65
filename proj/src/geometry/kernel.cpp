#include "kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chronomap::geo::detail {

namespace {

double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double cross2(Point a, Point b) { return a.x * b.y - a.y * b.x; }
Point sub(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }

BBox seg_box(Segment s) {
    return {std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y), std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y)};
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

double point_distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double seg_length(Segment s) { return point_distance(s.a, s.b); }

double point_segment_distance(Point p, Segment s) {
    const Point d = sub(s.b, s.a);
    const double dd = dot(d, d);
    if (dd == 0.0) return point_distance(p, s.a);
    const double t = std::clamp(dot(sub(p, s.a), d) / dd, 0.0, 1.0);
    return point_distance(p, {s.a.x + t * d.x, s.a.y + t * d.y});
}

bool segments_intersect(Segment s, Segment t) {
    if (!seg_box(s).expanded(kTol).intersects(seg_box(t))) return false;
    const int d1 = sign(cross(t.a, t.b, s.a));
    const int d2 = sign(cross(t.a, t.b, s.b));
    const int d3 = sign(cross(s.a, s.b, t.a));
    const int d4 = sign(cross(s.a, s.b, t.b));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    return point_segment_distance(s.a, t) <= kTol || point_segment_distance(s.b, t) <= kTol ||
           point_segment_distance(t.a, s) <= kTol || point_segment_distance(t.b, s) <= kTol;
}

double segment_distance(Segment s, Segment t) {
    if (segments_intersect(s, t)) return 0.0;
    return std::min({point_segment_distance(s.a, t), point_segment_distance(s.b, t),
                     point_segment_distance(t.a, s), point_segment_distance(t.b, s)});
}

std::optional<Point> crossing_point(Segment s, Segment t) {
    const Point d = sub(s.b, s.a);
    const Point e = sub(t.b, t.a);
    const double denom = cross2(d, e);
    if (denom == 0.0 || dot(d, d) == 0.0 || dot(e, e) == 0.0) return std::nullopt;
    // Treat nearly parallel pairs as collinear; their contact is a shared run.
    if (std::abs(denom) <= 1e-12 * std::sqrt(dot(d, d) * dot(e, e))) return std::nullopt;
    if (!segments_intersect(s, t)) return std::nullopt;
    const Point w = sub(t.a, s.a);
    const double u = std::clamp(cross2(w, e) / denom, 0.0, 1.0);
    return Point{s.a.x + u * d.x, s.a.y + u * d.y};
}

std::vector<double> split_params(Segment s, const std::vector<Segment>& edges) {
    std::vector<double> ts{0.0, 1.0};
    const Point d = sub(s.b, s.a);
    const double dd = dot(d, d);
    if (dd == 0.0) return ts;
    const BBox sb = seg_box(s).expanded(kTol);
    for (const auto& e : edges) {
        if (!sb.intersects(seg_box(e))) continue;
        for (const Point q : {e.a, e.b}) {
            if (point_segment_distance(q, s) <= kTol) ts.push_back(dot(sub(q, s.a), d) / dd);
        }
        const Point ed = sub(e.b, e.a);
        const double denom = cross2(d, ed);
        if (denom != 0.0) {
            const Point w = sub(e.a, s.a);
            const double t = cross2(w, ed) / denom;
            const double u = cross2(w, d) / denom;
            if (t > 0.0 && t < 1.0 && u >= 0.0 && u <= 1.0) ts.push_back(t);
        }
    }
    for (auto& t : ts) t = std::clamp(t, 0.0, 1.0);
    std::sort(ts.begin(), ts.end());
    const double len = std::sqrt(dd);
    std::vector<double> out;
    for (double t : ts) {
        if (out.empty() || (t - out.back()) * len > 1e-9) out.push_back(t);
    }
    if (out.back() < 1.0) out.back() = 1.0;
    return out;
}

std::vector<Segment> split_segment(Segment s, const std::vector<Segment>& edges) {
    const auto ts = split_params(s, edges);
    const Point d = sub(s.b, s.a);
    std::vector<Segment> out;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        out.push_back({{s.a.x + ts[i] * d.x, s.a.y + ts[i] * d.y}, {s.a.x + ts[i + 1] * d.x, s.a.y + ts[i + 1] * d.y}});
    }
    if (ts.size() < 2) out.push_back(s);
    return out;
}

bool runs_along_same_way(Segment piece, const std::vector<Segment>& edges) {
    const Point m{(piece.a.x + piece.b.x) / 2.0, (piece.a.y + piece.b.y) / 2.0};
    const Point d = sub(piece.b, piece.a);
    const double dl = std::sqrt(dot(d, d));
    if (dl == 0.0) return false;
    for (const auto& e : edges) {
        const Point ed = sub(e.b, e.a);
        const double el = std::sqrt(dot(ed, ed));
        if (el == 0.0 || point_segment_distance(m, e) > kTol) continue;
        if (std::abs(cross2(d, ed)) <= 1e-9 * dl * el) return dot(d, ed) > 0.0;
    }
    return false;
}

std::optional<Interval> capsule_interval(Segment s, Segment t, double r) {
    const Point d = sub(s.b, s.a);
    const double a = dot(d, d);
    if (a == 0.0) return std::nullopt;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    auto disk = [&](Point c) {
        const Point f = sub(s.a, c);
        const double b = 2.0 * dot(d, f);
        const double c0 = dot(f, f) - r * r;
        const double disc = b * b - 4.0 * a * c0;
        if (disc < 0.0) return;
        const double sq = std::sqrt(disc);
        lo = std::min(lo, (-b - sq) / (2.0 * a));
        hi = std::max(hi, (-b + sq) / (2.0 * a));
    };
    disk(t.a);
    const Point ed = sub(t.b, t.a);
    const double el = std::sqrt(dot(ed, ed));
    if (el > 0.0) {
        disk(t.b);
        const Point u{ed.x / el, ed.y / el};
        const Point w = sub(s.a, t.a);
        double tl = -std::numeric_limits<double>::infinity();
        double th = std::numeric_limits<double>::infinity();
        // Restrict c0 + t * c1 to [bound_lo, bound_hi].
        auto slab = [&](double c0, double c1, double bound_lo, double bound_hi) {
            if (c1 == 0.0) {
                if (c0 < bound_lo || c0 > bound_hi) {
                    tl = 1.0;
                    th = 0.0;
                }
                return;
            }
            double t0 = (bound_lo - c0) / c1;
            double t1 = (bound_hi - c0) / c1;
            if (t0 > t1) std::swap(t0, t1);
            tl = std::max(tl, t0);
            th = std::min(th, t1);
        };
        slab(dot(w, u), dot(d, u), 0.0, el);
        slab(cross2(u, w), cross2(u, d), -r, r);
        if (tl <= th) {
            lo = std::min(lo, tl);
            hi = std::max(hi, th);
        }
    }
    if (lo > hi) return std::nullopt;
    lo = std::max(lo, 0.0);
    hi = std::min(hi, 1.0);
    if (lo > hi) return std::nullopt;
    return Interval{lo, hi};
}

std::vector<Interval> inside_intervals(Segment s, const std::vector<Segment>& edges, const Geometry& areal) {
    std::vector<Interval> out;
    const auto ts = split_params(s, edges);
    const Point d = sub(s.b, s.a);
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const double tm = (ts[i] + ts[i + 1]) / 2.0;
        if (locate({s.a.x + tm * d.x, s.a.y + tm * d.y}, areal) == Location::interior) {
            out.push_back({ts[i], ts[i + 1]});
        }
    }
    return out;
}

double covered_fraction(std::vector<Interval> spans) {
    if (spans.empty()) return 0.0;
    std::sort(spans.begin(), spans.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    double total = 0.0;
    double lo = spans.front().lo;
    double hi = spans.front().hi;
    for (const auto& iv : spans) {
        if (iv.lo > hi) {
            total += hi - lo;
            lo = iv.lo;
            hi = iv.hi;
        } else {
            hi = std::max(hi, iv.hi);
        }
    }
    total += hi - lo;
    return std::clamp(total, 0.0, 1.0);
}

LineClip clip_line(const Geometry& line, const Geometry& areal) {
    LineClip out;
    const auto edges = segments_of(areal);
    for (const auto& s : segments_of(line)) {
        const Point d = sub(s.b, s.a);
        const double len = std::sqrt(dot(d, d));
        if (len == 0.0) continue;
        const auto ts = split_params(s, edges);
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            const double tm = (ts[i] + ts[i + 1]) / 2.0;
            const double piece = (ts[i + 1] - ts[i]) * len;
            switch (locate({s.a.x + tm * d.x, s.a.y + tm * d.y}, areal)) {
                case Location::interior: out.inside += piece; break;
                case Location::boundary: out.boundary += piece; break;
                case Location::exterior: out.outside += piece; break;
            }
        }
    }
    return out;
}

bool canonical_less(const Geometry& a, const Geometry& b) {
    if (a.kind() != b.kind()) return a.kind() < b.kind();
    std::vector<Point> va;
    std::vector<Point> vb;
    for (const auto& s : segments_of(a)) va.push_back(s.a);
    for (const auto& s : segments_of(b)) vb.push_back(s.a);
    return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end(), [](Point p, Point q) {
        return p.x < q.x || (p.x == q.x && p.y < q.y);
    });
}

}  // namespace chronomap::geo::detail
