#include "chronomap/geometry/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace chronomap::geo {

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[512];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
    return std::string(buf, res.ptr);
}

namespace {

class WktReader {
public:
    explicit WktReader(std::string_view text) : text_(text) {}

    Geometry read() {
        const std::string tag = keyword();
        Geometry g = [&] {
            if (tag == "POINT") {
                expect('(');
                const Point p = point();
                expect(')');
                return Geometry::point(p);
            }
            if (tag == "LINESTRING") return Geometry::linestring(point_list());
            if (tag == "POLYGON") return Geometry::polygon(polygon());
            if (tag == "MULTIPOLYGON") {
                skip_ws();
                if (peek_word("EMPTY")) {
                    pos_ += 5;
                    return Geometry::multipolygon({});
                }
                std::vector<Polygon> parts;
                expect('(');
                parts.push_back(polygon());
                while (accept(',')) parts.push_back(polygon());
                expect(')');
                return Geometry::multipolygon(std::move(parts));
            }
            fail("unsupported WKT type '" + tag + "'");
        }();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters");
        return g;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw GeometryError(GeometryError::Code::invalid_geometry,
                            "WKT parse error at offset " + std::to_string(pos_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool peek_word(std::string_view w) const {
        if (text_.size() - pos_ < w.size()) return false;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (std::toupper(static_cast<unsigned char>(text_[pos_ + i])) != w[i]) return false;
        }
        return true;
    }

    std::string keyword() {
        skip_ws();
        std::string out;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(text_[pos_++]))));
        }
        if (out.empty()) fail("expected geometry keyword");
        return out;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    double number() {
        skip_ws();
        double v = 0.0;
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        if (begin != end && *begin == '+') ++begin;
        const auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc()) fail("expected number");
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        return v;
    }

    Point point() {
        const double x = number();
        const double y = number();
        return {x, y};
    }

    std::vector<Point> point_list() {
        expect('(');
        std::vector<Point> pts{point()};
        while (accept(',')) pts.push_back(point());
        expect(')');
        return pts;
    }

    Polygon polygon() {
        expect('(');
        Polygon p{point_list(), {}};
        while (accept(',')) p.holes.push_back(point_list());
        expect(')');
        return p;
    }

    std::string_view text_;
    std::size_t pos_{0};
};

void append_coords(std::string& out, std::span<const Point> pts) {
    out += '(';
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_number(pts[i].x);
        out += ' ';
        out += format_number(pts[i].y);
    }
    out += ')';
}

void append_polygon(std::string& out, const Polygon& p) {
    out += '(';
    append_coords(out, p.exterior);
    for (const auto& h : p.holes) {
        out += ", ";
        append_coords(out, h);
    }
    out += ')';
}

Point json_point(const nlohmann::json& j) {
    if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "GeoJSON position must be [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Point> json_points(const nlohmann::json& j) {
    if (!j.is_array()) throw GeometryError(GeometryError::Code::invalid_geometry, "GeoJSON coordinates must be an array");
    std::vector<Point> out;
    for (const auto& p : j) out.push_back(json_point(p));
    return out;
}

Polygon json_polygon(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "GeoJSON polygon needs at least one ring");
    }
    Polygon p{json_points(j[0]), {}};
    for (std::size_t i = 1; i < j.size(); ++i) p.holes.push_back(json_points(j[i]));
    return p;
}

nlohmann::json ring_json(std::span<const Point> pts) {
    auto arr = nlohmann::json::array();
    for (const auto& p : pts) arr.push_back({p.x, p.y});
    return arr;
}

nlohmann::json polygon_json(const Polygon& p) {
    auto arr = nlohmann::json::array();
    arr.push_back(ring_json(p.exterior));
    for (const auto& h : p.holes) arr.push_back(ring_json(h));
    return arr;
}

}  // namespace

Geometry parse_wkt(std::string_view text) { return WktReader(text).read(); }

std::string to_wkt(const Geometry& g) {
    std::string out;
    switch (g.kind()) {
        case GeometryKind::point:
            out = "POINT ";
            append_coords(out, g.coords());
            break;
        case GeometryKind::linestring:
            out = "LINESTRING ";
            append_coords(out, g.coords());
            break;
        case GeometryKind::polygon:
            out = "POLYGON ";
            append_polygon(out, g.polygons()[0]);
            break;
        case GeometryKind::multipolygon:
            if (g.polygons().empty()) return "MULTIPOLYGON EMPTY";
            out = "MULTIPOLYGON (";
            for (std::size_t i = 0; i < g.polygons().size(); ++i) {
                if (i > 0) out += ", ";
                append_polygon(out, g.polygons()[i]);
            }
            out += ')';
            break;
    }
    return out;
}

Geometry from_geojson(const nlohmann::json& geometry) {
    if (!geometry.is_object() || !geometry.contains("type") || !geometry["type"].is_string()) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "GeoJSON geometry needs a type");
    }
    const auto type = geometry["type"].get<std::string>();
    if (!geometry.contains("coordinates")) {
        throw GeometryError(GeometryError::Code::invalid_geometry, "GeoJSON geometry needs coordinates");
    }
    const auto& c = geometry["coordinates"];
    if (type == "Point") return Geometry::point(json_point(c));
    if (type == "LineString") return Geometry::linestring(json_points(c));
    if (type == "Polygon") return Geometry::polygon(json_polygon(c));
    if (type == "MultiPolygon") {
        if (!c.is_array()) throw GeometryError(GeometryError::Code::invalid_geometry, "MultiPolygon coordinates");
        std::vector<Polygon> parts;
        for (const auto& p : c) parts.push_back(json_polygon(p));
        return Geometry::multipolygon(std::move(parts));
    }
    throw GeometryError(GeometryError::Code::unsupported_geometry, "unsupported GeoJSON type '" + type + "'");
}

nlohmann::json to_geojson(const Geometry& g) {
    switch (g.kind()) {
        case GeometryKind::point:
            return {{"type", "Point"}, {"coordinates", {g.coords()[0].x, g.coords()[0].y}}};
        case GeometryKind::linestring:
            return {{"type", "LineString"}, {"coordinates", ring_json(g.coords())}};
        case GeometryKind::polygon:
            return {{"type", "Polygon"}, {"coordinates", polygon_json(g.polygons()[0])}};
        case GeometryKind::multipolygon: {
            auto parts = nlohmann::json::array();
            for (const auto& p : g.polygons()) parts.push_back(polygon_json(p));
            return {{"type", "MultiPolygon"}, {"coordinates", parts}};
        }
    }
    return nullptr;
}

}  // namespace chronomap::geo
