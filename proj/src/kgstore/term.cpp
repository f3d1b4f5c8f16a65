#include "chronomap/kgstore/term.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "chronomap/geometry/io.hpp"
#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::kg {

std::string_view to_string(TermKind k) noexcept {
    switch (k) {
        case TermKind::iri: return "iri";
        case TermKind::string: return "string";
        case TermKind::integer: return "integer";
        case TermKind::decimal: return "decimal";
        case TermKind::boolean: return "boolean";
        case TermKind::geometry: return "geometry";
    }
    return "?";
}

Term Term::iri(std::string iri) {
    if (iri.find(':') == std::string::npos) throw TermError("IRI is not absolute: " + iri);
    Term t;
    t.kind_ = TermKind::iri;
    t.text_ = std::move(iri);
    return t;
}

Term Term::string(std::string value) {
    Term t;
    t.kind_ = TermKind::string;
    t.text_ = std::move(value);
    return t;
}

Term Term::integer(std::int64_t value) {
    Term t;
    t.kind_ = TermKind::integer;
    t.int_ = value;
    return t;
}

Term Term::decimal(double value) {
    if (!std::isfinite(value)) throw TermError("decimal literal must be finite");
    Term t;
    t.kind_ = TermKind::decimal;
    t.dec_ = value == 0.0 ? 0.0 : value;
    return t;
}

Term Term::boolean(bool value) {
    Term t;
    t.kind_ = TermKind::boolean;
    t.int_ = value ? 1 : 0;
    return t;
}

Term Term::geometry(GeometryHandle handle) {
    Term t;
    t.kind_ = TermKind::geometry;
    t.int_ = handle;
    return t;
}

namespace {

std::string_view local_name(std::string_view datatype) {
    if (datatype.substr(0, kXsdNs.size()) == kXsdNs) return datatype.substr(kXsdNs.size());
    return {};
}

}  // namespace

Term Term::literal(std::string_view lexical, std::string_view datatype) {
    const std::string_view local = local_name(datatype);
    if (local == "string") return string(std::string(lexical));
    if (local == "integer" || local == "int" || local == "long" || local == "gYear") {
        std::string_view digits = lexical;
        if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
        std::int64_t v = 0;
        const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec != std::errc{} || end != digits.data() + digits.size() || digits.empty()) {
            throw TermError("bad integer literal: " + std::string(lexical));
        }
        return integer(v);
    }
    if (local == "decimal" || local == "double" || local == "float") {
        std::string_view digits = lexical;
        if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec != std::errc{} || end != digits.data() + digits.size() || digits.empty() || !std::isfinite(v)) {
            throw TermError("bad decimal literal: " + std::string(lexical));
        }
        return decimal(v);
    }
    if (local == "boolean") {
        if (lexical == "true" || lexical == "1") return boolean(true);
        if (lexical == "false" || lexical == "0") return boolean(false);
        throw TermError("bad boolean literal: " + std::string(lexical));
    }
    throw TermError("unsupported datatype: " + std::string(datatype));
}

std::string Term::lexical() const {
    switch (kind_) {
        case TermKind::iri:
        case TermKind::string: return text_;
        case TermKind::integer: return std::to_string(int_);
        case TermKind::decimal: return geo::format_number(dec_);
        case TermKind::boolean: return int_ ? "true" : "false";
        case TermKind::geometry: return "geometry#" + std::to_string(int_);
    }
    return {};
}

std::string Term::datatype() const {
    switch (kind_) {
        case TermKind::string: return xsd("string");
        case TermKind::integer: return xsd("integer");
        case TermKind::decimal: return xsd("decimal");
        case TermKind::boolean: return xsd("boolean");
        case TermKind::geometry: return std::string(kWktLiteral);
        case TermKind::iri: break;
    }
    return {};
}

std::string Term::to_ntriples() const {
    if (kind_ == TermKind::iri) return "<" + text_ + ">";
    if (kind_ == TermKind::geometry) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "_:g%010u", static_cast<unsigned>(int_));
        return buf;
    }
    return "\"" + escape_literal(lexical()) + "\"^^<" + datatype() + ">";
}

std::strong_ordering operator<=>(const Term& a, const Term& b) {
    return a.to_ntriples() <=> b.to_ntriples();
}

std::string escape_literal(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace chronomap::kg
