#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chronomap::kg {

using GeometryHandle = std::uint32_t;

enum class TermKind : std::uint8_t { iri, string, integer, decimal, boolean, geometry };

std::string_view to_string(TermKind k) noexcept;

class TermError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// RDF term. Years are integer literals; the schema range restricts them to
/// four digits. Geometry terms reference the store's geometry table.
class Term {
public:
    Term() = default;

    static Term iri(std::string iri);
    static Term string(std::string value);
    static Term integer(std::int64_t value);
    static Term decimal(double value);
    static Term boolean(bool value);
    static Term geometry(GeometryHandle handle);

    /// Builds a literal from its lexical form and datatype IRI. Throws
    /// TermError when the lexical form does not fit the datatype.
    static Term literal(std::string_view lexical, std::string_view datatype);

    [[nodiscard]] TermKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_iri() const noexcept { return kind_ == TermKind::iri; }
    [[nodiscard]] bool is_literal() const noexcept { return kind_ != TermKind::iri && kind_ != TermKind::geometry; }
    [[nodiscard]] bool is_numeric() const noexcept {
        return kind_ == TermKind::integer || kind_ == TermKind::decimal;
    }

    /// IRI text or string value.
    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] std::int64_t as_integer() const noexcept { return int_; }
    [[nodiscard]] double as_decimal() const noexcept { return dec_; }
    [[nodiscard]] double as_number() const noexcept {
        return kind_ == TermKind::integer ? static_cast<double>(int_) : dec_;
    }
    [[nodiscard]] bool as_boolean() const noexcept { return int_ != 0; }
    [[nodiscard]] GeometryHandle handle() const noexcept { return static_cast<GeometryHandle>(int_); }

    /// Lexical form of a literal ("1901", "12.5", "true", "lake").
    [[nodiscard]] std::string lexical() const;
    [[nodiscard]] std::string datatype() const;

    /// N-Triples form. Geometry terms have no standalone form and serialize
    /// as a blank-node style placeholder; the store substitutes WKT on dump.
    [[nodiscard]] std::string to_ntriples() const;

    friend bool operator==(const Term&, const Term&) = default;
    friend std::strong_ordering operator<=>(const Term& a, const Term& b);

private:
    TermKind kind_{TermKind::iri};
    std::string text_;
    std::int64_t int_{0};
    double dec_{0.0};
};

std::string escape_literal(std::string_view s);

}  // namespace chronomap::kg
