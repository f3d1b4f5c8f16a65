#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronomap/kgstore/term.hpp"

namespace chronomap::kg {

enum class Cardinality : std::uint8_t { fixed, optional };

enum class Range : std::uint8_t { iri, string, integer, decimal, boolean, year, geometry };

std::string_view to_string(Cardinality c) noexcept;
std::string_view to_string(Range r) noexcept;

struct PropertyDef {
    std::string iri;
    Cardinality cardinality{Cardinality::optional};
    Range range{Range::string};
    /// Several values per subject allowed (only meaningful for optional).
    bool multi{false};

    friend bool operator==(const PropertyDef&, const PropertyDef&) = default;
};

struct RelationDef {
    std::string iri;
    std::optional<std::string> inverse;

    friend bool operator==(const RelationDef&, const RelationDef&) = default;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Closed predicate catalog.
class Schema {
public:
    Schema() = default;
    /// Throws SchemaError if a declared inverse is missing or not symmetric.
    Schema(std::vector<PropertyDef> properties, std::vector<RelationDef> relations);

    /// Feature properties and relation predicates of the map ontology.
    static const Schema& standard();

    [[nodiscard]] const PropertyDef* property(std::string_view iri) const noexcept;
    [[nodiscard]] const RelationDef* relation(std::string_view iri) const noexcept;
    [[nodiscard]] bool contains(std::string_view iri) const noexcept {
        return property(iri) != nullptr || relation(iri) != nullptr;
    }
    [[nodiscard]] std::optional<std::string> inverse_of(std::string_view iri) const;

    [[nodiscard]] const std::vector<PropertyDef>& properties() const noexcept { return properties_; }
    [[nodiscard]] const std::vector<RelationDef>& relations() const noexcept { return relations_; }

    /// Whether a term is acceptable as value of a property with this range.
    [[nodiscard]] static bool accepts(Range range, const Term& value) noexcept;

    [[nodiscard]] nlohmann::json to_json() const;
    static Schema from_json(const nlohmann::json& j);

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::vector<PropertyDef> properties_;
    std::vector<RelationDef> relations_;
};

}  // namespace chronomap::kg
