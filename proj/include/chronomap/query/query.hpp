#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chronomap/kgstore/schema.hpp"
#include "chronomap/kgstore/store.hpp"
#include "chronomap/query/ast.hpp"

namespace chronomap::query {

class QueryError : public std::runtime_error {
public:
    enum class Code : std::uint8_t { syntax, unknown_prefix, semantic };

    QueryError(Code code, std::string message, std::size_t line = 0, std::size_t column = 0,
               std::vector<std::string> expected = {});

    [[nodiscard]] Code code() const noexcept { return code_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }
    [[nodiscard]] const std::vector<std::string>& expected() const noexcept { return expected_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    Code code_;
    std::string message_;
    std::size_t line_;
    std::size_t column_;
    std::vector<std::string> expected_;
};

/// Prefixes cmf, cmo, cmr, xsd and rdf are predeclared; PREFIX lines may
/// override them. Keywords are case-insensitive.
Query parse(std::string_view text);

/// Canonical text with full IRIs and fully parenthesized expressions;
/// parse(print(q)) == q.
std::string print(const Query& q);

struct SchemaViolation {
    std::string iri;
    /// 1-based index of the triple pattern in depth-first order.
    std::size_t pattern_index{0};

    friend bool operator==(const SchemaViolation&, const SchemaViolation&) = default;
};

/// Constant predicates missing from the catalog.
std::vector<SchemaViolation> validate_against_schema(const Query& q, const kg::Schema& schema);

struct SolutionTable {
    std::vector<std::string> vars;
    std::vector<std::vector<std::optional<kg::Term>>> rows;

    friend bool operator==(const SolutionTable&, const SolutionTable&) = default;
};

struct QueryResult {
    Form form{Form::select};
    bool boolean{false};
    SolutionTable table;
    /// Rows dropped because a filter hit a type error.
    std::size_t filter_type_mismatches{0};
};

QueryResult evaluate(const Query& q, const kg::Store& store);

/// SPARQL 1.1 Query Results JSON. Geometry values are resolved to WKT
/// literals through the store.
nlohmann::json to_sparql_json(const QueryResult& r, const kg::Store& store);

/// Total order used by ORDER BY, MIN and MAX: numbers (by value), strings,
/// booleans, IRIs, geometries.
int compare_terms(const kg::Term& a, const kg::Term& b);

}  // namespace chronomap::query
