#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "chronomap/geometry/geometry.hpp"
#include "chronomap/geometry/spatial_index.hpp"
#include "chronomap/kgstore/schema.hpp"
#include "chronomap/kgstore/term.hpp"

namespace chronomap::kg {

struct Triple {
    Term subject;
    Term predicate;
    Term object;

    friend bool operator==(const Triple&, const Triple&) = default;
};

class StoreError : public std::runtime_error {
public:
    enum class Code : std::uint8_t { schema_violation, type_violation, sealed, parse_error, io_error };

    StoreError(Code code, const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          code_(code),
          line_(line) {}

    [[nodiscard]] Code code() const noexcept { return code_; }
    /// 1-based input line for load errors, 0 otherwise.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    Code code_;
    std::size_t line_;
};

using TermId = std::uint32_t;
using IdTriple = std::array<TermId, 3>;

/// Which index answers a match. `automatic` picks the one whose key order
/// starts with the bound positions.
enum class IndexChoice : std::uint8_t { automatic, spo, pos, osp };

/// In-memory triple store. Single writer while building; after seal() the
/// store is immutable and safe for concurrent readers.
class Store {
public:
    explicit Store(Schema schema = Schema::standard());

    [[nodiscard]] const Schema& schema() const noexcept { return schema_; }

    GeometryHandle add_geometry(geo::Geometry g);
    [[nodiscard]] const geo::Geometry& geometry(GeometryHandle h) const;
    [[nodiscard]] std::size_t geometry_count() const noexcept { return geometries_.size(); }

    /// Returns true if the triple was new.
    bool insert(const Triple& t);
    bool insert(const Term& s, const Term& p, const Term& o) { return insert(Triple{s, p, o}); }

    void seal();
    [[nodiscard]] bool sealed() const noexcept { return sealed_; }

    /// Triples matching the bound positions, ordered by (S, P, O) term
    /// serialization whichever index serves the pattern.
    [[nodiscard]] std::vector<Triple> match(const std::optional<Term>& s, const std::optional<Term>& p,
                                            const std::optional<Term>& o,
                                            IndexChoice via = IndexChoice::automatic) const;

    // Id-level access for the query evaluator.
    [[nodiscard]] std::optional<TermId> lookup(const Term& t) const;
    [[nodiscard]] const Term& term(TermId id) const { return terms_.at(id); }
    [[nodiscard]] std::vector<IdTriple> match_ids(std::optional<TermId> s, std::optional<TermId> p,
                                                  std::optional<TermId> o,
                                                  IndexChoice via = IndexChoice::automatic) const;

    [[nodiscard]] std::size_t size() const noexcept { return spo_.size(); }
    [[nodiscard]] std::size_t term_count() const noexcept { return terms_.size(); }

    /// Feature IRIs whose stored geometry bounding box meets the window.
    /// Available after seal().
    [[nodiscard]] std::vector<std::string> features_in(const geo::BBox& window) const;
    [[nodiscard]] std::optional<geo::Geometry> geometry_of(const std::string& feature_iri) const;

    /// N-Triples at `path`, schema JSON at `path` + ".schema.json".
    void dump(const std::filesystem::path& path) const;
    [[nodiscard]] std::string to_ntriples() const;

    /// Returns an unsealed store. A missing schema file means the standard
    /// catalog.
    static Store load(const std::filesystem::path& path);
    static Store from_ntriples(std::string_view text, Schema schema = Schema::standard());

    static std::filesystem::path schema_path(const std::filesystem::path& path);

private:
    TermId intern(const Term& t);
    [[nodiscard]] std::string ntriples_of(const Term& t) const;
    void check(const Triple& t) const;

    Schema schema_;
    bool sealed_{false};
    std::vector<geo::Geometry> geometries_;
    std::vector<Term> terms_;
    std::unordered_map<std::string, TermId> ids_;
    std::set<IdTriple> spo_;
    std::set<IdTriple> pos_;
    std::set<IdTriple> osp_;
    std::vector<TermId> geometry_subject_;
    geo::SpatialIndex spatial_;
    std::vector<GeometryHandle> spatial_handles_;
};

}  // namespace chronomap::kg
