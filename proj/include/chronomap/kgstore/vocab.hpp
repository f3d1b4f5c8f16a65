#pragma once

#include <string>
#include <string_view>

// IRI namespaces used by the knowledge graph.

namespace chronomap::kg {

inline constexpr std::string_view kBase = "http://chronomap.local/";
inline constexpr std::string_view kFeatureNs = "http://chronomap.local/feature/";
inline constexpr std::string_view kOntologyNs = "http://chronomap.local/ontology/";
inline constexpr std::string_view kRelationNs = "http://chronomap.local/relation/";
inline constexpr std::string_view kXsdNs = "http://www.w3.org/2001/XMLSchema#";
inline constexpr std::string_view kRdfNs = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
inline constexpr std::string_view kWktLiteral = "http://www.opengis.net/ont/geosparql#wktLiteral";

inline std::string cmo(std::string_view local) { return std::string(kOntologyNs) + std::string(local); }
inline std::string cmr(std::string_view local) { return std::string(kRelationNs) + std::string(local); }
inline std::string xsd(std::string_view local) { return std::string(kXsdNs) + std::string(local); }

/// cmf:{sheet}_{year}_{type}_{seq} with seq zero-padded to four digits.
std::string feature_iri(std::string_view sheet, int year, std::string_view type, std::size_t seq);

/// Replaces a known namespace with its prefix ("cmo:year"); other IRIs are
/// returned in angle brackets.
std::string compact_iri(std::string_view iri);

}  // namespace chronomap::kg
