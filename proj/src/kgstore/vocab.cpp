#include "chronomap/kgstore/vocab.hpp"

#include <cctype>
#include <cstdio>

namespace chronomap::kg {

namespace {

std::string iri_safe(std::string_view s) {
    std::string out;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        out += (std::isalnum(u) || c == '-' || c == '.') ? c : '-';
    }
    return out;
}

}  // namespace

std::string feature_iri(std::string_view sheet, int year, std::string_view type, std::size_t seq) {
    char num[16];
    std::snprintf(num, sizeof num, "%04zu", seq);
    return std::string(kFeatureNs) + iri_safe(sheet) + "_" + std::to_string(year) + "_" + iri_safe(type) + "_" + num;
}

std::string compact_iri(std::string_view iri) {
    static constexpr std::pair<std::string_view, std::string_view> prefixes[] = {
        {"cmf:", kFeatureNs}, {"cmo:", kOntologyNs}, {"cmr:", kRelationNs}, {"xsd:", kXsdNs}, {"rdf:", kRdfNs}};
    for (const auto& [prefix, ns] : prefixes) {
        if (iri.substr(0, ns.size()) == ns) return std::string(prefix) + std::string(iri.substr(ns.size()));
    }
    return "<" + std::string(iri) + ">";
}

}  // namespace chronomap::kg
