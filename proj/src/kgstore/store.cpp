#include "chronomap/kgstore/store.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "chronomap/geometry/io.hpp"
#include "chronomap/kgstore/vocab.hpp"

namespace chronomap::kg {

namespace {

constexpr TermId kAny = std::numeric_limits<TermId>::max();

// Position of S, P, O inside each index key.
constexpr std::array<int, 3> kSpoOrder{0, 1, 2};
constexpr std::array<int, 3> kPosOrder{1, 2, 0};
constexpr std::array<int, 3> kOspOrder{2, 0, 1};

IdTriple permute(const IdTriple& spo, const std::array<int, 3>& order) {
    return {spo[order[0]], spo[order[1]], spo[order[2]]};
}

IdTriple unpermute(const IdTriple& key, const std::array<int, 3>& order) {
    IdTriple spo{};
    for (int i = 0; i < 3; ++i) spo[order[i]] = key[i];
    return spo;
}

void scan(const std::set<IdTriple>& index, const std::array<int, 3>& order, const IdTriple& pattern,
          std::vector<IdTriple>& out) {
    const IdTriple want = permute(pattern, order);
    IdTriple lo{0, 0, 0};
    std::size_t prefix = 0;
    while (prefix < 3 && want[prefix] != kAny) {
        lo[prefix] = want[prefix];
        ++prefix;
    }
    for (auto it = index.lower_bound(lo); it != index.end(); ++it) {
        bool in_prefix = true;
        for (std::size_t i = 0; i < prefix; ++i) in_prefix = in_prefix && (*it)[i] == want[i];
        if (!in_prefix) break;
        bool ok = true;
        for (std::size_t i = prefix; i < 3; ++i) ok = ok && (want[i] == kAny || (*it)[i] == want[i]);
        if (ok) out.push_back(unpermute(*it, order));
    }
}

}  // namespace

Store::Store(Schema schema) : schema_(std::move(schema)) {}

GeometryHandle Store::add_geometry(geo::Geometry g) {
    if (sealed_) throw StoreError(StoreError::Code::sealed, "store is sealed");
    geometries_.push_back(std::move(g));
    return static_cast<GeometryHandle>(geometries_.size() - 1);
}

const geo::Geometry& Store::geometry(GeometryHandle h) const {
    if (h >= geometries_.size()) throw StoreError(StoreError::Code::type_violation, "unknown geometry handle");
    return geometries_[h];
}

void Store::check(const Triple& t) const {
    if (!t.subject.is_iri()) throw StoreError(StoreError::Code::type_violation, "subject must be an IRI");
    if (!t.predicate.is_iri()) throw StoreError(StoreError::Code::type_violation, "predicate must be an IRI");
    const std::string& p = t.predicate.text();
    if (const PropertyDef* def = schema_.property(p)) {
        if (!Schema::accepts(def->range, t.object)) {
            throw StoreError(StoreError::Code::type_violation,
                             compact_iri(p) + " expects " + std::string(to_string(def->range)) + ", got " +
                                 std::string(to_string(t.object.kind())));
        }
        if (t.object.kind() == TermKind::geometry && t.object.handle() >= geometries_.size()) {
            throw StoreError(StoreError::Code::type_violation, "unknown geometry handle");
        }
        if (def->cardinality == Cardinality::fixed || !def->multi) {
            const auto s = lookup(t.subject);
            const auto pid = lookup(t.predicate);
            if (s && pid) {
                for (const auto& row : match_ids(s, pid, std::nullopt)) {
                    if (terms_[row[2]] != t.object) {
                        throw StoreError(StoreError::Code::schema_violation,
                                         compact_iri(p) + " is single-valued for " + t.subject.text());
                    }
                }
            }
        }
        return;
    }
    if (schema_.relation(p) != nullptr) {
        if (!t.object.is_iri()) throw StoreError(StoreError::Code::type_violation, "relation object must be an IRI");
        return;
    }
    throw StoreError(StoreError::Code::schema_violation, "predicate not in schema: " + p);
}

TermId Store::intern(const Term& t) {
    auto key = t.to_ntriples();
    const auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<TermId>(terms_.size());
    terms_.push_back(t);
    ids_.emplace(std::move(key), id);
    return id;
}

bool Store::insert(const Triple& t) {
    if (sealed_) throw StoreError(StoreError::Code::sealed, "store is sealed");
    check(t);
    const IdTriple row{intern(t.subject), intern(t.predicate), intern(t.object)};
    if (!spo_.insert(row).second) return false;
    pos_.insert(permute(row, kPosOrder));
    osp_.insert(permute(row, kOspOrder));
    return true;
}

void Store::seal() {
    if (sealed_) return;
    // Renumber so id order equals serialization order; SPO iteration is then
    // already in canonical output order.
    std::vector<std::string> keys(terms_.size());
    for (const auto& [key, id] : ids_) keys[id] = key;
    std::vector<TermId> order(terms_.size());
    std::iota(order.begin(), order.end(), TermId{0});
    std::sort(order.begin(), order.end(), [&](TermId a, TermId b) { return keys[a] < keys[b]; });
    std::vector<TermId> remap(terms_.size());
    std::vector<Term> terms(terms_.size());
    for (TermId fresh = 0; fresh < order.size(); ++fresh) {
        remap[order[fresh]] = fresh;
        terms[fresh] = std::move(terms_[order[fresh]]);
        ids_[keys[order[fresh]]] = fresh;
    }
    terms_ = std::move(terms);
    std::set<IdTriple> spo;
    for (const auto& r : spo_) spo.insert({remap[r[0]], remap[r[1]], remap[r[2]]});
    spo_ = std::move(spo);
    pos_.clear();
    osp_.clear();
    for (const auto& r : spo_) {
        pos_.insert(permute(r, kPosOrder));
        osp_.insert(permute(r, kOspOrder));
    }

    std::vector<geo::BBox> boxes;
    if (const auto wkt = lookup(Term::iri(cmo("wkt")))) {
        for (const auto& r : match_ids(std::nullopt, wkt, std::nullopt)) {
            const GeometryHandle h = terms_[r[2]].handle();
            if (geometries_[h].empty()) continue;
            spatial_handles_.push_back(h);
            geometry_subject_.push_back(r[0]);
            boxes.push_back(geometries_[h].bbox());
        }
    }
    spatial_ = geo::SpatialIndex(boxes);
    sealed_ = true;
}

std::optional<TermId> Store::lookup(const Term& t) const {
    const auto it = ids_.find(t.to_ntriples());
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::vector<IdTriple> Store::match_ids(std::optional<TermId> s, std::optional<TermId> p, std::optional<TermId> o,
                                       IndexChoice via) const {
    const IdTriple pattern{s.value_or(kAny), p.value_or(kAny), o.value_or(kAny)};
    if (via == IndexChoice::automatic) {
        if (s) {
            via = (!p && o) ? IndexChoice::osp : IndexChoice::spo;
        } else if (p) {
            via = IndexChoice::pos;
        } else if (o) {
            via = IndexChoice::osp;
        } else {
            via = IndexChoice::spo;
        }
    }
    std::vector<IdTriple> out;
    switch (via) {
        case IndexChoice::pos: scan(pos_, kPosOrder, pattern, out); break;
        case IndexChoice::osp: scan(osp_, kOspOrder, pattern, out); break;
        default: scan(spo_, kSpoOrder, pattern, out); break;
    }
    if (sealed_) {
        std::sort(out.begin(), out.end());
    } else {
        std::sort(out.begin(), out.end(), [&](const IdTriple& a, const IdTriple& b) {
            for (int i = 0; i < 3; ++i) {
                if (a[i] == b[i]) continue;
                return terms_[a[i]].to_ntriples() < terms_[b[i]].to_ntriples();
            }
            return false;
        });
    }
    return out;
}

std::vector<Triple> Store::match(const std::optional<Term>& s, const std::optional<Term>& p,
                                 const std::optional<Term>& o, IndexChoice via) const {
    std::optional<TermId> ids[3];
    const std::optional<Term>* bound[3] = {&s, &p, &o};
    for (int i = 0; i < 3; ++i) {
        if (!*bound[i]) continue;
        ids[i] = lookup(**bound[i]);
        if (!ids[i]) return {};
    }
    std::vector<Triple> out;
    for (const auto& r : match_ids(ids[0], ids[1], ids[2], via)) {
        out.push_back({terms_[r[0]], terms_[r[1]], terms_[r[2]]});
    }
    return out;
}

std::vector<std::string> Store::features_in(const geo::BBox& window) const {
    std::vector<std::string> out;
    for (auto i : spatial_.query(window)) out.push_back(terms_[geometry_subject_[i]].text());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<geo::Geometry> Store::geometry_of(const std::string& feature_iri) const {
    const auto rows = match(Term::iri(feature_iri), Term::iri(cmo("wkt")), std::nullopt);
    if (rows.empty()) return std::nullopt;
    return geometries_.at(rows.front().object.handle());
}

std::string Store::ntriples_of(const Term& t) const {
    if (t.kind() == TermKind::geometry) {
        return "\"" + escape_literal(geo::to_wkt(geometry(t.handle()))) + "\"^^<" + std::string(kWktLiteral) + ">";
    }
    return t.to_ntriples();
}

std::string Store::to_ntriples() const {
    std::vector<IdTriple> rows(spo_.begin(), spo_.end());
    if (!sealed_) rows = match_ids(std::nullopt, std::nullopt, std::nullopt);
    std::string out;
    for (const auto& r : rows) {
        out += ntriples_of(terms_[r[0]]);
        out += ' ';
        out += ntriples_of(terms_[r[1]]);
        out += ' ';
        out += ntriples_of(terms_[r[2]]);
        out += " .\n";
    }
    return out;
}

std::filesystem::path Store::schema_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".schema.json");
}

void Store::dump(const std::filesystem::path& path) const {
    if (!sealed_) throw StoreError(StoreError::Code::sealed, "dump requires a sealed store");
    std::ofstream nt(path, std::ios::binary);
    nt << to_ntriples();
    std::ofstream js(schema_path(path), std::ios::binary);
    js << schema_.to_json().dump(2) << '\n';
    if (!nt || !js) throw StoreError(StoreError::Code::io_error, "cannot write " + path.string());
}

namespace {

class LineParser {
public:
    LineParser(std::string_view line, std::size_t number) : s_(line), line_(number) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }
    [[nodiscard]] bool at_end() {
        skip_ws();
        return pos_ >= s_.size();
    }
    [[nodiscard]] char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    std::string iri() {
        expect('<');
        const auto end = s_.find('>', pos_);
        if (end == std::string_view::npos) fail("unterminated IRI");
        std::string out(s_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }
    std::string quoted() {
        expect('"');
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("dangling escape");
                switch (s_[pos_++]) {
                    case 'n': c = '\n'; break;
                    case 'r': c = '\r'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail("unknown escape");
                }
            }
            out += c;
        }
        if (pos_ >= s_.size()) fail("unterminated literal");
        ++pos_;
        return out;
    }
    bool consume(std::string_view token) {
        skip_ws();
        if (s_.substr(pos_, token.size()) != token) return false;
        pos_ += token.size();
        return true;
    }
    std::string lang_tag() {
        const auto start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw StoreError(StoreError::Code::parse_error, what, line_);
    }

private:
    std::string_view s_;
    std::size_t pos_{0};
    std::size_t line_;
};

}  // namespace

Store Store::from_ntriples(std::string_view text, Schema schema) {
    Store store(std::move(schema));
    std::size_t number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        LineParser lp(line, number);
        if (lp.at_end() || lp.peek() == '#') {
            if (end == text.size()) break;
            continue;
        }
        try {
            const Term s = Term::iri(lp.iri());
            const Term p = Term::iri(lp.iri());
            Term o;
            if (lp.peek() == '<') {
                o = Term::iri(lp.iri());
            } else {
                const std::string lexical = lp.quoted();
                std::string datatype = xsd("string");
                if (lp.consume("^^")) {
                    datatype = lp.iri();
                } else if (lp.consume("@")) {
                    (void)lp.lang_tag();
                }
                if (datatype == kWktLiteral) {
                    o = Term::geometry(store.add_geometry(geo::parse_wkt(lexical)));
                } else {
                    o = Term::literal(lexical, datatype);
                }
            }
            lp.expect('.');
            if (!lp.at_end()) lp.fail("trailing characters");
            store.insert(s, p, o);
        } catch (const StoreError& e) {
            if (e.line() != 0) throw;
            throw StoreError(e.code(), e.what(), number);
        } catch (const TermError& e) {
            throw StoreError(StoreError::Code::parse_error, e.what(), number);
        } catch (const geo::GeometryError& e) {
            throw StoreError(StoreError::Code::parse_error, e.what(), number);
        }
        if (end == text.size()) break;
    }
    return store;
}

Store Store::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError(StoreError::Code::io_error, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Schema schema = Schema::standard();
    const auto sp = schema_path(path);
    if (std::filesystem::exists(sp)) {
        std::ifstream js(sp);
        try {
            schema = Schema::from_json(nlohmann::json::parse(js));
        } catch (const nlohmann::json::exception& e) {
            throw StoreError(StoreError::Code::parse_error, std::string("schema file: ") + e.what());
        } catch (const SchemaError& e) {
            throw StoreError(StoreError::Code::parse_error, std::string("schema file: ") + e.what());
        }
    }
    return from_ntriples(buf.str(), std::move(schema));
}

}  // namespace chronomap::kg
