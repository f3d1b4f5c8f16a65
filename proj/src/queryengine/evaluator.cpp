#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "chronomap/geometry/io.hpp"
#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/query/query.hpp"

namespace chronomap::query {

using kg::Term;
using kg::TermId;
using kg::TermKind;

int compare_terms(const Term& a, const Term& b) {
    auto rank = [](const Term& t) {
        switch (t.kind()) {
            case TermKind::integer:
            case TermKind::decimal: return 0;
            case TermKind::string: return 1;
            case TermKind::boolean: return 2;
            case TermKind::iri: return 3;
            case TermKind::geometry: return 4;
        }
        return 5;
    };
    const int ra = rank(a);
    const int rb = rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (ra) {
        case 0: {
            const double x = a.as_number();
            const double y = b.as_number();
            if (x != y) return x < y ? -1 : 1;
            if (a.kind() != b.kind()) return a.kind() == TermKind::integer ? -1 : 1;
            return 0;
        }
        case 2: return static_cast<int>(a.as_boolean()) - static_cast<int>(b.as_boolean());
        case 4: return a.handle() < b.handle() ? -1 : (a.handle() > b.handle() ? 1 : 0);
        default: {
            const int c = a.text().compare(b.text());
            return c < 0 ? -1 : (c > 0 ? 1 : 0);
        }
    }
}

namespace {

using IdRow = std::vector<std::optional<TermId>>;
using TermRow = std::vector<std::optional<Term>>;

struct Val {
    enum class State : std::uint8_t { ok, unbound, error };
    State state{State::ok};
    Term term;

    static Val error() { return {State::error, {}}; }
    static Val unbound() { return {State::unbound, {}}; }
    static Val of(Term t) { return {State::ok, std::move(t)}; }
    [[nodiscard]] bool ok() const { return state == State::ok; }
};

Val propagate(const Val& a, const Val& b) {
    if (a.state == Val::State::error || b.state == Val::State::error) return Val::error();
    return Val::unbound();
}

Val ebv(const Val& v) {
    if (!v.ok()) return v;
    switch (v.term.kind()) {
        case TermKind::boolean: return v;
        case TermKind::integer: return Val::of(Term::boolean(v.term.as_integer() != 0));
        case TermKind::decimal: return Val::of(Term::boolean(v.term.as_decimal() != 0.0));
        case TermKind::string: return Val::of(Term::boolean(!v.term.text().empty()));
        default: return Val::error();
    }
}

Val arithmetic(BinaryOp op, const Term& a, const Term& b) {
    if (!a.is_numeric() || !b.is_numeric()) return Val::error();
    if (a.kind() == TermKind::integer && b.kind() == TermKind::integer && op != BinaryOp::div) {
        std::int64_t r = 0;
        bool overflow = false;
        switch (op) {
            case BinaryOp::add: overflow = __builtin_add_overflow(a.as_integer(), b.as_integer(), &r); break;
            case BinaryOp::sub: overflow = __builtin_sub_overflow(a.as_integer(), b.as_integer(), &r); break;
            default: overflow = __builtin_mul_overflow(a.as_integer(), b.as_integer(), &r); break;
        }
        if (!overflow) return Val::of(Term::integer(r));
    }
    const double x = a.as_number();
    const double y = b.as_number();
    double r = 0.0;
    switch (op) {
        case BinaryOp::add: r = x + y; break;
        case BinaryOp::sub: r = x - y; break;
        case BinaryOp::mul: r = x * y; break;
        default:
            if (y == 0.0) return Val::error();
            r = x / y;
    }
    if (!std::isfinite(r)) return Val::error();
    return Val::of(Term::decimal(r));
}

Val compare(BinaryOp op, const Term& a, const Term& b) {
    const bool equality = op == BinaryOp::eq || op == BinaryOp::ne;
    int c = 0;
    if (a.is_numeric() && b.is_numeric()) {
        c = a.as_number() < b.as_number() ? -1 : (a.as_number() > b.as_number() ? 1 : 0);
    } else if (a.kind() == b.kind() &&
               (a.kind() == TermKind::string || a.kind() == TermKind::boolean ||
                (equality && (a.kind() == TermKind::iri || a.kind() == TermKind::geometry)))) {
        c = compare_terms(a, b);
    } else if (equality && (a.is_iri() || b.is_iri() || a.kind() == TermKind::geometry ||
                            b.kind() == TermKind::geometry)) {
        c = 1;  // distinct RDF terms
    } else {
        return Val::error();
    }
    bool r = false;
    switch (op) {
        case BinaryOp::eq: r = c == 0; break;
        case BinaryOp::ne: r = c != 0; break;
        case BinaryOp::lt: r = c < 0; break;
        case BinaryOp::le: r = c <= 0; break;
        case BinaryOp::gt: r = c > 0; break;
        default: r = c >= 0; break;
    }
    return Val::of(Term::boolean(r));
}

class Evaluator {
public:
    Evaluator(const Query& q, const kg::Store& store) : q_(q), store_(store) {
        const auto vars = q.pattern_variables();
        for (std::size_t i = 0; i < vars.size(); ++i) slot_[vars[i]] = i;
        width_ = vars.size();
    }

    QueryResult run() {
        QueryResult result;
        result.form = q_.form;
        auto rows = group(q_.where, {IdRow(width_)});
        result.filter_type_mismatches = mismatches_;
        if (q_.form == Form::ask) {
            result.boolean = !rows.empty();
            return result;
        }

        std::vector<std::string> columns;
        std::vector<TermRow> ext;
        if (q_.has_aggregates() || !q_.group_by.empty()) {
            aggregate(rows, columns, ext);
        } else {
            columns = q_.pattern_variables();
            ext.reserve(rows.size());
            for (const auto& r : rows) {
                TermRow t(width_);
                for (std::size_t i = 0; i < width_; ++i) {
                    if (r[i]) t[i] = store_.term(*r[i]);
                }
                ext.push_back(std::move(t));
            }
        }
        order(columns, ext);

        result.table.vars = q_.output_variables();
        std::vector<std::size_t> pick;
        for (const auto& v : result.table.vars) {
            pick.push_back(static_cast<std::size_t>(std::find(columns.begin(), columns.end(), v) - columns.begin()));
        }
        std::set<std::vector<std::string>> seen;
        const std::size_t offset = q_.offset.value_or(0);
        std::size_t skipped = 0;
        for (auto& r : ext) {
            if (q_.limit && result.table.rows.size() >= *q_.limit) break;
            TermRow out;
            out.reserve(pick.size());
            for (auto i : pick) out.push_back(i < r.size() ? r[i] : std::nullopt);
            if (q_.distinct) {
                std::vector<std::string> key;
                for (const auto& c : out) key.push_back(c ? c->to_ntriples() : std::string());
                if (!seen.insert(std::move(key)).second) continue;
            }
            if (skipped < offset) {
                ++skipped;
                continue;
            }
            result.table.rows.push_back(std::move(out));
        }
        return result;
    }

private:
    std::optional<TermId> resolve(const TermPat& p, const IdRow& row, bool& impossible) const {
        if (const auto* v = std::get_if<Var>(&p)) return row[slot_.at(v->name)];
        const auto id = store_.lookup(std::get<Term>(p));
        if (!id) impossible = true;
        return id;
    }

    std::vector<IdRow> join(const std::vector<const TriplePattern*>& patterns, std::vector<IdRow> rows) const {
        if (patterns.empty() || rows.empty()) return rows;
        // Greedy order: most positions bound (constant or already joined) first.
        std::set<std::size_t> bound;
        for (std::size_t i = 0; i < width_; ++i) {
            if (std::all_of(rows.begin(), rows.end(), [&](const IdRow& r) { return r[i].has_value(); })) bound.insert(i);
        }
        std::vector<const TriplePattern*> todo = patterns;
        std::vector<const TriplePattern*> plan;
        while (!todo.empty()) {
            auto score = [&](const TriplePattern* t) {
                int s = 0;
                for (const TermPat* p : {&t->subject, &t->predicate, &t->object}) {
                    const auto* v = std::get_if<Var>(p);
                    if (!v || bound.count(slot_.at(v->name))) ++s;
                }
                return s;
            };
            auto best = std::max_element(todo.begin(), todo.end(),
                                         [&](const auto* x, const auto* y) { return score(x) < score(y); });
            plan.push_back(*best);
            for (const TermPat* p : {&(*best)->subject, &(*best)->predicate, &(*best)->object}) {
                if (const auto* v = std::get_if<Var>(p)) bound.insert(slot_.at(v->name));
            }
            todo.erase(best);
        }

        for (const TriplePattern* t : plan) {
            std::vector<IdRow> next;
            const TermPat* pats[3] = {&t->subject, &t->predicate, &t->object};
            for (const auto& row : rows) {
                bool impossible = false;
                const auto s = resolve(t->subject, row, impossible);
                const auto p = resolve(t->predicate, row, impossible);
                const auto o = resolve(t->object, row, impossible);
                if (impossible) return {};
                for (const auto& m : store_.match_ids(s, p, o)) {
                    IdRow ext = row;
                    bool consistent = true;
                    for (int k = 0; k < 3 && consistent; ++k) {
                        const auto* v = std::get_if<Var>(pats[k]);
                        if (!v) continue;
                        auto& cell = ext[slot_.at(v->name)];
                        if (cell && *cell != m[static_cast<std::size_t>(k)]) consistent = false;
                        cell = m[static_cast<std::size_t>(k)];
                    }
                    if (consistent) next.push_back(std::move(ext));
                }
            }
            rows = std::move(next);
            if (rows.empty()) break;
        }
        return rows;
    }

    std::vector<IdRow> group(const GroupPattern& g, std::vector<IdRow> rows) {
        std::vector<const TriplePattern*> block;
        std::vector<const Expr*> filters;
        for (const auto& el : g.elements) {
            if (const auto* t = std::get_if<TriplePattern>(&el)) {
                block.push_back(t);
            } else if (const auto* f = std::get_if<Filter>(&el)) {
                filters.push_back(&f->expr);
            } else {
                rows = join(block, std::move(rows));
                block.clear();
                const auto& opt = *std::get<OptionalPattern>(el).group;
                std::vector<IdRow> next;
                for (auto& row : rows) {
                    auto sub = group(opt, {row});
                    if (sub.empty()) {
                        next.push_back(std::move(row));
                    } else {
                        for (auto& r : sub) next.push_back(std::move(r));
                    }
                }
                rows = std::move(next);
            }
        }
        rows = join(block, std::move(rows));
        if (filters.empty()) return rows;
        std::vector<IdRow> kept;
        for (auto& row : rows) {
            bool keep = true;
            for (const Expr* f : filters) {
                const Val v = ebv(eval(*f, row));
                if (v.state == Val::State::error) ++mismatches_;
                if (!v.ok() || !v.term.as_boolean()) {
                    keep = false;
                    break;
                }
            }
            if (keep) kept.push_back(std::move(row));
        }
        return kept;
    }

    Val eval(const Expr& e, const IdRow& row) const {
        return std::visit(
            [&](const auto& n) -> Val {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Var>) {
                    const auto it = slot_.find(n.name);
                    if (it == slot_.end() || !row[it->second]) return Val::unbound();
                    return Val::of(store_.term(*row[it->second]));
                } else if constexpr (std::is_same_v<T, Term>) {
                    return Val::of(n);
                } else if constexpr (std::is_same_v<T, UnaryExpr>) {
                    const Val v = eval(*n.operand, row);
                    if (n.op == UnaryOp::logical_not) {
                        const Val b = ebv(v);
                        return b.ok() ? Val::of(Term::boolean(!b.term.as_boolean())) : b;
                    }
                    if (!v.ok()) return v;
                    if (v.term.kind() == TermKind::integer) return Val::of(Term::integer(-v.term.as_integer()));
                    if (v.term.kind() == TermKind::decimal) return Val::of(Term::decimal(-v.term.as_decimal()));
                    return Val::error();
                } else {
                    if (n.op == BinaryOp::logical_or || n.op == BinaryOp::logical_and) {
                        const Val l = ebv(eval(*n.lhs, row));
                        const Val r = ebv(eval(*n.rhs, row));
                        const bool want = n.op == BinaryOp::logical_or;
                        if ((l.ok() && l.term.as_boolean() == want) || (r.ok() && r.term.as_boolean() == want)) {
                            return Val::of(Term::boolean(want));
                        }
                        if (l.ok() && r.ok()) return Val::of(Term::boolean(!want));
                        return propagate(l, r);
                    }
                    const Val l = eval(*n.lhs, row);
                    const Val r = eval(*n.rhs, row);
                    if (!l.ok() || !r.ok()) return propagate(l, r);
                    switch (n.op) {
                        case BinaryOp::add:
                        case BinaryOp::sub:
                        case BinaryOp::mul:
                        case BinaryOp::div: return arithmetic(n.op, l.term, r.term);
                        default: return compare(n.op, l.term, r.term);
                    }
                }
            },
            e.node);
    }

    static std::string row_key(const TermRow& r) {
        std::string key;
        for (const auto& c : r) {
            key += c ? c->to_ntriples() : std::string("\x01");
            key += '\x00';
        }
        return key;
    }

    std::optional<Term> aggregate_value(const Aggregate& a, const std::vector<const TermRow*>& members) const {
        if (a.fn == AggFn::count && !a.var) {
            if (!a.distinct) return Term::integer(static_cast<std::int64_t>(members.size()));
            std::set<std::string> keys;
            for (const auto* m : members) keys.insert(row_key(*m));
            return Term::integer(static_cast<std::int64_t>(keys.size()));
        }
        const std::size_t idx = slot_.at(*a.var);
        std::vector<Term> values;
        std::set<std::string> seen;
        for (const auto* m : members) {
            const auto& c = (*m)[idx];
            if (!c) continue;
            if (a.distinct && !seen.insert(c->to_ntriples()).second) continue;
            values.push_back(*c);
        }
        switch (a.fn) {
            case AggFn::count: return Term::integer(static_cast<std::int64_t>(values.size()));
            case AggFn::min:
            case AggFn::max: {
                if (values.empty()) return std::nullopt;
                const bool want_min = a.fn == AggFn::min;
                return *std::min_element(values.begin(), values.end(), [&](const Term& x, const Term& y) {
                    return want_min ? compare_terms(x, y) < 0 : compare_terms(x, y) > 0;
                });
            }
            default: {
                if (values.empty()) return std::nullopt;
                Term sum = Term::integer(0);
                for (const auto& v : values) {
                    const Val s = arithmetic(BinaryOp::add, sum, v);
                    if (!s.ok()) return std::nullopt;
                    sum = s.term;
                }
                if (a.fn == AggFn::sum) return sum;
                return Term::decimal(sum.as_number() / static_cast<double>(values.size()));
            }
        }
    }

    void aggregate(const std::vector<IdRow>& rows, std::vector<std::string>& columns, std::vector<TermRow>& out) const {
        std::vector<TermRow> full;
        full.reserve(rows.size());
        for (const auto& r : rows) {
            TermRow t(width_);
            for (std::size_t i = 0; i < width_; ++i) {
                if (r[i]) t[i] = store_.term(*r[i]);
            }
            full.push_back(std::move(t));
        }
        std::vector<std::vector<const TermRow*>> groups;
        std::vector<TermRow> keys;
        std::unordered_map<std::string, std::size_t> index;
        for (const auto& r : full) {
            TermRow key;
            for (const auto& g : q_.group_by) key.push_back(r[slot_.at(g)]);
            const auto [it, fresh] = index.emplace(row_key(key), groups.size());
            if (fresh) {
                groups.emplace_back();
                keys.push_back(std::move(key));
            }
            groups[it->second].push_back(&r);
        }
        if (groups.empty() && q_.group_by.empty()) {
            groups.emplace_back();
            keys.emplace_back();
        }
        columns = q_.group_by;
        std::vector<const Aggregate*> aggs;
        for (const auto& p : q_.projection) {
            if (const auto* a = std::get_if<Aggregate>(&p)) {
                aggs.push_back(a);
                columns.push_back(a->alias);
            }
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            TermRow row = keys[g];
            for (const auto* a : aggs) row.push_back(aggregate_value(*a, groups[g]));
            out.push_back(std::move(row));
        }
    }

    void order(const std::vector<std::string>& columns, std::vector<TermRow>& rows) const {
        if (q_.order_by.empty()) return;
        std::vector<std::pair<std::size_t, bool>> keys;
        for (const auto& k : q_.order_by) {
            keys.emplace_back(static_cast<std::size_t>(std::find(columns.begin(), columns.end(), k.var) - columns.begin()),
                              k.descending);
        }
        std::stable_sort(rows.begin(), rows.end(), [&](const TermRow& a, const TermRow& b) {
            for (const auto& [i, desc] : keys) {
                const auto& x = a[i];
                const auto& y = b[i];
                if (!x || !y) {
                    if (x.has_value() != y.has_value()) return x.has_value();  // unbound last
                    continue;
                }
                const int c = compare_terms(*x, *y);
                if (c != 0) return desc ? c > 0 : c < 0;
            }
            return false;
        });
    }

    const Query& q_;
    const kg::Store& store_;
    std::unordered_map<std::string, std::size_t> slot_;
    std::size_t width_{0};
    std::size_t mismatches_{0};
};

nlohmann::json binding(const Term& t, const kg::Store& store) {
    switch (t.kind()) {
        case TermKind::iri: return {{"type", "uri"}, {"value", t.text()}};
        case TermKind::string: return {{"type", "literal"}, {"value", t.text()}};
        case TermKind::geometry:
            return {{"type", "literal"},
                    {"value", geo::to_wkt(store.geometry(t.handle()))},
                    {"datatype", std::string(kg::kWktLiteral)}};
        default: return {{"type", "literal"}, {"value", t.lexical()}, {"datatype", t.datatype()}};
    }
}

}  // namespace

QueryResult evaluate(const Query& q, const kg::Store& store) { return Evaluator(q, store).run(); }

nlohmann::json to_sparql_json(const QueryResult& r, const kg::Store& store) {
    if (r.form == Form::ask) return {{"head", nlohmann::json::object()}, {"boolean", r.boolean}};
    nlohmann::json bindings = nlohmann::json::array();
    for (const auto& row : r.table.rows) {
        nlohmann::json b = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i]) b[r.table.vars[i]] = binding(*row[i], store);
        }
        bindings.push_back(std::move(b));
    }
    return {{"head", {{"vars", r.table.vars}}}, {"results", {{"bindings", bindings}}}};
}

}  // namespace chronomap::query
