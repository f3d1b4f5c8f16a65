#pragma once

// Naive reference evaluator: every triple block is solved by enumerating
// assignments of its fresh variables over the store's term universe. Also a
// generator of random queries over the map ontology.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chronomap/kgstore/store.hpp"
#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/query/query.hpp"
#include "support/random_geometry.hpp"

namespace chronomap::testing {

using Binding = std::map<std::string, kg::Term>;

struct NaiveStore {
    std::vector<kg::Term> universe;
    std::set<std::string> triples;

    explicit NaiveStore(const kg::Store& store) {
        std::set<std::string> seen;
        for (const auto& t : store.match(std::nullopt, std::nullopt, std::nullopt)) {
            triples.insert(t.subject.to_ntriples() + t.predicate.to_ntriples() + t.object.to_ntriples());
            for (const auto* term : {&t.subject, &t.predicate, &t.object}) {
                if (seen.insert(term->to_ntriples()).second) universe.push_back(*term);
            }
        }
    }
};

// Tri-state value: nullopt term with error flag distinguishes type errors
// from unbound variables.
struct NVal {
    bool error{false};
    std::optional<kg::Term> term;
};

inline bool naive_numeric(const kg::Term& t) {
    return t.kind() == kg::TermKind::integer || t.kind() == kg::TermKind::decimal;
}

inline double naive_number(const kg::Term& t) {
    return t.kind() == kg::TermKind::integer ? static_cast<double>(t.as_integer()) : t.as_decimal();
}

inline NVal naive_truth(const NVal& v) {
    if (v.error || !v.term) return v;
    const auto& t = *v.term;
    switch (t.kind()) {
        case kg::TermKind::boolean: return v;
        case kg::TermKind::integer:
        case kg::TermKind::decimal: return {false, kg::Term::boolean(naive_number(t) != 0)};
        case kg::TermKind::string: return {false, kg::Term::boolean(!t.text().empty())};
        default: return {true, std::nullopt};
    }
}

inline NVal naive_eval(const query::Expr& e, const Binding& b) {
    using namespace query;
    if (const auto* v = std::get_if<Var>(&e.node)) {
        const auto it = b.find(v->name);
        if (it == b.end()) return {};
        return {false, it->second};
    }
    if (const auto* t = std::get_if<kg::Term>(&e.node)) return {false, *t};
    if (const auto* u = std::get_if<UnaryExpr>(&e.node)) {
        const NVal x = naive_eval(*u->operand, b);
        if (u->op == UnaryOp::logical_not) {
            const NVal tv = naive_truth(x);
            if (tv.error || !tv.term) return tv;
            return {false, kg::Term::boolean(!tv.term->as_boolean())};
        }
        if (x.error || !x.term) return x;
        if (!naive_numeric(*x.term)) return {true, std::nullopt};
        if (x.term->kind() == kg::TermKind::integer) return {false, kg::Term::integer(-x.term->as_integer())};
        return {false, kg::Term::decimal(-x.term->as_decimal())};
    }
    const auto& bin = std::get<BinaryExpr>(e.node);
    if (bin.op == BinaryOp::logical_and || bin.op == BinaryOp::logical_or) {
        const NVal l = naive_truth(naive_eval(*bin.lhs, b));
        const NVal r = naive_truth(naive_eval(*bin.rhs, b));
        const bool dominant = bin.op == BinaryOp::logical_or;
        const bool l_ok = !l.error && l.term;
        const bool r_ok = !r.error && r.term;
        if ((l_ok && l.term->as_boolean() == dominant) || (r_ok && r.term->as_boolean() == dominant)) {
            return {false, kg::Term::boolean(dominant)};
        }
        if (l_ok && r_ok) return {false, kg::Term::boolean(!dominant)};
        return {l.error || r.error, std::nullopt};
    }
    const NVal l = naive_eval(*bin.lhs, b);
    const NVal r = naive_eval(*bin.rhs, b);
    if (l.error || r.error) return {true, std::nullopt};
    if (!l.term || !r.term) return {};
    const kg::Term& x = *l.term;
    const kg::Term& y = *r.term;
    switch (bin.op) {
        case BinaryOp::add:
        case BinaryOp::sub:
        case BinaryOp::mul:
        case BinaryOp::div: {
            if (!naive_numeric(x) || !naive_numeric(y)) return {true, std::nullopt};
            const double a = naive_number(x);
            const double c = naive_number(y);
            if (bin.op == BinaryOp::div) {
                if (c == 0) return {true, std::nullopt};
                return {false, kg::Term::decimal(a / c)};
            }
            const double v = bin.op == BinaryOp::add ? a + c : bin.op == BinaryOp::sub ? a - c : a * c;
            if (x.kind() == kg::TermKind::integer && y.kind() == kg::TermKind::integer) {
                return {false, kg::Term::integer(static_cast<std::int64_t>(v))};
            }
            return {false, kg::Term::decimal(v)};
        }
        default: break;
    }
    int cmp = 0;
    const bool eq_op = bin.op == BinaryOp::eq || bin.op == BinaryOp::ne;
    if (naive_numeric(x) && naive_numeric(y)) {
        cmp = naive_number(x) < naive_number(y) ? -1 : naive_number(x) > naive_number(y) ? 1 : 0;
    } else if (x.kind() == kg::TermKind::string && y.kind() == kg::TermKind::string) {
        cmp = x.text() < y.text() ? -1 : x.text() > y.text() ? 1 : 0;
    } else if (x.kind() == kg::TermKind::boolean && y.kind() == kg::TermKind::boolean) {
        cmp = static_cast<int>(x.as_boolean()) - static_cast<int>(y.as_boolean());
    } else if (eq_op && (x.is_iri() || y.is_iri())) {
        cmp = (x.is_iri() && y.is_iri() && x.text() == y.text()) ? 0 : 1;
    } else {
        return {true, std::nullopt};
    }
    bool res = false;
    switch (bin.op) {
        case BinaryOp::eq: res = cmp == 0; break;
        case BinaryOp::ne: res = cmp != 0; break;
        case BinaryOp::lt: res = cmp < 0; break;
        case BinaryOp::le: res = cmp <= 0; break;
        case BinaryOp::gt: res = cmp > 0; break;
        default: res = cmp >= 0; break;
    }
    return {false, kg::Term::boolean(res)};
}

inline bool naive_holds(const NaiveStore& ns, const query::TriplePattern& t, const Binding& b) {
    std::string key;
    for (const auto* p : {&t.subject, &t.predicate, &t.object}) {
        if (const auto* v = std::get_if<query::Var>(p)) {
            key += b.at(v->name).to_ntriples();
        } else {
            key += std::get<kg::Term>(*p).to_ntriples();
        }
    }
    return ns.triples.count(key) != 0;
}

// Assigns fresh variables one at a time from the universe; a pattern is
// checked once its last fresh variable is bound, which prunes the search
// without changing the set of solutions.
inline void naive_assign(const NaiveStore& ns, const std::vector<std::string>& fresh,
                         const std::vector<std::vector<const query::TriplePattern*>>& due, std::size_t depth, Binding& b,
                         std::vector<Binding>& out) {
    if (depth == fresh.size()) {
        out.push_back(b);
        return;
    }
    for (const auto& term : ns.universe) {
        b.insert_or_assign(fresh[depth], term);
        bool ok = true;
        for (const auto* t : due[depth + 1]) {
            if (!naive_holds(ns, *t, b)) {
                ok = false;
                break;
            }
        }
        if (ok) naive_assign(ns, fresh, due, depth + 1, b, out);
    }
    b.erase(fresh[depth]);
}

inline void naive_block(const NaiveStore& ns, const std::vector<const query::TriplePattern*>& block,
                        std::vector<Binding>& sols) {
    if (block.empty()) return;
    std::vector<Binding> out;
    for (const auto& seed : sols) {
        std::vector<std::string> fresh;
        for (const auto* t : block) {
            for (const auto* p : {&t->subject, &t->predicate, &t->object}) {
                if (const auto* v = std::get_if<query::Var>(p)) {
                    if (!seed.count(v->name) && std::find(fresh.begin(), fresh.end(), v->name) == fresh.end()) {
                        fresh.push_back(v->name);
                    }
                }
            }
        }
        // due[k]: patterns whose fresh variables are all among the first k.
        std::vector<std::vector<const query::TriplePattern*>> due(fresh.size() + 1);
        for (const auto* t : block) {
            std::size_t last = 0;
            for (const auto* p : {&t->subject, &t->predicate, &t->object}) {
                if (const auto* v = std::get_if<query::Var>(p)) {
                    const auto it = std::find(fresh.begin(), fresh.end(), v->name);
                    if (it != fresh.end()) last = std::max(last, static_cast<std::size_t>(it - fresh.begin()) + 1);
                }
            }
            due[last].push_back(t);
        }
        Binding b = seed;
        bool ok = true;
        for (const auto* t : due[0]) ok = ok && naive_holds(ns, *t, b);
        if (ok) naive_assign(ns, fresh, due, 0, b, out);
    }
    sols = std::move(out);
}

inline std::vector<Binding> naive_group(const NaiveStore& ns, const query::GroupPattern& g, std::vector<Binding> sols,
                                        std::size_t* mismatches) {
    std::vector<const query::TriplePattern*> block;
    std::vector<const query::Expr*> filters;
    for (const auto& el : g.elements) {
        if (const auto* t = std::get_if<query::TriplePattern>(&el)) {
            block.push_back(t);
        } else if (const auto* f = std::get_if<query::Filter>(&el)) {
            filters.push_back(&f->expr);
        } else {
            naive_block(ns, block, sols);
            block.clear();
            std::vector<Binding> next;
            for (const auto& s : sols) {
                auto sub = naive_group(ns, *std::get<query::OptionalPattern>(el).group, {s}, mismatches);
                if (sub.empty()) {
                    next.push_back(s);
                } else {
                    next.insert(next.end(), sub.begin(), sub.end());
                }
            }
            sols = std::move(next);
        }
    }
    naive_block(ns, block, sols);
    std::vector<Binding> kept;
    for (const auto& s : sols) {
        bool keep = true;
        for (const auto* f : filters) {
            const NVal v = naive_truth(naive_eval(*f, s));
            if (v.error && mismatches) ++*mismatches;
            if (v.error || !v.term || !v.term->as_boolean()) {
                keep = false;
                break;
            }
        }
        if (keep) kept.push_back(s);
    }
    return kept;
}

inline int naive_order(const kg::Term& a, const kg::Term& b) {
    auto rank = [](const kg::Term& t) {
        if (naive_numeric(t)) return 0;
        if (t.kind() == kg::TermKind::string) return 1;
        if (t.kind() == kg::TermKind::boolean) return 2;
        return 3;
    };
    if (rank(a) != rank(b)) return rank(a) < rank(b) ? -1 : 1;
    if (rank(a) == 0) {
        if (naive_number(a) != naive_number(b)) return naive_number(a) < naive_number(b) ? -1 : 1;
        return static_cast<int>(a.kind()) - static_cast<int>(b.kind());
    }
    if (rank(a) == 2) return static_cast<int>(a.as_boolean()) - static_cast<int>(b.as_boolean());
    return a.text() < b.text() ? -1 : a.text() > b.text() ? 1 : 0;
}

using NaiveRow = std::vector<std::optional<kg::Term>>;

inline std::optional<kg::Term> naive_aggregate(const query::Aggregate& a, const std::vector<Binding>& members,
                                               const std::vector<std::string>& pattern_vars) {
    if (!a.var) {
        if (!a.distinct) return kg::Term::integer(static_cast<std::int64_t>(members.size()));
        std::set<std::string> keys;
        for (const auto& m : members) {
            std::string k;
            for (const auto& v : pattern_vars) k += (m.count(v) ? m.at(v).to_ntriples() : "-") + "|";
            keys.insert(k);
        }
        return kg::Term::integer(static_cast<std::int64_t>(keys.size()));
    }
    std::vector<kg::Term> vals;
    std::set<std::string> seen;
    for (const auto& m : members) {
        const auto it = m.find(*a.var);
        if (it == m.end()) continue;
        if (a.distinct && !seen.insert(it->second.to_ntriples()).second) continue;
        vals.push_back(it->second);
    }
    if (a.fn == query::AggFn::count) return kg::Term::integer(static_cast<std::int64_t>(vals.size()));
    if (vals.empty()) return std::nullopt;
    if (a.fn == query::AggFn::min || a.fn == query::AggFn::max) {
        kg::Term best = vals[0];
        for (const auto& v : vals) {
            const int c = naive_order(v, best);
            if ((a.fn == query::AggFn::min && c < 0) || (a.fn == query::AggFn::max && c > 0)) best = v;
        }
        return best;
    }
    bool all_int = true;
    double sum = 0;
    for (const auto& v : vals) {
        if (!naive_numeric(v)) return std::nullopt;
        all_int = all_int && v.kind() == kg::TermKind::integer;
        sum += naive_number(v);
    }
    if (a.fn == query::AggFn::avg) return kg::Term::decimal(sum / static_cast<double>(vals.size()));
    if (all_int) return kg::Term::integer(static_cast<std::int64_t>(sum));
    return kg::Term::decimal(sum);
}

struct NaiveResult {
    bool boolean{false};
    std::vector<std::string> vars;
    std::vector<NaiveRow> rows;  // before ORDER BY / LIMIT / OFFSET
    std::size_t mismatches{0};
};

inline NaiveResult naive_evaluate(const query::Query& q, const kg::Store& store) {
    const NaiveStore ns(store);
    NaiveResult res;
    const auto sols = naive_group(ns, q.where, {Binding{}}, &res.mismatches);
    res.boolean = !sols.empty();
    res.vars = q.output_variables();
    const auto pattern_vars = q.pattern_variables();
    std::vector<std::map<std::string, std::optional<kg::Term>>> ext;
    if (q.has_aggregates() || !q.group_by.empty()) {
        std::map<std::string, std::vector<Binding>> groups;
        std::map<std::string, Binding> key_binding;
        for (const auto& s : sols) {
            std::string key;
            Binding kb;
            for (const auto& g : q.group_by) {
                key += (s.count(g) ? s.at(g).to_ntriples() : "-") + "|";
                if (s.count(g)) kb.insert_or_assign(g, s.at(g));
            }
            groups[key].push_back(s);
            key_binding[key] = kb;
        }
        if (groups.empty() && q.group_by.empty()) groups[""];
        for (const auto& [key, members] : groups) {
            std::map<std::string, std::optional<kg::Term>> row;
            for (const auto& [k, v] : key_binding[key]) row[k] = v;
            for (const auto& p : q.projection) {
                if (const auto* a = std::get_if<query::Aggregate>(&p)) row[a->alias] = naive_aggregate(*a, members, pattern_vars);
            }
            ext.push_back(std::move(row));
        }
    } else {
        for (const auto& s : sols) {
            std::map<std::string, std::optional<kg::Term>> row;
            for (const auto& [k, v] : s) row[k] = v;
            ext.push_back(std::move(row));
        }
    }
    std::set<std::string> seen;
    for (const auto& r : ext) {
        NaiveRow out;
        std::string key;
        for (const auto& v : res.vars) {
            const auto it = r.find(v);
            out.push_back(it == r.end() ? std::nullopt : it->second);
            key += (out.back() ? out.back()->to_ntriples() : "-") + "|";
        }
        if (q.distinct && !seen.insert(key).second) continue;
        res.rows.push_back(std::move(out));
    }
    return res;
}

inline std::vector<std::string> row_strings(const std::vector<NaiveRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        std::string s;
        for (const auto& c : r) s += (c ? c->to_ntriples() : "UNBOUND") + " ";
        out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Store with a handful of features, properties and relation edges.
inline kg::Store random_query_store(Rng& rng, int features) {
    kg::Store store;
    const char* types[] = {"lake", "forest", "stream"};
    const char* munis[] = {"aarberg", "seedorf"};
    const char* rels[] = {"near", "northOf", "intersects"};
    std::vector<kg::Term> fs;
    for (int i = 0; i < features; ++i) fs.push_back(kg::Term::iri(kg::feature_iri("q", 1901, "f", static_cast<std::size_t>(i))));
    auto P = [](const char* l) { return kg::Term::iri(kg::cmo(l)); };
    for (const auto& f : fs) {
        store.insert(f, P("featureType"), kg::Term::string(types[rng.index(3)]));
        store.insert(f, P("year"), kg::Term::integer(rng.coin() ? 1901 : 1916));
        if (rng.index(4) != 0) store.insert(f, P("areaSqm"), kg::Term::integer(100 * static_cast<std::int64_t>(rng.index(30))));
        if (rng.coin()) store.insert(f, P("municipality"), kg::Term::string(munis[rng.index(2)]));
    }
    for (int k = 0; k < features; ++k) {
        const auto& a = fs[rng.index(fs.size())];
        const auto& b = fs[rng.index(fs.size())];
        if (a == b) continue;
        store.insert(a, kg::Term::iri(kg::cmr(rels[rng.index(3)])), b);
    }
    store.seal();
    return store;
}

/// Random query drawn from the grammar over random_query_store's vocabulary.
inline query::Query random_query(Rng& rng) {
    using namespace query;
    auto P = [](const char* l) -> TermPat { return kg::Term::iri(kg::cmo(l)); };
    auto R = [](const char* l) -> TermPat { return kg::Term::iri(kg::cmr(l)); };
    const char* types[] = {"lake", "forest", "stream"};
    Query q;
    q.form = rng.index(8) == 0 ? Form::ask : Form::select;

    std::vector<std::string> numeric_vars;
    std::vector<std::string> all_vars{"f"};
    auto& els = q.where.elements;
    els.emplace_back(TriplePattern{Var{"f"}, P("featureType"), rng.coin() ? TermPat{kg::Term::string(types[rng.index(3)])} : TermPat{Var{"t"}}});
    if (std::holds_alternative<Var>(std::get<TriplePattern>(els.back()).object)) all_vars.push_back("t");
    switch (rng.index(4)) {
        case 0:
            els.emplace_back(TriplePattern{Var{"f"}, P("areaSqm"), Var{"a"}});
            numeric_vars.push_back("a");
            all_vars.push_back("a");
            break;
        case 1:
            els.emplace_back(TriplePattern{Var{"f"}, P("year"), rng.coin() ? TermPat{kg::Term::integer(1916)} : TermPat{Var{"y"}}});
            if (std::holds_alternative<Var>(std::get<TriplePattern>(els.back()).object)) {
                numeric_vars.push_back("y");
                all_vars.push_back("y");
            }
            break;
        case 2: {
            const char* rels[] = {"near", "northOf", "intersects"};
            els.emplace_back(TriplePattern{Var{"f"}, rng.index(4) == 0 ? TermPat{Var{"p"}} : R(rels[rng.index(3)]), Var{"g"}});
            all_vars.push_back("g");
            if (std::holds_alternative<Var>(std::get<TriplePattern>(els.back()).predicate)) all_vars.push_back("p");
            break;
        }
        default: break;
    }
    if (rng.index(3) == 0) {
        GroupPattern opt;
        opt.elements.emplace_back(TriplePattern{Var{"f"}, P("municipality"), Var{"m"}});
        if (rng.index(3) == 0) opt.elements.emplace_back(Filter{Expr{BinaryExpr{BinaryOp::eq, Expr{Var{"m"}}, Expr{kg::Term::string("aarberg")}}}});
        els.emplace_back(OptionalPattern{opt});
        all_vars.push_back("m");
    }
    if (rng.coin()) {
        auto cmp = [&]() -> Expr {
            if (!numeric_vars.empty() && rng.index(4) != 0) {
                const BinaryOp ops[] = {BinaryOp::gt, BinaryOp::lt, BinaryOp::ge, BinaryOp::le, BinaryOp::eq, BinaryOp::ne};
                Expr lhs{Var{numeric_vars[rng.index(numeric_vars.size())]}};
                if (rng.index(4) == 0) lhs = Expr{BinaryExpr{BinaryOp::mul, lhs, Expr{kg::Term::integer(2)}}};
                const std::int64_t k = numeric_vars[0] == "y" ? 1901 + 15 * static_cast<std::int64_t>(rng.index(2))
                                                               : 100 * static_cast<std::int64_t>(rng.index(30));
                return Expr{BinaryExpr{ops[rng.index(6)], lhs, Expr{kg::Term::integer(k)}}};
            }
            if (all_vars.size() > 1 && rng.index(5) == 0) {
                // deliberate type mismatch for some bindings
                return Expr{BinaryExpr{BinaryOp::gt, Expr{Var{all_vars[1]}}, Expr{kg::Term::integer(5)}}};
            }
            return Expr{BinaryExpr{BinaryOp::ne, Expr{Var{"f"}}, Expr{kg::Term::iri(kg::feature_iri("q", 1901, "f", 0))}}};
        };
        Expr e = cmp();
        if (rng.index(3) == 0) e = Expr{BinaryExpr{rng.coin() ? BinaryOp::logical_and : BinaryOp::logical_or, e, cmp()}};
        if (rng.index(5) == 0) e = Expr{UnaryExpr{UnaryOp::logical_not, e}};
        els.emplace_back(Filter{e});
    }
    if (q.form == Form::ask) return q;

    if (rng.index(3) == 0) {
        // aggregate query, optionally grouped
        const std::string group = rng.coin() ? all_vars[rng.index(all_vars.size())] : std::string();
        if (!group.empty()) {
            q.group_by.push_back(group);
            q.projection.emplace_back(Var{group});
        }
        const AggFn fns[] = {AggFn::count, AggFn::sum, AggFn::avg, AggFn::min, AggFn::max};
        const AggFn fn = fns[rng.index(5)];
        Aggregate a{fn, rng.index(4) == 0, std::nullopt, "agg"};
        if (fn != AggFn::count || rng.coin()) {
            a.var = numeric_vars.empty() || rng.index(4) == 0 ? all_vars[rng.index(all_vars.size())]
                                                              : numeric_vars[rng.index(numeric_vars.size())];
        }
        q.projection.emplace_back(a);
        if (rng.coin()) q.order_by.push_back({"agg", rng.coin()});
    } else if (rng.index(4) == 0) {
        q.star = true;
    } else {
        for (const auto& v : all_vars) {
            if (rng.coin() || q.projection.empty()) q.projection.emplace_back(Var{v});
        }
        if (rng.coin()) q.order_by.push_back({all_vars[rng.index(all_vars.size())], rng.coin()});
    }
    q.distinct = rng.index(3) == 0;
    if (rng.index(3) == 0) q.limit = rng.index(6);
    if (rng.index(6) == 0) q.offset = rng.index(3);
    return q;
}

}  // namespace chronomap::testing
