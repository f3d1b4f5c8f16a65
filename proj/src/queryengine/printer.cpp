#include "chronomap/geometry/io.hpp"
#include "chronomap/query/query.hpp"

namespace chronomap::query {

namespace {

std::string quote(std::string_view s) {
    std::string out = "\"";
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
    return out + "\"";
}

std::string term_text(const kg::Term& t) {
    switch (t.kind()) {
        case kg::TermKind::iri: return "<" + t.text() + ">";
        case kg::TermKind::string: return quote(t.text());
        case kg::TermKind::integer: return t.lexical();
        case kg::TermKind::decimal: {
            std::string s = geo::format_number(t.as_decimal());
            if (s.find('.') == std::string::npos) s += ".0";
            return s;
        }
        case kg::TermKind::boolean: return t.as_boolean() ? "true" : "false";
        case kg::TermKind::geometry: break;
    }
    return quote(t.lexical());
}

std::string pat_text(const TermPat& p) {
    if (const auto* v = std::get_if<Var>(&p)) return "?" + v->name;
    return term_text(std::get<kg::Term>(p));
}

std::string expr_text(const Expr& e) {
    return std::visit(
        [](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Var>) {
                return "?" + n.name;
            } else if constexpr (std::is_same_v<T, kg::Term>) {
                return term_text(n);
            } else if constexpr (std::is_same_v<T, UnaryExpr>) {
                return std::string(n.op == UnaryOp::logical_not ? "!" : "-") + "(" + expr_text(*n.operand) + ")";
            } else {
                return "(" + expr_text(*n.lhs) + " " + std::string(to_string(n.op)) + " " + expr_text(*n.rhs) + ")";
            }
        },
        e.node);
}

void group_text(const GroupPattern& g, int depth, std::string& out) {
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    out += "{\n";
    for (const auto& el : g.elements) {
        out += indent + "  ";
        if (const auto* t = std::get_if<TriplePattern>(&el)) {
            out += pat_text(t->subject) + " " + pat_text(t->predicate) + " " + pat_text(t->object) + " .\n";
        } else if (const auto* f = std::get_if<Filter>(&el)) {
            out += "FILTER (" + expr_text(f->expr) + ")\n";
        } else {
            out += "OPTIONAL ";
            group_text(*std::get<OptionalPattern>(el).group, depth + 1, out);
            out += "\n";
        }
    }
    out += indent + "}";
}

}  // namespace

std::string print(const Query& q) {
    std::string out;
    if (q.form == Form::ask) {
        out = "ASK ";
        group_text(q.where, 0, out);
        return out + "\n";
    }
    out = "SELECT ";
    if (q.distinct) out += "DISTINCT ";
    if (q.star) out += "* ";
    for (const auto& p : q.projection) {
        if (const auto* v = std::get_if<Var>(&p)) {
            out += "?" + v->name + " ";
        } else {
            const auto& a = std::get<Aggregate>(p);
            out += "(" + std::string(to_string(a.fn)) + "(" + (a.distinct ? "DISTINCT " : "") +
                   (a.var ? "?" + *a.var : "*") + ") AS ?" + a.alias + ") ";
        }
    }
    out += "WHERE ";
    group_text(q.where, 0, out);
    out += "\n";
    if (!q.group_by.empty()) {
        out += "GROUP BY";
        for (const auto& g : q.group_by) out += " ?" + g;
        out += "\n";
    }
    if (!q.order_by.empty()) {
        out += "ORDER BY";
        for (const auto& k : q.order_by) out += std::string(k.descending ? " DESC(?" : " ASC(?") + k.var + ")";
        out += "\n";
    }
    if (q.limit) out += "LIMIT " + std::to_string(*q.limit) + "\n";
    if (q.offset) out += "OFFSET " + std::to_string(*q.offset) + "\n";
    return out;
}

std::vector<SchemaViolation> validate_against_schema(const Query& q, const kg::Schema& schema) {
    std::vector<SchemaViolation> out;
    std::size_t index = 0;
    auto walk = [&](const GroupPattern& g, auto& self) -> void {
        for (const auto& el : g.elements) {
            if (const auto* t = std::get_if<TriplePattern>(&el)) {
                ++index;
                if (const auto* p = std::get_if<kg::Term>(&t->predicate)) {
                    if (!p->is_iri() || !schema.contains(p->text())) out.push_back({p->lexical(), index});
                }
            } else if (const auto* o = std::get_if<OptionalPattern>(&el)) {
                self(*o->group, self);
            }
        }
    };
    walk(q.where, walk);
    return out;
}

}  // namespace chronomap::query
