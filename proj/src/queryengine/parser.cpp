#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>

#include "chronomap/kgstore/vocab.hpp"
#include "chronomap/query/query.hpp"

namespace chronomap::query {

namespace {

bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-'; }
bool var_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {
        prefixes_["cmf"] = kg::kFeatureNs;
        prefixes_["cmo"] = kg::kOntologyNs;
        prefixes_["cmr"] = kg::kRelationNs;
        prefixes_["xsd"] = kg::kXsdNs;
        prefixes_["rdf"] = kg::kRdfNs;
    }

    Query query() {
        Query q;
        while (keyword_ahead("PREFIX")) prefix_decl();
        if (accept_keyword("SELECT")) {
            q.form = Form::select;
            select_clause(q);
        } else if (accept_keyword("ASK")) {
            q.form = Form::ask;
            q.where = group();
        } else {
            fail({"'SELECT'", "'ASK'", "'PREFIX'"});
        }
        skip_ws();
        if (pos_ < s_.size()) fail({"end of query"});
        check_semantics(q);
        return q;
    }

private:
    // --- lexical helpers -------------------------------------------------

    void skip_ws() {
        while (pos_ < s_.size()) {
            const char c = s_[pos_];
            if (c == '#') {
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    bool accept(std::string_view tok) {
        skip_ws();
        if (s_.substr(pos_, tok.size()) != tok) return false;
        pos_ += tok.size();
        return true;
    }

    void expect(std::string_view tok) {
        if (!accept(tok)) fail({"'" + std::string(tok) + "'"});
    }

    std::string_view word_at(std::size_t at) const {
        std::size_t end = at;
        while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
        return s_.substr(at, end - at);
    }

    bool keyword_ahead(std::string_view kw) {
        skip_ws();
        const auto w = word_at(pos_);
        if (upper(w) != kw) return false;
        // a prefixed name such as "limit:x" is not a keyword
        return pos_ + w.size() >= s_.size() || s_[pos_ + w.size()] != ':';
    }

    bool accept_keyword(std::string_view kw) {
        if (!keyword_ahead(kw)) return false;
        pos_ += kw.size();
        return true;
    }

    void expect_keyword(std::string_view kw) {
        if (!accept_keyword(kw)) fail({"'" + std::string(kw) + "'"});
    }

    [[noreturn]] void fail(std::vector<std::string> expected, const std::string& message = {}) {
        fail_at(pos_, std::move(expected), message);
    }

    [[noreturn]] void fail_at(std::size_t at, std::vector<std::string> expected, const std::string& message = {},
                              QueryError::Code code = QueryError::Code::syntax) const {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i < at && i < s_.size(); ++i) {
            if (s_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string msg = message;
        if (msg.empty()) {
            msg = "unexpected ";
            msg += at < s_.size() ? "'" + std::string(word_or_char(at)) + "'" : "end of input";
        }
        throw QueryError(code, msg, line, col, std::move(expected));
    }

    std::string_view word_or_char(std::size_t at) const {
        const auto w = word_at(at);
        return w.empty() ? s_.substr(at, 1) : w;
    }

    // --- terms -----------------------------------------------------------

    void prefix_decl() {
        expect_keyword("PREFIX");
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && name_char(s_[pos_])) ++pos_;
        const std::string name(s_.substr(start, pos_ - start));
        if (pos_ >= s_.size() || s_[pos_] != ':') fail({"':'"});
        ++pos_;
        skip_ws();
        prefixes_[name] = iri_ref();
    }

    std::string iri_ref() {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '<') fail({"IRI"});
        const std::size_t start = pos_;
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '>') {
            const char c = s_[pos_];
            if (std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '"' || c == '{' || c == '}') {
                fail_at(start, {"IRI"}, "malformed IRI");
            }
            out += c;
            ++pos_;
        }
        if (pos_ >= s_.size()) fail_at(start, {"'>'"}, "unterminated IRI");
        ++pos_;
        if (out.find(':') == std::string::npos) fail_at(start, {"absolute IRI"}, "IRI is not absolute");
        return out;
    }

    bool prefixed_name_ahead() {
        skip_ws();
        std::size_t i = pos_;
        while (i < s_.size() && name_char(s_[i])) ++i;
        return i < s_.size() && s_[i] == ':' && (i == pos_ || name_start(s_[pos_]));
    }

    std::string prefixed_name() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < s_.size() && name_char(s_[pos_])) ++pos_;
        const std::string prefix(s_.substr(start, pos_ - start));
        ++pos_;  // ':'
        const std::size_t local_start = pos_;
        while (pos_ < s_.size() && (name_char(s_[pos_]) || s_[pos_] == '.')) ++pos_;
        while (pos_ > local_start && s_[pos_ - 1] == '.') --pos_;
        const auto it = prefixes_.find(prefix);
        if (it == prefixes_.end()) {
            fail_at(start, {}, "unknown prefix '" + prefix + ":'", QueryError::Code::unknown_prefix);
        }
        return it->second + std::string(s_.substr(local_start, pos_ - local_start));
    }

    std::string variable() {
        skip_ws();
        if (pos_ >= s_.size() || (s_[pos_] != '?' && s_[pos_] != '$')) fail({"variable"});
        ++pos_;
        const std::size_t start = pos_;
        while (pos_ < s_.size() && var_char(s_[pos_])) ++pos_;
        if (pos_ == start) fail({"variable name"});
        return std::string(s_.substr(start, pos_ - start));
    }

    bool var_ahead() {
        const char c = peek();
        return c == '?' || c == '$';
    }

    std::string string_literal() {
        skip_ws();
        const char quote = s_[pos_];
        const std::size_t start = pos_++;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != quote) {
            char c = s_[pos_++];
            if (c == '\n') fail_at(start, {"closing quote"}, "unterminated string");
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                switch (s_[pos_++]) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case 'r': c = '\r'; break;
                    case '"': c = '"'; break;
                    case '\'': c = '\''; break;
                    case '\\': c = '\\'; break;
                    default: fail_at(pos_ - 2, {}, "unknown escape sequence");
                }
            }
            out += c;
        }
        if (pos_ >= s_.size()) fail_at(start, {"closing quote"}, "unterminated string");
        ++pos_;
        return out;
    }

    kg::Term literal_with_suffix(std::string lexical) {
        if (accept("^^")) {
            const std::size_t at = pos_;
            const std::string dt = peek() == '<' ? iri_ref() : prefixed_name();
            try {
                return kg::Term::literal(lexical, dt);
            } catch (const kg::TermError& e) {
                fail_at(at, {}, e.what());
            }
        }
        if (pos_ < s_.size() && s_[pos_] == '@') {
            ++pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
        }
        return kg::Term::string(std::move(lexical));
    }

    bool number_ahead() {
        const char c = peek();
        return std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])));
    }

    kg::Term number(bool negative) {
        skip_ws();
        const std::size_t start = pos_;
        bool is_decimal = false;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ + 1 < s_.size() && s_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]))) {
            is_decimal = true;
            ++pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t e = pos_ + 1;
            if (e < s_.size() && (s_[e] == '+' || s_[e] == '-')) ++e;
            if (e < s_.size() && std::isdigit(static_cast<unsigned char>(s_[e]))) {
                is_decimal = true;
                pos_ = e;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            }
        }
        std::string text = (negative ? "-" : "") + std::string(s_.substr(start, pos_ - start));
        try {
            return kg::Term::literal(text, kg::xsd(is_decimal ? "decimal" : "integer"));
        } catch (const kg::TermError& e) {
            fail_at(start, {}, e.what());
        }
    }

    std::optional<kg::Term> boolean_ahead() {
        if (accept_keyword("TRUE")) return kg::Term::boolean(true);
        if (accept_keyword("FALSE")) return kg::Term::boolean(false);
        return std::nullopt;
    }

    TermPat term_pat() {
        const char c = peek();
        if (c == '?' || c == '$') return Var{variable()};
        if (c == '<') return kg::Term::iri(iri_ref());
        if (c == '"' || c == '\'') return literal_with_suffix(string_literal());
        if (c == '-' || c == '+') {
            ++pos_;
            if (!number_ahead()) fail({"number"});
            return number(c == '-');
        }
        if (number_ahead()) return number(false);
        if (auto b = boolean_ahead()) return *b;
        if (prefixed_name_ahead()) return kg::Term::iri(prefixed_name());
        fail({"variable", "IRI", "prefixed name", "literal"});
    }

    // --- patterns --------------------------------------------------------

    GroupPattern group() {
        expect("{");
        GroupPattern g;
        while (true) {
            if (accept("}")) return g;
            if (accept_keyword("FILTER")) {
                expect("(");
                g.elements.emplace_back(Filter{expression()});
                expect(")");
            } else if (accept_keyword("OPTIONAL")) {
                g.elements.emplace_back(OptionalPattern{group()});
            } else if (peek() == '\0') {
                fail({"'}'"});
            } else {
                triples_block(g);
            }
        }
    }

    // Subject followed by predicate-object lists; ';' and ',' abbreviations
    // are accepted.
    void triples_block(GroupPattern& g) {
        const TermPat subject = term_pat();
        while (true) {
            const TermPat predicate = term_pat();
            while (true) {
                g.elements.emplace_back(TriplePattern{subject, predicate, term_pat()});
                if (!accept(",")) break;
            }
            if (!accept(";")) break;
            if (peek() == '.' || peek() == '}') break;
        }
        accept(".");
    }

    // --- expressions -----------------------------------------------------

    Expr expression() {
        Expr lhs = and_expr();
        while (accept("||")) lhs = Expr{BinaryExpr{BinaryOp::logical_or, lhs, and_expr()}};
        return lhs;
    }

    Expr and_expr() {
        Expr lhs = not_expr();
        while (accept("&&")) lhs = Expr{BinaryExpr{BinaryOp::logical_and, lhs, not_expr()}};
        return lhs;
    }

    Expr not_expr() {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '!' && (pos_ + 1 >= s_.size() || s_[pos_ + 1] != '=')) {
            ++pos_;
            return Expr{UnaryExpr{UnaryOp::logical_not, not_expr()}};
        }
        return comparison();
    }

    Expr comparison() {
        Expr lhs = additive();
        static const std::pair<std::string_view, BinaryOp> ops[] = {
            {"!=", BinaryOp::ne}, {"<=", BinaryOp::le}, {">=", BinaryOp::ge},
            {"=", BinaryOp::eq},  {"<", BinaryOp::lt},  {">", BinaryOp::gt}};
        for (const auto& [tok, op] : ops) {
            if (accept(tok)) return Expr{BinaryExpr{op, lhs, additive()}};
        }
        return lhs;
    }

    Expr additive() {
        Expr lhs = multiplicative();
        while (true) {
            if (accept("+")) {
                lhs = Expr{BinaryExpr{BinaryOp::add, lhs, multiplicative()}};
            } else if (peek() == '-') {
                ++pos_;
                lhs = Expr{BinaryExpr{BinaryOp::sub, lhs, multiplicative()}};
            } else {
                return lhs;
            }
        }
    }

    Expr multiplicative() {
        Expr lhs = primary();
        while (true) {
            if (accept("*")) {
                lhs = Expr{BinaryExpr{BinaryOp::mul, lhs, primary()}};
            } else if (accept("/")) {
                lhs = Expr{BinaryExpr{BinaryOp::div, lhs, primary()}};
            } else {
                return lhs;
            }
        }
    }

    Expr primary() {
        const char c = peek();
        if (c == '(') {
            ++pos_;
            Expr e = expression();
            expect(")");
            return e;
        }
        if (c == '-') {
            ++pos_;
            if (number_ahead()) return Expr{number(true)};
            return Expr{UnaryExpr{UnaryOp::negate, primary()}};
        }
        if (c == '+') {
            ++pos_;
            return primary();
        }
        if (c == '?' || c == '$') return Expr{Var{variable()}};
        if (c == '<') return Expr{kg::Term::iri(iri_ref())};
        if (c == '"' || c == '\'') return Expr{literal_with_suffix(string_literal())};
        if (number_ahead()) return Expr{number(false)};
        if (auto b = boolean_ahead()) return Expr{*b};
        if (prefixed_name_ahead()) return Expr{kg::Term::iri(prefixed_name())};
        fail({"variable", "number", "string", "boolean", "'('"});
    }

    // --- select ----------------------------------------------------------

    std::optional<AggFn> aggregate_name() {
        static const std::pair<std::string_view, AggFn> names[] = {
            {"COUNT", AggFn::count}, {"SUM", AggFn::sum}, {"AVG", AggFn::avg}, {"MIN", AggFn::min}, {"MAX", AggFn::max}};
        for (const auto& [kw, fn] : names) {
            if (accept_keyword(kw)) return fn;
        }
        return std::nullopt;
    }

    Aggregate aggregate() {
        expect("(");
        const auto fn = aggregate_name();
        if (!fn) fail({"'COUNT'", "'SUM'", "'AVG'", "'MIN'", "'MAX'"});
        Aggregate a{*fn, false, std::nullopt, {}};
        expect("(");
        a.distinct = accept_keyword("DISTINCT");
        if (!accept("*")) a.var = variable();
        if (!a.var && a.fn != AggFn::count) fail({"variable"}, "only COUNT accepts '*'");
        expect(")");
        expect_keyword("AS");
        a.alias = variable();
        expect(")");
        return a;
    }

    void select_clause(Query& q) {
        q.distinct = accept_keyword("DISTINCT");
        if (accept("*")) {
            q.star = true;
        } else {
            while (true) {
                if (var_ahead()) {
                    q.projection.emplace_back(Var{variable()});
                } else if (peek() == '(') {
                    q.projection.emplace_back(aggregate());
                } else {
                    break;
                }
            }
            if (q.projection.empty()) fail({"variable", "aggregate", "'*'"});
        }
        accept_keyword("WHERE");
        if (peek() != '{') fail({"'WHERE'", "'{'"});
        q.where = group();
        solution_modifiers(q);
    }

    std::size_t integer() {
        skip_ws();
        const std::size_t start = pos_;
        std::size_t v = 0;
        const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
        if (ec != std::errc{} || end == s_.data() + start) fail({"integer"});
        pos_ = static_cast<std::size_t>(end - s_.data());
        return v;
    }

    void solution_modifiers(Query& q) {
        while (true) {
            if (accept_keyword("GROUP")) {
                expect_keyword("BY");
                if (!var_ahead()) fail({"variable"});
                while (var_ahead()) q.group_by.push_back(variable());
            } else if (accept_keyword("ORDER")) {
                expect_keyword("BY");
                bool any = false;
                while (true) {
                    const bool asc = accept_keyword("ASC");
                    const bool desc = !asc && accept_keyword("DESC");
                    if (asc || desc) {
                        expect("(");
                        q.order_by.push_back({variable(), desc});
                        expect(")");
                    } else if (var_ahead()) {
                        q.order_by.push_back({variable(), false});
                    } else {
                        break;
                    }
                    any = true;
                }
                if (!any) fail({"'ASC'", "'DESC'", "variable"});
            } else if (accept_keyword("LIMIT")) {
                q.limit = integer();
            } else if (accept_keyword("OFFSET")) {
                q.offset = integer();
            } else {
                return;
            }
        }
    }

    // --- semantic checks -------------------------------------------------

    void check_semantics(const Query& q) const {
        const auto vars = q.pattern_variables();
        const std::set<std::string> known(vars.begin(), vars.end());
        auto semantic = [&](const std::string& msg) { fail_at(s_.size(), {}, msg, QueryError::Code::semantic); };
        std::set<std::string> aliases;
        bool aggregates = false;
        for (const auto& p : q.projection) {
            if (const auto* v = std::get_if<Var>(&p)) {
                if (!known.count(v->name)) semantic("projected variable ?" + v->name + " does not occur in the pattern");
            } else {
                const auto& a = std::get<Aggregate>(p);
                aggregates = true;
                if (a.var && !known.count(*a.var)) semantic("aggregated variable ?" + *a.var + " does not occur in the pattern");
                if (known.count(a.alias) || !aliases.insert(a.alias).second) semantic("alias ?" + a.alias + " is already bound");
            }
        }
        for (const auto& g : q.group_by) {
            if (!known.count(g)) semantic("GROUP BY variable ?" + g + " does not occur in the pattern");
        }
        if (aggregates || !q.group_by.empty()) {
            if (q.star) semantic("SELECT * cannot be combined with grouping");
            for (const auto& p : q.projection) {
                if (const auto* v = std::get_if<Var>(&p)) {
                    if (std::find(q.group_by.begin(), q.group_by.end(), v->name) == q.group_by.end()) {
                        semantic("?" + v->name + " must appear in GROUP BY when aggregating");
                    }
                }
            }
        }
        for (const auto& k : q.order_by) {
            if (!known.count(k.var) && !aliases.count(k.var)) semantic("ORDER BY variable ?" + k.var + " is unknown");
            if ((aggregates || !q.group_by.empty()) && !aliases.count(k.var) &&
                std::find(q.group_by.begin(), q.group_by.end(), k.var) == q.group_by.end()) {
                semantic("ORDER BY ?" + k.var + " must be grouped or an aggregate alias");
            }
        }
    }

    std::string_view s_;
    std::size_t pos_{0};
    std::map<std::string, std::string> prefixes_;
};

void collect_vars(const GroupPattern& g, std::vector<std::string>& out) {
    auto add = [&](const TermPat& t) {
        if (const auto* v = std::get_if<Var>(&t)) {
            if (std::find(out.begin(), out.end(), v->name) == out.end()) out.push_back(v->name);
        }
    };
    for (const auto& e : g.elements) {
        if (const auto* t = std::get_if<TriplePattern>(&e)) {
            add(t->subject);
            add(t->predicate);
            add(t->object);
        } else if (const auto* o = std::get_if<OptionalPattern>(&e)) {
            collect_vars(*o->group, out);
        }
    }
}

}  // namespace

QueryError::QueryError(Code code, std::string message, std::size_t line, std::size_t column,
                       std::vector<std::string> expected)
    : std::runtime_error([&] {
          std::string what = message;
          if (line) what += " at line " + std::to_string(line) + ", column " + std::to_string(column);
          if (!expected.empty()) {
              what += "; expected ";
              for (std::size_t i = 0; i < expected.size(); ++i) what += (i ? ", " : "") + expected[i];
          }
          return what;
      }()),
      code_(code),
      message_(std::move(message)),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

bool Query::has_aggregates() const {
    return std::any_of(projection.begin(), projection.end(),
                       [](const Projection& p) { return std::holds_alternative<Aggregate>(p); });
}

std::vector<std::string> Query::pattern_variables() const {
    std::vector<std::string> out;
    collect_vars(where, out);
    return out;
}

std::vector<std::string> Query::output_variables() const {
    if (star) return pattern_variables();
    std::vector<std::string> out;
    for (const auto& p : projection) {
        if (const auto* v = std::get_if<Var>(&p)) {
            out.push_back(v->name);
        } else {
            out.push_back(std::get<Aggregate>(p).alias);
        }
    }
    return out;
}

std::string_view to_string(AggFn fn) noexcept {
    switch (fn) {
        case AggFn::count: return "COUNT";
        case AggFn::sum: return "SUM";
        case AggFn::avg: return "AVG";
        case AggFn::min: return "MIN";
        case AggFn::max: return "MAX";
    }
    return "?";
}

std::string_view to_string(BinaryOp op) noexcept {
    switch (op) {
        case BinaryOp::logical_or: return "||";
        case BinaryOp::logical_and: return "&&";
        case BinaryOp::eq: return "=";
        case BinaryOp::ne: return "!=";
        case BinaryOp::lt: return "<";
        case BinaryOp::le: return "<=";
        case BinaryOp::gt: return ">";
        case BinaryOp::ge: return ">=";
        case BinaryOp::add: return "+";
        case BinaryOp::sub: return "-";
        case BinaryOp::mul: return "*";
        case BinaryOp::div: return "/";
    }
    return "?";
}

Query parse(std::string_view text) { return Parser(text).query(); }

}  // namespace chronomap::query
