#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "chronomap/kgstore/term.hpp"

namespace chronomap::query {

/// Owning pointer with value semantics, for recursive AST nodes.
template <typename T>
class Box {
public:
    Box(T value) : p_(std::make_unique<T>(std::move(value))) {}  // NOLINT(google-explicit-constructor)
    Box(const Box& o) : p_(std::make_unique<T>(*o.p_)) {}
    Box(Box&&) noexcept = default;
    Box& operator=(const Box& o) {
        if (this != &o) p_ = std::make_unique<T>(*o.p_);
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;
    ~Box() = default;

    T& operator*() { return *p_; }
    const T& operator*() const { return *p_; }
    T* operator->() { return p_.get(); }
    const T* operator->() const { return p_.get(); }

    friend bool operator==(const Box& a, const Box& b) { return *a.p_ == *b.p_; }

private:
    std::unique_ptr<T> p_;
};

struct Var {
    std::string name;  // without the leading '?'

    friend bool operator==(const Var&, const Var&) = default;
};

/// A triple-pattern position: variable or constant term.
using TermPat = std::variant<Var, kg::Term>;

struct TriplePattern {
    TermPat subject;
    TermPat predicate;
    TermPat object;

    friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

enum class UnaryOp : std::uint8_t { logical_not, negate };
enum class BinaryOp : std::uint8_t { logical_or, logical_and, eq, ne, lt, le, gt, ge, add, sub, mul, div };

struct Expr;

struct UnaryExpr {
    UnaryOp op;
    Box<Expr> operand;

    friend bool operator==(const UnaryExpr&, const UnaryExpr&) = default;
};

struct BinaryExpr {
    BinaryOp op;
    Box<Expr> lhs;
    Box<Expr> rhs;

    friend bool operator==(const BinaryExpr&, const BinaryExpr&) = default;
};

struct Expr {
    std::variant<Var, kg::Term, UnaryExpr, BinaryExpr> node;

    friend bool operator==(const Expr&, const Expr&) = default;
};

struct GroupPattern;

struct Filter {
    Expr expr;

    friend bool operator==(const Filter&, const Filter&) = default;
};

struct OptionalPattern {
    Box<GroupPattern> group;

    friend bool operator==(const OptionalPattern&, const OptionalPattern&) = default;
};

using PatternElement = std::variant<TriplePattern, Filter, OptionalPattern>;

struct GroupPattern {
    std::vector<PatternElement> elements;

    friend bool operator==(const GroupPattern&, const GroupPattern&) = default;
};

enum class AggFn : std::uint8_t { count, sum, avg, min, max };

struct Aggregate {
    AggFn fn;
    bool distinct{false};
    std::optional<std::string> var;  // nullopt means '*'
    std::string alias;

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

using Projection = std::variant<Var, Aggregate>;

struct OrderKey {
    std::string var;
    bool descending{false};

    friend bool operator==(const OrderKey&, const OrderKey&) = default;
};

enum class Form : std::uint8_t { select, ask };

struct Query {
    Form form{Form::select};
    bool distinct{false};
    bool star{false};
    std::vector<Projection> projection;
    GroupPattern where;
    std::vector<std::string> group_by;
    std::vector<OrderKey> order_by;
    std::optional<std::size_t> limit;
    std::optional<std::size_t> offset;

    [[nodiscard]] bool has_aggregates() const;
    /// Variables of all triple patterns, in order of first appearance.
    [[nodiscard]] std::vector<std::string> pattern_variables() const;
    /// Output column names.
    [[nodiscard]] std::vector<std::string> output_variables() const;

    friend bool operator==(const Query&, const Query&) = default;
};

std::string_view to_string(AggFn fn) noexcept;
std::string_view to_string(BinaryOp op) noexcept;

}  // namespace chronomap::query
