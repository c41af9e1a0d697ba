#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace topopt {

class ExprSyntaxError : public std::runtime_error {
public:
    ExprSyntaxError(const std::string& message, std::size_t offset);
    std::size_t offset;  ///< 1-based byte offset into the source text
};

class ExprDomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Values bound to the expression variables. `y` and `yd` are only visible to
/// expressions parsed with the matching variable set (cost integrands).
struct ExprVars {
    double x1 = 0.0, x2 = 0.0;
    double y = 0.0, yd = 0.0;
};

enum class VarSet { spatial, state };  // {x1, x2} or {x1, x2, y, yd}

/// Immutable parsed arithmetic expression.
///
/// Grammar (precedence low to high):
///   expr  := term (('+'|'-') term)*
///   term  := unary (('*'|'/') unary)*
///   unary := ('-'|'+') unary | power
///   power := primary ('^' unary)?          right-associative
///   primary := number | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
/// so that -x1^2 means -(x1^2).
class Expr {
public:
    struct Node;

    Expr() = default;
    static Expr parse(std::string_view text, VarSet vars = VarSet::spatial);

    double operator()(const ExprVars& v) const;
    double operator()(double x1, double x2) const { return (*this)(ExprVars{x1, x2, 0.0, 0.0}); }

    /// Fully parenthesized rendering; parsing it yields an equivalent tree.
    std::string to_string() const;
    const std::string& source() const { return source_; }
    bool uses_state() const;

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
};

}  // namespace topopt
