#include "topopt/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>

#include <fmt/format.h>

namespace topopt {

struct Expr::Node {
    enum class Kind { number, variable, negate, add, sub, mul, div, pow, call };
    enum class Var { x1, x2, y, yd };
    enum class Func { sin, cos, exp, sqrt, abs, min, max };

    Kind kind = Kind::number;
    double value = 0.0;
    Var var = Var::x1;
    Func func = Func::sin;
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Node = Expr::Node;

NodePtr make(Node::Kind kind, std::vector<NodePtr> args) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    Parser(std::string_view text, VarSet vars) : text_(text), vars_(vars) {}

    NodePtr parse_all() {
        skip();
        if (pos_ >= text_.size()) fail("empty expression");
        NodePtr e = expr();
        skip();
        if (pos_ < text_.size()) fail(fmt::format("unexpected '{}'", text_[pos_]));
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ExprSyntaxError(what, pos_ + 1); }

    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= text_.size()) fail(fmt::format("expected '{}' before end of input", c));
            fail(fmt::format("expected '{}'", c));
        }
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Node::Kind::add, {lhs, term()});
            else if (accept('-')) lhs = make(Node::Kind::sub, {lhs, term()});
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Node::Kind::mul, {lhs, unary()});
            else if (accept('/')) lhs = make(Node::Kind::div, {lhs, unary()});
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Node::Kind::negate, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Node::Kind::pow, {base, unary()});
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail(fmt::format("unexpected '{}'", c));
    }

    NodePtr number() {
        const std::string tail(text_.substr(pos_));
        char* end = nullptr;
        const double v = std::strtod(tail.c_str(), &end);
        if (end == tail.c_str()) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - tail.c_str());
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::number;
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name(text_.substr(start, pos_ - start));

        static const std::pair<const char*, Node::Func> funcs[] = {
            {"sin", Node::Func::sin},   {"cos", Node::Func::cos}, {"exp", Node::Func::exp},
            {"sqrt", Node::Func::sqrt}, {"abs", Node::Func::abs}, {"min", Node::Func::min},
            {"max", Node::Func::max}};
        for (const auto& [fname, f] : funcs) {
            if (name != fname) continue;
            expect('(');
            std::vector<NodePtr> args{expr()};
            while (accept(',')) args.push_back(expr());
            expect(')');
            const std::size_t want = (f == Node::Func::min || f == Node::Func::max) ? 2 : 1;
            if (args.size() != want) {
                pos_ = start;
                fail(fmt::format("{} takes {} argument(s), got {}", name, want, args.size()));
            }
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::call;
            n->func = f;
            n->args = std::move(args);
            return n;
        }

        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::variable;
        if (name == "x1") n->var = Node::Var::x1;
        else if (name == "x2") n->var = Node::Var::x2;
        else if (vars_ == VarSet::state && name == "y") n->var = Node::Var::y;
        else if (vars_ == VarSet::state && name == "yd") n->var = Node::Var::yd;
        else if (name == "pi") {
            n->kind = Node::Kind::number;
            n->value = 3.14159265358979323846;
        } else {
            pos_ = start;
            fail(fmt::format("unknown identifier '{}'", name));
        }
        return n;
    }

    std::string_view text_;
    VarSet vars_;
    std::size_t pos_ = 0;
};

[[noreturn]] void domain_fail(const char* what, double arg, const ExprVars& v) {
    throw ExprDomainError(fmt::format("{} of {} at point ({}, {})", what, arg, v.x1, v.x2));
}

double int_pow(double b, long k) {
    if (k < 0) return 1.0 / int_pow(b, -k);
    double r = 1.0;
    for (long i = 0; i < k; ++i) r *= b;
    return r;
}

double eval(const Node& n, const ExprVars& v) {
    using K = Node::Kind;
    switch (n.kind) {
        case K::number: return n.value;
        case K::variable:
            switch (n.var) {
                case Node::Var::x1: return v.x1;
                case Node::Var::x2: return v.x2;
                case Node::Var::y: return v.y;
                case Node::Var::yd: return v.yd;
            }
            break;
        case K::negate: return -eval(*n.args[0], v);
        case K::add: return eval(*n.args[0], v) + eval(*n.args[1], v);
        case K::sub: return eval(*n.args[0], v) - eval(*n.args[1], v);
        case K::mul: return eval(*n.args[0], v) * eval(*n.args[1], v);
        case K::div: {
            const double d = eval(*n.args[1], v);
            if (d == 0.0) domain_fail("division by zero", d, v);
            return eval(*n.args[0], v) / d;
        }
        case K::pow: {
            const double b = eval(*n.args[0], v);
            const double e = eval(*n.args[1], v);
            if (e == std::round(e) && std::abs(e) <= 16.0) return int_pow(b, static_cast<long>(e));
            if (b < 0.0) domain_fail("non-integer power of negative base", b, v);
            if (b == 0.0) return e > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
            return std::exp(e * std::log(b));
        }
        case K::call: {
            const double a = eval(*n.args[0], v);
            switch (n.func) {
                case Node::Func::sin: return std::sin(a);
                case Node::Func::cos: return std::cos(a);
                case Node::Func::exp: return std::exp(a);
                case Node::Func::sqrt:
                    if (a < 0.0) domain_fail("sqrt", a, v);
                    return std::sqrt(a);
                case Node::Func::abs: return std::abs(a);
                case Node::Func::min: return std::min(a, eval(*n.args[1], v));
                case Node::Func::max: return std::max(a, eval(*n.args[1], v));
            }
            break;
        }
    }
    return 0.0;
}

void render(const Node& n, std::string& out) {
    using K = Node::Kind;
    auto bin = [&](const char* op) {
        out += '(';
        render(*n.args[0], out);
        out += op;
        render(*n.args[1], out);
        out += ')';
    };
    switch (n.kind) {
        case K::number: out += fmt::format("{}", n.value); break;
        case K::variable: {
            static const char* names[] = {"x1", "x2", "y", "yd"};
            out += names[static_cast<int>(n.var)];
            break;
        }
        case K::negate:
            out += "(-";
            render(*n.args[0], out);
            out += ')';
            break;
        case K::add: bin(" + "); break;
        case K::sub: bin(" - "); break;
        case K::mul: bin(" * "); break;
        case K::div: bin(" / "); break;
        case K::pow: bin("^"); break;
        case K::call: {
            static const char* names[] = {"sin", "cos", "exp", "sqrt", "abs", "min", "max"};
            out += names[static_cast<int>(n.func)];
            out += '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                render(*n.args[i], out);
            }
            out += ')';
            break;
        }
    }
}

bool mentions_state(const Node& n) {
    if (n.kind == Node::Kind::variable) return n.var == Node::Var::y || n.var == Node::Var::yd;
    for (const auto& a : n.args)
        if (mentions_state(*a)) return true;
    return false;
}

}  // namespace

ExprSyntaxError::ExprSyntaxError(const std::string& message, std::size_t off)
    : std::runtime_error(fmt::format("syntax error at offset {}: {}", off, message)), offset(off) {}

Expr Expr::parse(std::string_view text, VarSet vars) {
    Expr e;
    e.root_ = Parser(text, vars).parse_all();
    e.source_ = std::string(text);
    return e;
}

double Expr::operator()(const ExprVars& v) const {
    if (!root_) throw ExprDomainError("evaluating an empty expression");
    return eval(*root_, v);
}

std::string Expr::to_string() const {
    std::string out;
    if (root_) render(*root_, out);
    return out;
}

bool Expr::uses_state() const { return root_ && mentions_state(*root_); }

}  // namespace topopt
