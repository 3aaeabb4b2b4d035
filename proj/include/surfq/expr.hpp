#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "surfq/errors.hpp"
#include "surfq/jet.hpp"

namespace surfq {

enum class Func { Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt, Atan2 };
enum class BinOp { Add, Sub, Mul, Div, Pow };

class Expr;

namespace ast {

struct Number {
    double value;
};
struct Pi {};
struct Variable {
    std::string name;
};
struct Parameter {
    std::string name;
};
struct Negate {
    std::shared_ptr<const Expr> operand;
};
struct Binary {
    BinOp op;
    std::shared_ptr<const Expr> lhs, rhs;
};
struct Call {
    Func func;
    std::vector<std::shared_ptr<const Expr>> args;
};

using Node = std::variant<Number, Pi, Variable, Parameter, Negate, Binary, Call>;

}  // namespace ast

/// Immutable expression tree. Copies share structure.
class Expr {
public:
    explicit Expr(ast::Node node) : node_(std::make_shared<const ast::Node>(std::move(node))) {}

    const ast::Node& node() const { return *node_; }

    static Expr number(double v) { return Expr(ast::Number{v}); }
    static Expr variable(std::string name) { return Expr(ast::Variable{std::move(name)}); }
    static Expr parameter(std::string name) { return Expr(ast::Parameter{std::move(name)}); }

private:
    std::shared_ptr<const ast::Node> node_;
};

inline const char* func_name(Func f)
{
    switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Sinh: return "sinh";
    case Func::Cosh: return "cosh";
    case Func::Tanh: return "tanh";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Atan2: return "atan2";
    }
    return "?";
}

inline int func_arity(Func f) { return f == Func::Atan2 ? 2 : 1; }

inline const std::map<std::string, Func, std::less<>>& function_table()
{
    static const std::map<std::string, Func, std::less<>> table = {
        {"sin", Func::Sin},   {"cos", Func::Cos},   {"tan", Func::Tan},   {"sinh", Func::Sinh},
        {"cosh", Func::Cosh}, {"tanh", Func::Tanh}, {"exp", Func::Exp},   {"log", Func::Log},
        {"sqrt", Func::Sqrt}, {"atan2", Func::Atan2},
    };
    return table;
}

/// Names an expression may refer to. Anything else is rejected while parsing.
struct SymbolTable {
    std::set<std::string, std::less<>> variables{"u1", "u2", "u3"};
    std::set<std::string, std::less<>> parameters;

    static SymbolTable surface(std::set<std::string, std::less<>> params = {})
    {
        return SymbolTable{{"u1", "u2", "u3"}, std::move(params)};
    }
    static SymbolTable cartesian(std::set<std::string, std::less<>> params = {})
    {
        return SymbolTable{{"x", "y", "z"}, std::move(params)};
    }
};

namespace detail {

// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | identifier | identifier '(' args ')' | '(' sum ')'
class Parser {
public:
    Parser(std::string_view src, const SymbolTable& symbols) : src_(src), symbols_(symbols) {}

    Expr parse()
    {
        Expr e = sum();
        skip_space();
        if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'");
        return e;
    }

private:
    static constexpr int kMaxDepth = 512;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

    void skip_space()
    {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    // Position of the operator just accepted; a missing right operand is reported here.
    void require_operand(std::size_t op_pos, char op)
    {
        skip_space();
        const bool ok = pos_ < src_.size() &&
                        (is_digit(src_[pos_]) || src_[pos_] == '.' || is_ident_start(src_[pos_]) || src_[pos_] == '(' ||
                         src_[pos_] == '-');
        if (!ok) throw ParseError(std::string("syntax error: operator '") + op + "' is missing its right operand", op_pos);
    }

    bool accept_op(char c, std::size_t& at)
    {
        skip_space();
        at = pos_;
        if (accept(c)) {
            require_operand(at, c);
            return true;
        }
        return false;
    }

    bool accept(char c)
    {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) {
            if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' but reached end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p_(p)
        {
            if (++p_.depth_ > kMaxDepth) p_.fail("expression nested too deeply");
        }
        ~DepthGuard() { --p_.depth_; }
        Parser& p_;
    };

    static std::shared_ptr<const Expr> share(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

    Expr sum()
    {
        DepthGuard guard(*this);
        Expr lhs = product();
        std::size_t at = 0;
        for (;;) {
            if (accept_op('+', at)) {
                lhs = Expr(ast::Binary{BinOp::Add, share(lhs), share(product())});
            } else if (accept_op('-', at)) {
                lhs = Expr(ast::Binary{BinOp::Sub, share(lhs), share(product())});
            } else {
                return lhs;
            }
        }
    }

    Expr product()
    {
        Expr lhs = unary();
        std::size_t at = 0;
        for (;;) {
            if (accept_op('*', at)) {
                lhs = Expr(ast::Binary{BinOp::Mul, share(lhs), share(unary())});
            } else if (accept_op('/', at)) {
                lhs = Expr(ast::Binary{BinOp::Div, share(lhs), share(unary())});
            } else {
                return lhs;
            }
        }
    }

    Expr unary()
    {
        DepthGuard guard(*this);
        std::size_t at = 0;
        if (accept_op('-', at)) return Expr(ast::Negate{share(unary())});
        return power();
    }

    Expr power()
    {
        Expr base = primary();
        std::size_t at = 0;
        if (accept_op('^', at)) return Expr(ast::Binary{BinOp::Pow, share(base), share(unary())});
        return base;
    }

    static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    Expr primary()
    {
        DepthGuard guard(*this);
        skip_space();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = sum();
            expect(')');
            return inner;
        }
        if (is_digit(c) || c == '.') return number();
        if (is_ident_start(c)) return identifier();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    Expr number()
    {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (is_digit(src_[pos_]) || src_[pos_] == '.')) ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && is_digit(src_[p])) {
                pos_ = p;
                while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
            }
        }
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (ec != std::errc() || ptr != src_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        skip_space();
        if (pos_ < src_.size() && is_ident_start(src_[pos_])) fail("implicit multiplication is not allowed");
        return Expr::number(v);
    }

    Expr identifier()
    {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        skip_space();
        const bool call = pos_ < src_.size() && src_[pos_] == '(';
        if (call) {
            const auto& table = function_table();
            const auto it = table.find(name);
            if (it == table.end()) throw UnknownIdentifierError(name, start);
            ++pos_;
            std::vector<std::shared_ptr<const Expr>> args;
            args.push_back(share(sum()));
            while (accept(',')) args.push_back(share(sum()));
            expect(')');
            if (static_cast<int>(args.size()) != func_arity(it->second)) {
                pos_ = start;
                fail("function '" + name + "' expects " + std::to_string(func_arity(it->second)) + " argument(s)");
            }
            return Expr(ast::Call{it->second, std::move(args)});
        }
        if (name == "pi") return Expr(ast::Pi{});
        if (symbols_.variables.count(name)) return Expr::variable(name);
        if (symbols_.parameters.count(name)) return Expr::parameter(name);
        throw UnknownIdentifierError(name, start);
    }

    std::string_view src_;
    const SymbolTable& symbols_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

}  // namespace detail

/// Parses `source` using standard precedence (^ > unary minus > * / > + -, ^ right-associative).
inline Expr parse_expression(std::string_view source, const SymbolTable& symbols = SymbolTable{})
{
    return detail::Parser(source, symbols).parse();
}

/// Fully parenthesized text that parses back to a structurally identical tree.
inline std::string to_string(const Expr& e)
{
    struct Printer {
        std::string operator()(const ast::Number& n) const
        {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            return buf;
        }
        std::string operator()(const ast::Pi&) const { return "pi"; }
        std::string operator()(const ast::Variable& v) const { return v.name; }
        std::string operator()(const ast::Parameter& p) const { return p.name; }
        std::string operator()(const ast::Negate& n) const { return "(-" + to_string(*n.operand) + ")"; }
        std::string operator()(const ast::Binary& b) const
        {
            static constexpr const char* ops[] = {" + ", " - ", " * ", " / ", "^"};
            return "(" + to_string(*b.lhs) + ops[static_cast<int>(b.op)] + to_string(*b.rhs) + ")";
        }
        std::string operator()(const ast::Call& c) const
        {
            std::string s = std::string(func_name(c.func)) + "(";
            for (std::size_t k = 0; k < c.args.size(); ++k) {
                if (k) s += ", ";
                s += to_string(*c.args[k]);
            }
            return s + ")";
        }
    };
    return std::visit(Printer{}, e.node());
}

inline bool structurally_equal(const Expr& a, const Expr& b)
{
    if (a.node().index() != b.node().index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.node());
            if constexpr (std::is_same_v<T, ast::Number>) {
                return x.value == y.value;
            } else if constexpr (std::is_same_v<T, ast::Pi>) {
                return true;
            } else if constexpr (std::is_same_v<T, ast::Variable> || std::is_same_v<T, ast::Parameter>) {
                return x.name == y.name;
            } else if constexpr (std::is_same_v<T, ast::Negate>) {
                return structurally_equal(*x.operand, *y.operand);
            } else if constexpr (std::is_same_v<T, ast::Binary>) {
                return x.op == y.op && structurally_equal(*x.lhs, *y.lhs) && structurally_equal(*x.rhs, *y.rhs);
            } else {
                if (x.func != y.func || x.args.size() != y.args.size()) return false;
                for (std::size_t k = 0; k < x.args.size(); ++k)
                    if (!structurally_equal(*x.args[k], *y.args[k])) return false;
                return true;
            }
        },
        a.node());
}

/// Values bound to the names an expression refers to.
template <typename T>
struct Bindings {
    std::map<std::string, T, std::less<>> variables;
    std::map<std::string, double, std::less<>> parameters;
};

namespace detail {

template <typename T>
T make_constant(double v)
{
    if constexpr (std::is_same_v<T, Jet>) {
        return Jet::constant(v);
    } else {
        return v;
    }
}

template <typename T>
bool is_constant_value(const T& x)
{
    if constexpr (std::is_same_v<T, Jet>) {
        return x.is_constant();
    } else {
        return true;
    }
}

template <typename T>
T evaluate_node(const Expr& e, const Bindings<T>& b)
{
    using std::atan2, std::cos, std::cosh, std::exp, std::log, std::sin, std::sinh, std::sqrt, std::tan, std::tanh;
    auto domain = [&e](const std::string& what) -> DomainError {
        return DomainError(what + " in sub-expression " + to_string(e));
    };
    return std::visit(
        [&](const auto& n) -> T {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ast::Number>) {
                return make_constant<T>(n.value);
            } else if constexpr (std::is_same_v<N, ast::Pi>) {
                return make_constant<T>(std::numbers::pi);
            } else if constexpr (std::is_same_v<N, ast::Variable>) {
                const auto it = b.variables.find(n.name);
                if (it == b.variables.end()) throw ParameterError("variable '" + n.name + "' is not bound");
                return it->second;
            } else if constexpr (std::is_same_v<N, ast::Parameter>) {
                const auto it = b.parameters.find(n.name);
                if (it == b.parameters.end()) throw ParameterError("parameter '" + n.name + "' is not bound");
                return make_constant<T>(it->second);
            } else if constexpr (std::is_same_v<N, ast::Negate>) {
                return -evaluate_node(*n.operand, b);
            } else if constexpr (std::is_same_v<N, ast::Binary>) {
                const T l = evaluate_node(*n.lhs, b);
                const T r = evaluate_node(*n.rhs, b);
                switch (n.op) {
                case BinOp::Add: return l + r;
                case BinOp::Sub: return l - r;
                case BinOp::Mul: return l * r;
                case BinOp::Div:
                    if (value_of(r) == 0.0) throw domain("division by zero");
                    return l / r;
                case BinOp::Pow: {
                    const double base = value_of(l);
                    if (is_constant_value(r)) {
                        const double p = value_of(r);
                        const bool integral = p == std::floor(p) && std::abs(p) <= 64.0;
                        if (!integral && base <= 0.0 && !(base == 0.0 && is_constant_value(l) && p > 0.0))
                            throw domain("non-integer power of non-positive base");
                        if (integral && p < 0.0 && base == 0.0) throw domain("division by zero");
                        if constexpr (std::is_same_v<T, Jet>) {
                            return pow(l, p);
                        } else {
                            return std::pow(l, p);
                        }
                    }
                    if (base <= 0.0) throw domain("variable power of non-positive base");
                    return exp(r * log(l));
                }
                }
                throw domain("bad operator");
            } else {
                const T a = evaluate_node(*n.args[0], b);
                const double v = value_of(a);
                switch (n.func) {
                case Func::Sin: return sin(a);
                case Func::Cos: return cos(a);
                case Func::Tan:
                    if (std::abs(std::cos(v)) < 1e-300) throw domain("tan at a pole");
                    return tan(a);
                case Func::Sinh: return sinh(a);
                case Func::Cosh: return cosh(a);
                case Func::Tanh: return tanh(a);
                case Func::Exp: return exp(a);
                case Func::Log:
                    if (!(v > 0.0)) throw domain("log of non-positive value");
                    return log(a);
                case Func::Sqrt:
                    if (v < 0.0) throw domain("sqrt of negative value");
                    if (v == 0.0 && !is_constant_value(a)) throw domain("sqrt not differentiable at zero");
                    return sqrt(a);
                case Func::Atan2: {
                    const T x = evaluate_node(*n.args[1], b);
                    if (v == 0.0 && value_of(x) == 0.0) throw domain("atan2 of (0, 0)");
                    return atan2(a, x);
                }
                }
                throw domain("bad function");
            }
        },
        e.node());
}

}  // namespace detail

/// Evaluates an expression over doubles or jets.
template <typename T>
T evaluate(const Expr& e, const Bindings<T>& b)
{
    T r = detail::evaluate_node(e, b);
    if (!std::isfinite(value_of(r))) throw DomainError("non-finite result of " + to_string(e));
    return r;
}

/// Jet of e about base = (u1, u2); u3 (when referenced) is held fixed.
inline Jet evaluate_jet(const Expr& e, double u1, double u2, const std::map<std::string, double, std::less<>>& params,
                        double u3 = 0.0)
{
    Bindings<Jet> b;
    b.variables.emplace("u1", Jet::variable(0, u1));
    b.variables.emplace("u2", Jet::variable(1, u2));
    b.variables.emplace("u3", Jet::constant(u3));
    b.parameters = params;
    return evaluate(e, b);
}

}  // namespace surfq
