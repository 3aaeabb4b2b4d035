#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "surfq/chart.hpp"
#include "surfq/expr.hpp"
#include "surfq/jet.hpp"
#include "test_support.hpp"

namespace surfq {
namespace {

double eval(const std::string& s)
{
    Bindings<double> b;
    return evaluate(parse_expression(s), b);
}

TEST(Parser, ProductOfCalls)
{
    const Expr e = parse_expression("sin(u1)*cos(u2)");
    const auto& mul = std::get<ast::Binary>(e.node());
    EXPECT_EQ(mul.op, BinOp::Mul);
    EXPECT_EQ(std::get<ast::Call>(mul.lhs->node()).func, Func::Sin);
    EXPECT_EQ(std::get<ast::Call>(mul.rhs->node()).func, Func::Cos);
    EXPECT_EQ(std::get<ast::Variable>(std::get<ast::Call>(mul.lhs->node()).args[0]->node()).name, "u1");
}

TEST(Parser, PowerIsRightAssociative) { EXPECT_EQ(eval("2^3^2"), 512.0); }

TEST(Parser, PrecedenceOfUnaryMinusAndPower)
{
    EXPECT_EQ(eval("-2^2"), -4.0);
    EXPECT_EQ(eval("2^-1"), 0.5);
    EXPECT_EQ(eval("1 - 2 * 3 + 8 / 4"), -3.0);
    EXPECT_EQ(eval("--3"), 3.0);
    EXPECT_NEAR(eval("pi"), std::numbers::pi, 0.0);
}

TEST(Parser, SyntaxErrorOffset)
{
    try {
        parse_expression("u1 +* u2");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 3u);
    }
}

TEST(Parser, RejectsUnknownNames)
{
    EXPECT_THROW(parse_expression("foo(u1)"), UnknownIdentifierError);
    EXPECT_THROW(parse_expression("R*u1"), UnknownIdentifierError);
    EXPECT_NO_THROW(parse_expression("R*u1", SymbolTable::surface({"R"})));
    EXPECT_THROW(parse_expression("u1", SymbolTable::cartesian()), UnknownIdentifierError);
}

TEST(Parser, RejectsImplicitMultiplicationAndBadArity)
{
    EXPECT_THROW(parse_expression("2u1"), ParseError);
    EXPECT_THROW(parse_expression("atan2(u1)"), ParseError);
    EXPECT_THROW(parse_expression("sin(u1, u2)"), ParseError);
    EXPECT_THROW(parse_expression("(u1"), ParseError);
    EXPECT_THROW(parse_expression(""), ParseError);
}

TEST(Parser, PrettyPrintRoundTrip)
{
    const char* sources[] = {"sin(u1)*cos(u2)", "-u1^2^-3 + 4.25e-3/(u2 - pi)", "atan2(u1, -u2) * sqrt(exp(u1))",
                             "R*cosh(u1/R) - -u2", "0.1 + 1e300 * 3"};
    for (const char* src : sources) {
        const Expr e = parse_expression(src, SymbolTable::surface({"R"}));
        const Expr again = parse_expression(to_string(e), SymbolTable::surface({"R"}));
        EXPECT_TRUE(structurally_equal(e, again)) << src << " -> " << to_string(e);
    }
}

TEST(Parser, RandomTreesRoundTrip)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        const std::string src = testing_support::random_expression_text(rng, 4);
        const Expr e = parse_expression(src);
        EXPECT_TRUE(structurally_equal(e, parse_expression(to_string(e)))) << src;
    }
}

TEST(Parser, FuzzNeverCrashes)
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(0, 256);
    std::uniform_int_distribution<int> byte(0, 255);
    const std::string alphabet = "u12+-*/^()., sincoexpqrtlgah0123456789e";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    int parsed = 0, rejected = 0;
    for (int k = 0; k < 10000; ++k) {
        std::string s(static_cast<std::size_t>(len(rng)), '\0');
        const bool structured = k % 2 == 0;
        for (auto& ch : s) ch = structured ? alphabet[pick(rng)] : static_cast<char>(byte(rng));
        try {
            parse_expression(s);
            ++parsed;
        } catch (const ParseError& e) {
            EXPECT_LE(e.offset(), s.size());
            ++rejected;
        }
    }
    EXPECT_EQ(parsed + rejected, 10000);
}

TEST(Parser, DeepNestingIsRejectedNotOverflowed)
{
    EXPECT_THROW(parse_expression(std::string(5000, '(') + "u1" + std::string(5000, ')')), ParseError);
    EXPECT_THROW(parse_expression(std::string(5000, '-') + "u1"), ParseError);
}

TEST(Jet, PolynomialCalculus)
{
    const Jet j = evaluate_jet(parse_expression("u1^2"), 2.0, 0.0, {});
    EXPECT_EQ(j.value(), 4.0);
    EXPECT_EQ(j.derivative(1, 0), 4.0);
    EXPECT_EQ(j.derivative(2, 0), 2.0);
    EXPECT_EQ(j.derivative(3, 0), 0.0);
    EXPECT_EQ(j.derivative(0, 1), 0.0);
    EXPECT_EQ(j.derivative(1, 1), 0.0);
}

TEST(Jet, TaylorOfSine)
{
    const Jet j = evaluate_jet(parse_expression("sin(u1)"), 0.0, 0.0, {});
    EXPECT_EQ(j.value(), 0.0);
    EXPECT_EQ(j.derivative(1, 0), 1.0);
    EXPECT_EQ(j.derivative(2, 0), 0.0);
    EXPECT_EQ(j.derivative(3, 0), -1.0);
}

TEST(Jet, ConstantHasNoDerivatives)
{
    const Jet j = evaluate_jet(parse_expression("3*pi - exp(2)"), 0.3, -1.0, {});
    for (int n = 1; n <= 3; ++n)
        for (int k = 0; k <= n; ++k) EXPECT_EQ(j.derivative(n - k, k), 0.0);
}

TEST(Jet, MixedPartialAgainstFiniteDifferences)
{
    const Expr e = parse_expression("exp(u1*u2)");
    const Jet j = evaluate_jet(e, 1.0, 1.0, {});
    EXPECT_NEAR(j.derivative(1, 1), 2.0 * std::exp(1.0), 1e-12);
    auto f = [&](double a, double b) { return std::exp(a * b); };
    const double h = 1e-4;
    const double fd = (f(1 + h, 1 + h) - f(1 + h, 1 - h) - f(1 - h, 1 + h) + f(1 - h, 1 - h)) / (4 * h * h);
    EXPECT_NEAR(j.derivative(1, 1), fd, 1e-6 * std::abs(fd));
}

TEST(Jet, ProductRuleIsExact)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = u(rng), b = u(rng);
        const Jet f = evaluate_jet(parse_expression("sin(u1) + u2^3"), a, b, {});
        const Jet g = evaluate_jet(parse_expression("exp(u1 - 2*u2)"), a, b, {});
        const Jet fg = evaluate_jet(parse_expression("(sin(u1) + u2^3) * exp(u1 - 2*u2)"), a, b, {});
        const Jet prod = f * g;
        for (int n = 0; n <= 3; ++n)
            for (int k = 0; k <= n; ++k)
                EXPECT_NEAR(prod.coeff(n - k, k), fg.coeff(n - k, k), 1e-12 * (1 + std::abs(fg.coeff(n - k, k))));
    }
}

TEST(Jet, AllFunctionsMatchFiniteDifferences)
{
    const char* sources[] = {"tan(0.3*u1 + u2)", "sinh(u1*u2)", "cosh(u1 - u2)", "tanh(2*u1 + u2)",
                             "log(2 + u1*u2)",   "sqrt(3 + u1 + u2^2)", "atan2(u2 + 2, u1 - 0.5)",
                             "u1^2.5 / u2",      "(1 + u1)^(u2)", "1 / (2 + sin(u1*u2))"};
    for (const char* src : sources) {
        const Expr e = parse_expression(src);
        const double a = 1.1, b = 0.7;
        const Jet j = evaluate_jet(e, a, b, {});
        auto f = [&](double x, double y) { return evaluate_jet(e, x, y, {}).value(); };
        for (int n = 1; n <= 3; ++n) {
            for (int k = 0; k <= n; ++k) {
                const double fd = testing_support::central_difference(f, a, b, n - k, k);
                EXPECT_NEAR(j.derivative(n - k, k), fd, 1e-6 * (1 + std::abs(fd))) << src << " order " << n - k << "," << k;
            }
        }
    }
}

TEST(Jet, DifferentiationLowersOrder)
{
    const Jet j = evaluate_jet(parse_expression("u1^3*u2"), 1.0, 2.0, {});
    const Jet d = j.differentiate(0);
    EXPECT_EQ(d.order(), 2);
    EXPECT_DOUBLE_EQ(d.value(), 6.0);
    EXPECT_DOUBLE_EQ(d.derivative(1, 0), 12.0);
    EXPECT_DOUBLE_EQ(d.derivative(1, 1), 6.0);
    EXPECT_EQ((d * j).order(), 2);
}

TEST(Evaluate, DomainErrorsNameTheSubexpression)
{
    try {
        evaluate_jet(parse_expression("1 + sqrt(u1 - 5)"), 1.0, 0.0, {});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("sqrt"), std::string::npos);
    }
    EXPECT_THROW(evaluate_jet(parse_expression("log(u1)"), 0.0, 0.0, {}), DomainError);
    EXPECT_THROW(evaluate_jet(parse_expression("u2 / u1"), 0.0, 1.0, {}), DomainError);
    EXPECT_THROW(evaluate_jet(parse_expression("u1^0.5"), -1.0, 1.0, {}), DomainError);
    EXPECT_NO_THROW(evaluate_jet(parse_expression("u1^3"), -1.0, 1.0, {}));
}

TEST(Evaluate, UnboundParameter)
{
    const Expr e = parse_expression("R*u1", SymbolTable::surface({"R"}));
    EXPECT_THROW(evaluate_jet(e, 1.0, 1.0, {}), ParameterError);
    EXPECT_DOUBLE_EQ(evaluate_jet(e, 1.0, 1.0, {{"R", 2.0}}).value(), 2.0);
}

TEST(Charts, TorusParametrization)
{
    const SurfaceChart t = builtin_chart("torus", {{"R", 2.0}, {"r", 1.0}});
    EXPECT_TRUE(t.axes[0].periodic);
    EXPECT_TRUE(t.axes[1].periodic);
    EXPECT_DOUBLE_EQ(t.axes[0].min, 0.0);
    EXPECT_DOUBLE_EQ(t.axes[0].max, 2 * std::numbers::pi);
    const auto p = position(t, 0.4, 1.3);
    EXPECT_NEAR(p[0], (2 + std::cos(0.4)) * std::cos(1.3), 1e-15);
}

TEST(Charts, SpherePeriodicity)
{
    const SurfaceChart s = builtin_chart("sphere", {{"R", 1.0}});
    EXPECT_FALSE(s.axes[0].periodic);
    EXPECT_TRUE(s.axes[1].periodic);
    EXPECT_DOUBLE_EQ(s.axes[0].min, 0.0);
    EXPECT_DOUBLE_EQ(s.axes[0].max, std::numbers::pi);
}

TEST(Charts, InvalidParameters)
{
    EXPECT_THROW(builtin_chart("torus", {{"R", 1.0}, {"r", 2.0}}), ParameterError);
    EXPECT_THROW(builtin_chart("torus", {{"R", 1.0}, {"r", 1.0}}), ParameterError);
    EXPECT_THROW(builtin_chart("sphere", {{"R", 0.0}}), ParameterError);
    EXPECT_THROW(builtin_chart("sphere", {}), ParameterError);
    EXPECT_THROW(builtin_chart("cylinder", {{"R", 1.0}, {"q", 1.0}}), ParameterError);
    EXPECT_THROW(builtin_chart("klein", {}), ParameterError);
}

TEST(Charts, SeamContinuity)
{
    for (const char* name : kBuiltinCharts) {
        const SurfaceChart c = builtin_chart(name, testing_support::default_params(name));
        EXPECT_LE(seam_mismatch(c), 1e-10) << name;
    }
}

TEST(Charts, JetsMatchFiniteDifferencesAtRandomPoints)
{
    std::mt19937_64 rng(99);
    for (const char* name : kBuiltinCharts) {
        const SurfaceChart c = builtin_chart(name, testing_support::default_params(name));
        for (int k = 0; k < 100; ++k) {
            const double u1 = testing_support::interior_sample(c.axes[0], rng);
            const double u2 = testing_support::interior_sample(c.axes[1], rng);
            const auto jets = position_jets(c, u1, u2);
            for (std::size_t comp = 0; comp < 3; ++comp) {
                const Expr& e = comp == 0 ? c.x : comp == 1 ? c.y : c.z;
                auto f = [&](double a, double b) { return evaluate_jet(e, a, b, c.params).value(); };
                for (int n = 1; n <= 3; ++n) {
                    for (int j = 0; j <= n; ++j) {
                        const double fd = testing_support::central_difference(f, u1, u2, n - j, j);
                        const double exact = jets[comp].derivative(n - j, j);
                        EXPECT_NEAR(exact, fd, 1e-6 * std::max(1.0, std::abs(exact))) << name;
                    }
                }
            }
        }
    }
}

}  // namespace
}  // namespace surfq
