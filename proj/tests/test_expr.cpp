#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "topopt/expr.hpp"

using topopt::Expr;
using topopt::ExprDomainError;
using topopt::ExprSyntaxError;
using topopt::ExprVars;
using topopt::VarSet;

TEST(Expr, ShiftedParaboloidTarget) {
    const Expr e = Expr::parse("-(x1-0.5)^2 - (x2-0.5)^2 + 1/16");
    EXPECT_DOUBLE_EQ(e(0.5, 0.5), 0.0625);
    EXPECT_DOUBLE_EQ(e(0.0, 0.5), -0.25 + 0.0625);
}

TEST(Expr, Basics) {
    EXPECT_EQ(Expr::parse("x1")(3, 7), 3);
    EXPECT_EQ(Expr::parse("4")(-1.2, 9.9), 4);
    EXPECT_EQ(Expr::parse("-x1^2-x2^2+1")(0, 0), 1);
    EXPECT_EQ(Expr::parse("x1^2+x2^2-1")(1, 0), 0);
    // Unary minus binds looser than '^'.
    EXPECT_EQ(Expr::parse("-x1^2")(3, 0), -9);
    EXPECT_EQ(Expr::parse("2^3^2")(0, 0), 512);
    EXPECT_EQ(Expr::parse("2^-1")(0, 0), 0.5);
    EXPECT_EQ(Expr::parse("8/4/2")(0, 0), 1);
    EXPECT_EQ(Expr::parse("max(x1, x2) - min(x1, x2)")(2, 5), 3);
    EXPECT_DOUBLE_EQ(Expr::parse("2.25^0.5")(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(Expr::parse("1e-3*x2")(0, 2), 2e-3);
}

TEST(Expr, SyntaxErrorOffsets) {
    try {
        Expr::parse("min(x1,)");
        FAIL();
    } catch (const ExprSyntaxError& e) {
        EXPECT_EQ(e.offset, 8u);
    }
    EXPECT_THROW(Expr::parse(""), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("x1 +"), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("(x1"), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("foo(x1)"), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("x3"), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("y"), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("sin(x1, x2)"), ExprSyntaxError);
    EXPECT_THROW(Expr::parse("x1 x2"), ExprSyntaxError);
}

TEST(Expr, DomainErrorsNamePoint) {
    const Expr e = Expr::parse("sqrt(x1)");
    try {
        e(-1, 2);
        FAIL();
    } catch (const ExprDomainError& err) {
        EXPECT_NE(std::string(err.what()).find("-1"), std::string::npos);
    }
    EXPECT_THROW(Expr::parse("1/x1")(0, 0), ExprDomainError);
    EXPECT_THROW(Expr::parse("x1^0.5")(-2, 0), ExprDomainError);
}

TEST(Expr, StateVariables) {
    const Expr j = Expr::parse("(y-yd)^2", VarSet::state);
    EXPECT_TRUE(j.uses_state());
    EXPECT_DOUBLE_EQ(j(ExprVars{0, 0, 3.0, 1.0}), 4.0);
    EXPECT_FALSE(Expr::parse("x1*x2").uses_state());
}

TEST(Expr, PrintParseRoundTrip) {
    const char* sources[] = {"-(x1-0.5)^2 - (x2-0.5)^2 + 1/16",
                             "max(sqrt(x1^2+x2^2)-2.5, 0.5-sqrt((x1+1)^2+(x2+1)^2))",
                             "-x1^2-x2^2+1",
                             "2^3^2 - -x1 * exp(sin(x2)/3)",
                             "abs(cos(pi*x1)) + 0.1"};
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-3, 3);
    for (const char* s : sources) {
        const Expr a = Expr::parse(s);
        const Expr b = Expr::parse(a.to_string());
        EXPECT_EQ(a.to_string(), b.to_string());
        for (int k = 0; k < 20; ++k) {
            const double x = U(rng), y = U(rng);
            EXPECT_EQ(a(x, y), b(x, y));
        }
    }
}

TEST(Expr, ShippedExpressionsMatchClosedForms) {
    const Expr yd1 = Expr::parse("-(x1-0.5)^2 - (x2-0.5)^2 + 1/16");
    const Expr yd2 = Expr::parse("1 - x1^2 - x2^2");
    const Expr g0 = Expr::parse("max(sqrt(x1^2+x2^2)-2.5, 0.5-sqrt((x1+1)^2+(x2+1)^2))");
    const Expr g3 = Expr::parse("sqrt(x1^2+x2^2)-1.5");
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-3, 3);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (int k = 0; k < 1000; ++k) {
        const double x = U(rng), y = U(rng);
        EXPECT_LE(rel(yd1(x, y), -(x - 0.5) * (x - 0.5) - (y - 0.5) * (y - 0.5) + 1.0 / 16), 1e-14);
        EXPECT_LE(rel(yd2(x, y), 1 - x * x - y * y), 1e-14);
        const double g = std::max(std::sqrt(x * x + y * y) - 2.5,
                                  0.5 - std::sqrt((x + 1) * (x + 1) + (y + 1) * (y + 1)));
        EXPECT_LE(rel(g0(x, y), g), 1e-14);
        EXPECT_LE(rel(g3(x, y), std::sqrt(x * x + y * y) - 1.5), 1e-14);
    }
}
