#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "h1geo/expr.hpp"

using namespace h1geo;

TEST_CASE("numbers and precedence") {
    CHECK(parse_expression("2+3*4").eval({}) == 14.0);
    CHECK(parse_expression("(2+3)*4").eval({}) == 20.0);
    CHECK(parse_expression("2^10").eval({}) == 1024.0);
    CHECK(parse_expression("2^3^2").eval({}) == 512.0);  // right associative
    CHECK(parse_expression(".5 + 1.25e1").eval({}) == 13.0);
    CHECK(parse_expression("1.5e-1").eval({}) == 0.15);
    CHECK(parse_expression("cos(pi)").eval({}) == Catch::Approx(-1.0).margin(1e-15));
    // Power binds tighter than unary minus.
    Bindings b{{"x", 3.0}};
    CHECK(parse_expression("-x^2").eval(b) == -9.0);
    CHECK(parse_expression("(-x)^2").eval(b) == 9.0);
    CHECK(parse_expression("2^-3").eval({}) == 0.125);
}

TEST_CASE("integer exponents accept nonpositive bases") {
    Bindings b{{"x", -3.0}};
    CHECK(parse_expression("x^2").eval(b) == 9.0);
    CHECK(parse_expression("x^3").eval(b) == -27.0);
    CHECK(parse_expression("x^0").eval(b) == 1.0);
    CHECK_THROWS_AS(parse_expression("x^0.5").eval(b), EvalError);
    CHECK(parse_expression("x^0.5").eval(Bindings{{"x", 4.0}}) == 2.0);
}

TEST_CASE("dual evaluation produces exact jets") {
    Bindings at0{{"s", 0.0}};
    Dual t = parse_expression("tan(s)").eval_dual(at0, "s");
    CHECK(t.v == Catch::Approx(0.0).margin(1e-15));
    CHECK(t.d == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(t.dd == Catch::Approx(0.0).margin(1e-14));

    Dual se = parse_expression("sec(s)").eval_dual(at0, "s");
    CHECK(se.v == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(se.d == Catch::Approx(0.0).margin(1e-14));
    CHECK(se.dd == Catch::Approx(1.0).epsilon(1e-14));

    Dual sq = parse_expression("s*s").eval_dual(Bindings{{"s", 3.0}}, "s");
    CHECK(sq.v == 9.0);
    CHECK(sq.d == 6.0);
    CHECK(sq.dd == 2.0);

    Dual ct = parse_expression("cot(s)").eval_dual(Bindings{{"s", std::numbers::pi / 2}}, "s");
    CHECK(std::abs(ct.v) <= 1e-15);
    CHECK(ct.d == Catch::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("dual derivatives match central differences") {
    const char* exprs[] = {
        "sin(x)*exp(x/3)+x^3/7",
        "atan(x*x)/(2+cos(x))",
        "sqrt(x+3)*tanh(x)",
        "ln(2+sin(x))*sec(x/2)",
    };
    const double points[] = {-1.3, -0.2, 0.45, 1.7};
    const double h = 1e-5;
    for (const char* src : exprs) {
        Expression e = parse_expression(src);
        for (double x : points) {
            auto at = [&](double xx) { return e.eval(Bindings{{"x", xx}}); };
            Dual d = e.eval_dual(Bindings{{"x", x}}, "x");
            const double fd1 = (at(x + h) - at(x - h)) / (2 * h);
            const double fd2 = (at(x + h) - 2 * at(x) + at(x - h)) / (h * h);
            REQUIRE(d.d == Catch::Approx(fd1).margin(1e-6).epsilon(1e-6));
            REQUIRE(d.dd == Catch::Approx(fd2).margin(2e-4).epsilon(2e-4));
        }
    }
}

TEST_CASE("directional seeds recover mixed partials") {
    Expression g = parse_expression("x^2*y + sin(x*y)");
    const double x = 0.7, y = -0.3;
    Jet2_2 j = eval_jet2(g, Bindings{{"x", x}, {"y", y}}, "x", "y");
    const double c = std::cos(x * y), s = std::sin(x * y);
    CHECK(j.f == Catch::Approx(x * x * y + s).epsilon(1e-14));
    CHECK(j.fu == Catch::Approx(2 * x * y + y * c).epsilon(1e-13));
    CHECK(j.fv == Catch::Approx(x * x + x * c).epsilon(1e-13));
    CHECK(j.fuu == Catch::Approx(2 * y - y * y * s).margin(1e-13));
    CHECK(j.fvv == Catch::Approx(-x * x * s).margin(1e-13));
    CHECK(j.fuv == Catch::Approx(2 * x + c - x * y * s).epsilon(1e-13));
}

TEST_CASE("three-variable jets recover the full hessian") {
    Expression f = parse_expression("x*y*t + exp(t/2)*sin(x) + y^2");
    const double x = 0.4, y = -1.1, t = 0.6;
    Jet2_3 j = eval_jet2(f, Bindings{{"x", x}, {"y", y}, {"t", t}}, "x", "y", "t");
    const double et = std::exp(t / 2);
    CHECK(j.f == Catch::Approx(x * y * t + et * std::sin(x) + y * y).epsilon(1e-14));
    CHECK(j.fx == Catch::Approx(y * t + et * std::cos(x)).epsilon(1e-13));
    CHECK(j.fy == Catch::Approx(x * t + 2 * y).epsilon(1e-13));
    CHECK(j.ft == Catch::Approx(x * y + 0.5 * et * std::sin(x)).epsilon(1e-13));
    CHECK(j.fxx == Catch::Approx(-et * std::sin(x)).margin(1e-13));
    CHECK(j.fyy == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(j.ftt == Catch::Approx(0.25 * et * std::sin(x)).margin(1e-13));
    CHECK(j.fxy == Catch::Approx(t).epsilon(1e-13));
    CHECK(j.fxt == Catch::Approx(y + 0.5 * et * std::cos(x)).epsilon(1e-13));
    CHECK(j.fyt == Catch::Approx(x).epsilon(1e-13));
}

TEST_CASE("syntax errors carry byte offsets") {
    try {
        parse_expression("2+*3");
        FAIL("expected ParseError");
    } catch (const ParseError& pe) {
        CHECK(pe.offset == 2);
    }
    CHECK_THROWS_AS(parse_expression("2*(1+"), ParseError);
    CHECK_THROWS_AS(parse_expression(""), ParseError);
    CHECK_THROWS_AS(parse_expression("1 2"), ParseError);
    try {
        parse_expression("foo(3)");
        FAIL("expected ParseError");
    } catch (const ParseError& pe) {
        CHECK(pe.offset == 0);
        CHECK(pe.expected.find("function") != std::string::npos);
    }
}

TEST_CASE("domain errors name the offending subexpression") {
    try {
        parse_expression("1/(x-x)").eval(Bindings{{"x", 2.0}});
        FAIL("expected EvalError");
    } catch (const EvalError& ee) {
        CHECK(ee.subexpression == "1/(x-x)");
    }
    try {
        parse_expression("2*ln(x)").eval(Bindings{{"x", -1.0}});
        FAIL("expected EvalError");
    } catch (const EvalError& ee) {
        CHECK(ee.subexpression == "ln(x)");
    }
    CHECK_THROWS_AS(parse_expression("sqrt(0-x)").eval(Bindings{{"x", 4.0}}), EvalError);
    CHECK_THROWS_AS(parse_expression("y+1").eval(Bindings{{"x", 0.0}}), EvalError);
}

TEST_CASE("printer round-trips") {
    const char* sources[] = {
        "x*y/2",
        "t^2-((x^2+y^2)-1)/4",
        "(u*v)/(1+u^2/2)",
        "-x^2 + sec(s)*tan(s)",
        "cos(pi*x)+2e-3",
    };
    Bindings b{{"x", 0.37}, {"y", -1.2}, {"t", 0.8}, {"u", 0.5}, {"v", 2.0}, {"s", 0.3}};
    for (const char* src : sources) {
        Expression e = parse_expression(src);
        Expression back = parse_expression(e.to_string());
        REQUIRE(back.eval(b) == Catch::Approx(e.eval(b)).epsilon(1e-15));
    }
}

TEST_CASE("free variables are reported") {
    auto vars = parse_expression("x*y+sin(z)-pi").free_variables();
    REQUIRE(vars.size() == 3);
    CHECK(vars[0] == "x");
    CHECK(vars[1] == "y");
    CHECK(vars[2] == "z");
}
