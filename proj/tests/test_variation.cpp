#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "h1geo/variation.hpp"

using namespace h1geo;

namespace {
constexpr double kPi = std::numbers::pi;

// C^2 polynomial bump on [-a,a], used as a generic test deformation.
Grad2 poly_bump(double u, double v, double a) {
    auto q = [a](double x) { return std::abs(x) >= a ? 0.0 : std::pow(1.0 - (x / a) * (x / a), 3); };
    auto qp = [a](double x) {
        if (std::abs(x) >= a) return 0.0;
        const double t = x / a;
        return -6.0 * t * (1.0 - t * t) * (1.0 - t * t) / a;
    };
    return {q(u) * q(v), qp(u) * q(v), q(u) * qp(v)};
}

StripData yt_strip() {
    // F = 0, G = s, sigma = s: the chart of the graph phi = uv/(1+u^2/2).
    return StripData::create(strip_spec_from_expressions(
        parse_expression("0"), parse_expression("s"), parse_expression("s"), Interval{-2, 2}));
}
}  // namespace

TEST_CASE("cutoff profile") {
    BumpSpec b{0.4};
    CHECK(b.chi(0.0) == 1.0);
    CHECK(b.chi(0.39) == 1.0);
    CHECK(b.chi(-0.2) == 1.0);
    CHECK(b.chi(0.81) == 0.0);
    CHECK(b.chi(5.0) == 0.0);
    CHECK(b.chi(0.6) == Catch::Approx(0.5).epsilon(1e-14));  // transition midpoint
    CHECK(b.chi(0.55) == b.chi(-0.55));

    // Monotone nonincreasing in |x|, derivative matches central differences.
    double prev = 1.0;
    for (double x = 0.0; x <= 0.85; x += 0.01) {
        const double c = b.chi(x);
        REQUIRE(c <= prev + 1e-15);
        prev = c;
        const double h = 1e-6;
        REQUIRE(b.chi_prime(x) ==
                Catch::Approx((b.chi(x + h) - b.chi(x - h)) / (2 * h)).margin(1e-6));
    }
    CHECK(b.chi_prime(0.0) == 0.0);
    CHECK(b.chi_prime(1.0) == 0.0);
    CHECK_THROWS_AS(BumpSpec{-1.0}.chi(0.0), PreconditionError);
}

TEST_CASE("kernel integral closed form") {
    CHECK(kernel_integral(0.5, 0.0, 0.5) == Catch::Approx(2 * kPi).epsilon(1e-14));
    CHECK(kernel_integral(0.5, 1.0, 1.0) == Catch::Approx(2 * kPi).epsilon(1e-14));
    CHECK(kernel_integral(1.0, 0.0, 1.0) == Catch::Approx(kPi / 2).epsilon(1e-14));

    CHECK_THROWS_AS(kernel_integral(-1.0, 0.0, 1.0), PreconditionError);
    CHECK_THROWS_AS(kernel_integral(0.0, 0.0, 1.0), PreconditionError);
    CHECK_THROWS_AS(kernel_integral(1.0, 2.0, 1.0), PreconditionError);  // 4AC = B^2

    // Adaptive quadrature over a truncated line agrees.
    std::mt19937_64 rng(550001);
    std::uniform_real_distribution<double> coef(0.3, 3.0);
    for (int i = 0; i < 5; ++i) {
        const double A = coef(rng), C = coef(rng);
        double B = coef(rng);
        if (4 * A * C - B * B <= 0.1) B = 0.0;
        auto f = [&](double u) {
            const double q = A * u * u + B * u + C;
            return 1.0 / (q * q);
        };
        const double U = 4000.0;
        const double v = integrate(f, -U, U, QuadOptions{1e-10, 0.0, 4000000}).value;
        REQUIRE(kernel_integral(A, B, C) == Catch::Approx(v).epsilon(1e-6));
    }
}

TEST_CASE("psi_k values and support") {
    CatenoidStrip c = catenoid_strip(0.1);
    BumpSpec b{0.5};

    TestFunctionPsiK t2(c.data, b, 2);
    CHECK(t2.delta_u() == 0.5);
    CHECK(t2.delta_s() == Catch::Approx(0.0495).epsilon(1e-14));  // clamped to J
    CHECK(t2.center() == 0.0);
    CHECK(t2.value(0.0, 0.0) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(TestFunctionPsiK(c.data, b, 7).value(0.0, 0.0) ==
          Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));

    StripWindow w = t2.support();
    CHECK(w.u0 == -2.0);
    CHECK(w.u1 == 2.0);
    CHECK(w.s0 == Catch::Approx(-0.099));
    CHECK(w.s1 == Catch::Approx(0.099));

    // Zero outside the support, in value and u-partial.
    StripPsiValue edge = t2.eval(2.0, 0.0);
    CHECK(edge.psi == 0.0);
    CHECK(edge.psi_u == 0.0);
    CHECK(t2.eval(2.5, 0.0).psi == 0.0);
    CHECK(t2.eval(0.3, 0.0995).psi == 0.0);
    CHECK(t2.ds(0.3, 0.0995) == 0.0);

    CHECK_THROWS_AS(TestFunctionPsiK(c.data, b, 0), PreconditionError);
    CHECK_THROWS_AS(TestFunctionPsiK(c.data, BumpSpec{0.0}, 1), PreconditionError);
}

TEST_CASE("psi_k partials match finite differences") {
    CatenoidStrip c = catenoid_strip(0.1);
    TestFunctionPsiK t(c.data, BumpSpec{0.5}, 2);
    std::mt19937_64 rng(550002);
    std::uniform_real_distribution<double> U(-1.9, 1.9), S(-0.09, 0.09);
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
        const double u = U(rng), s = S(rng);
        const StripPsiValue pv = t.eval(u, s);
        REQUIRE(pv.psi_u ==
                Catch::Approx((t.value(u + h, s) - t.value(u - h, s)) / (2 * h)).margin(2e-6));
        REQUIRE(t.ds(u, s) ==
                Catch::Approx((t.value(u, s + h) - t.value(u, s - h)) / (2 * h)).margin(2e-5));
    }

    // Seed-backed strips have no curve second derivatives, so no s-partial.
    SeedCurve circle = SeedCurve::from_expressions(
        parse_expression("cos(s)"), parse_expression("sin(s)"), parse_expression("-s"),
        Interval{kPi / 2 - 0.3, kPi / 2 + 0.3});
    StripData seed_strip = StripData::create(strip_spec_from_seed(circle));
    TestFunctionPsiK ts(seed_strip, BumpSpec{0.5}, 1);
    CHECK(ts.value(0.0, seed_strip.J().mid()) > 0.0);
    CHECK_THROWS_AS(ts.ds(0.0, seed_strip.J().mid()), PreconditionError);
    CHECK_THROWS_AS(psi_k_pullback(ts), PreconditionError);
}

TEST_CASE("catenoid instability sweep") {
    CatenoidStrip c = catenoid_strip(0.1);
    BumpSpec b{0.5};

    // Independent reduction of the limit integrand: chi^2 cos^2 s.
    const double limit = instability_limit(c.data, b);
    const BumpSpec sb{0.0495};
    const double reduced =
        -1.5 * kPi *
        integrate([&](double s) { const double ch = sb.chi(s);
                                  return ch * ch * std::cos(s) * std::cos(s); },
                  -0.099, 0.099)
            .value;
    CHECK(limit == Catch::Approx(reduced).epsilon(1e-10));
    CHECK(limit == Catch::Approx(-0.6547122385).margin(1e-8));
    CHECK(limit < 0.0);

    PsiKLimits l = psi_k_limits(c.data, b);
    CHECK(l.term1_limit / l.term2_limit == Catch::Approx(-0.25).epsilon(1e-14));
    CHECK(l.term1_limit + l.term2_limit == Catch::Approx(limit).epsilon(1e-12));

    InstabilitySearchResult res = instability_search(c.data, b, 64);
    REQUIRE(res.found());
    CHECK(res.witness_k == 2);
    REQUIRE(res.reports.size() == 2);
    CHECK(res.reports[0].k == 1);
    CHECK_FALSE(res.reports[0].unstable());
    CHECK(res.reports[0].total == Catch::Approx(0.46019075).margin(1e-6));
    CHECK(res.reports[1].k == 2);
    CHECK(res.reports[1].unstable());
    CHECK(res.reports[1].term1 == Catch::Approx(0.65226081).margin(1e-6));
    CHECK(res.reports[1].term2 == Catch::Approx(-0.78965546).margin(1e-6));
    CHECK(res.reports[1].total == Catch::Approx(-0.13739466).margin(1e-6));
    CHECK(res.reports[1].limit_prediction == Catch::Approx(limit).epsilon(1e-12));
    for (const VariationReport& r : res.reports) {
        CHECK(r.total == r.term1 + r.term2);
        CHECK(r.term1 >= 0.0);
        CHECK(r.term2 <= 0.0);
    }

    // Doubling k shrinks the gap to the limit; 5% is reached by k = 64.
    double prev_gap = std::numeric_limits<double>::infinity();
    double gap64 = 1.0;
    for (int k : {16, 32, 64}) {
        TestFunctionPsiK t(c.data, b, k);
        VariationReport r = second_variation_strip(c.data, psi_k_strip_field(t), t.support());
        const double gap = std::abs(r.total - limit) / std::abs(limit);
        REQUIRE(gap < prev_gap);
        prev_gap = gap;
        gap64 = gap;
    }
    CHECK(gap64 <= 0.05);
}

TEST_CASE("search without a witness reports the trend") {
    CatenoidStrip c = catenoid_strip(0.1);

    // Narrow u-profile: totals stay positive through k = 4 but close in on the limit.
    InstabilitySearchResult res = instability_search(c.data, BumpSpec{0.0495}, 4);
    CHECK_FALSE(res.found());
    CHECK(res.witness_k == -1);
    REQUIRE(res.reports.size() == 3);
    for (const VariationReport& r : res.reports) CHECK(r.total > 0.0);

    // A single iterate can establish neither negativity nor a trend.
    CHECK_THROWS_AS(instability_search(c.data, BumpSpec{0.5}, 1), NumericalError);
    CHECK_THROWS_AS(instability_search(c.data, BumpSpec{0.5}, 0), PreconditionError);
}

TEST_CASE("vertical plane second variation") {
    IntrinsicGraph plane =
        IntrinsicGraph::from_expression(parse_expression("0"), Rect{-2, 2, -2, 2});
    Band region = Band::rect(-1, 1, -1, 1);
    PsiField psi = [](double u, double v) { return poly_bump(u, v, 0.95); };

    VariationReport rep = second_variation_intrinsic(plane, psi, region);
    CHECK(rep.term2 == 0.0);  // potential term vanishes identically
    CHECK(rep.total >= 0.0);
    CHECK_FALSE(rep.unstable());

    // term1 reduces to the Dirichlet-type integral of psi_u.
    const double dir = integrate2([&](double u, double v) { const Grad2 p = poly_bump(u, v, 0.95);
                                                            return p.fu * p.fu; },
                                  -1.0, 1.0, -1.0, 1.0)
                           .value;
    CHECK(rep.term1 == Catch::Approx(dir).epsilon(1e-9));

    const double fd =
        fd_second_variation(plane, psi, region, 1e-3, QuadOptions{1e-6, 1e-7, 1000000});
    CHECK(fd == Catch::Approx(rep.total).epsilon(1e-5));
    CHECK(std::abs(fd_first_variation(plane, psi, region)) <= 1e-6);
}

TEST_CASE("intrinsic and strip forms agree through the chart") {
    CatenoidStrip c = catenoid_strip(0.1);
    IntrinsicGraph g = make_intrinsic_graph(c.data);
    TestFunctionPsiK t(c.data, BumpSpec{0.5}, 2);

    // Pullback partials match finite differences of the pulled-back value.
    PsiField field = psi_k_pullback(t);
    Band band = psi_k_band(t);
    std::mt19937_64 rng(550003);
    std::uniform_real_distribution<double> U(-1.8, 1.8), T(0.1, 0.9);
    const double h = 1e-6;
    for (int i = 0; i < 20; ++i) {
        const double u = U(rng);
        const double v = band.v_lo(u) + (band.v_hi(u) - band.v_lo(u)) * T(rng);
        const Grad2 p = field(u, v);
        REQUIRE(p.fu ==
                Catch::Approx((field(u + h, v).f - field(u - h, v).f) / (2 * h)).margin(2e-6));
        REQUIRE(p.fv ==
                Catch::Approx((field(u, v + h).f - field(u, v - h).f) / (2 * h)).margin(2e-6));
    }
    CHECK(field(0.5, band.v_lo(0.5)).f == Catch::Approx(0.0).margin(1e-14));
    CHECK(field(0.5, band.v_hi(0.5)).f == Catch::Approx(0.0).margin(1e-14));

    VariationReport strip_rep = second_variation_strip(c.data, psi_k_strip_field(t), t.support());
    VariationReport intr_rep =
        second_variation_intrinsic(g, field, band, QuadOptions{1e-7, 1e-10, 1000000});
    CHECK(intr_rep.term1 == Catch::Approx(strip_rep.term1).epsilon(1e-6));
    CHECK(intr_rep.term2 == Catch::Approx(strip_rep.term2).epsilon(1e-6));
    CHECK(intr_rep.total == Catch::Approx(strip_rep.total).epsilon(1e-6));

    // Independent oracle: second difference of the perimeter.
    const double fd = fd_second_variation(g, field, band);
    CHECK(fd == Catch::Approx(strip_rep.total).epsilon(1e-4));
    CHECK(std::abs(fd_first_variation(g, field, band)) <= 1e-6);
}

TEST_CASE("three forms agree on an expression strip") {
    StripData d = yt_strip();
    IntrinsicGraph g = make_intrinsic_graph(d);
    const double a = 0.9;
    PsiField psi = [a](double u, double v) { return poly_bump(u, v, a); };
    Band region = Band::rect(-a, a, -a, a);

    // Push the field to strip coordinates: v_u at fixed s is G(s) u + F(s).
    StripPsi strip_psi = [&d, a](double u, double s) {
        const Vec2 p = psi_map(d, u, s);
        const Grad2 q = poly_bump(u, p.y, a);
        const double vu = d.G()(s).f * u + d.F()(s).f;
        return StripPsiValue{q.f, q.fu + q.fv * vu};
    };

    VariationReport intr = second_variation_intrinsic(g, psi, region);
    VariationReport strip = second_variation_strip(d, strip_psi, {-a, a, -a, a});
    CHECK(strip.total == Catch::Approx(intr.total).epsilon(1e-6));
    CHECK(strip.term1 == Catch::Approx(intr.term1).epsilon(1e-6));
    CHECK(strip.term2 == Catch::Approx(intr.term2).epsilon(1e-6));

    const double fd = fd_second_variation(g, psi, region);
    CHECK(fd == Catch::Approx(intr.total).epsilon(1e-4));
    CHECK(std::abs(fd_first_variation(g, psi, region)) <= 1e-6);
}

TEST_CASE("second variation preconditions") {
    IntrinsicGraph bent =
        IntrinsicGraph::from_expression(parse_expression("u^2"), Rect{-1, 1, -1, 1});
    PsiField psi = [](double u, double v) { return poly_bump(u, v, 0.5); };
    CHECK_THROWS_AS(second_variation_intrinsic(bent, psi, Band::rect(-0.5, 0.5, -0.5, 0.5)),
                    PreconditionError);
    CHECK_THROWS_AS(generic_instability_search(bent, Band::rect(-0.5, 0.5, -0.5, 0.5)),
                    PreconditionError);

    // Seed-backed strips expose no second derivatives.
    SeedCurve circle = SeedCurve::from_expressions(
        parse_expression("cos(s)"), parse_expression("sin(s)"), parse_expression("-s"),
        Interval{kPi / 2 - 0.3, kPi / 2 + 0.3});
    IntrinsicGraph seed_graph = make_intrinsic_graph(StripData::create(strip_spec_from_seed(circle)));
    CHECK_THROWS_AS(second_variation_intrinsic(seed_graph, psi, Band::rect(0, 1, -1.6, -1.5)),
                    PreconditionError);
}

TEST_CASE("generic search on the vertical plane") {
    IntrinsicGraph plane =
        IntrinsicGraph::from_expression(parse_expression("0"), Rect{-3, 3, -3, 3});
    GenericSearchResult r = generic_instability_search(plane, Band::rect(-2, 2, -2, 2),
                                                       BasisSpec{8});
    CHECK(r.minimum >= -1e-9);
    CHECK_FALSE(r.unstable());
    CHECK(r.n == 8);
    REQUIRE(r.coefficients.size() == 64);
    double norm2 = 0.0;
    for (double x : r.coefficients) norm2 += x * x;
    CHECK(norm2 == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("generic search certifies instability of the ruled entire graph") {
    // phi = uv/(1+u^2/2) is the graph x = yt: noncharacteristic, minimal, unstable.
    IntrinsicGraph g = IntrinsicGraph::from_expression(parse_expression("(u*v)/(1+u^2/2)"),
                                                       Rect{-50, 50, -50, 50});
    GenericSearchResult r = generic_instability_search(g, Band::rect(-8, 8, -8, 8));
    CHECK(r.unstable());
    CHECK(r.minimum < -0.05);
}

TEST_CASE("generic search agrees with the psi_k sweep on the catenoid band") {
    CatenoidStrip c = catenoid_strip(0.1);
    IntrinsicGraph g = make_intrinsic_graph(c.data);
    TestFunctionPsiK t(c.data, BumpSpec{0.5}, 4);
    GenericSearchResult r = generic_instability_search(g, psi_k_band(t), BasisSpec{16});
    CHECK(r.unstable());
    CHECK(r.minimum < -1e-3);
}
