#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "h1geo/heisenberg.hpp"

using namespace h1geo;

namespace {
double dist(const HeisenbergPoint& a, const HeisenbergPoint& b) {
    return std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.t - b.t);
}
}  // namespace

TEST_CASE("group law twists the vertical coordinate") {
    HeisenbergPoint p = group_mul({1, 0, 0}, {0, 1, 0});
    CHECK(p.x == 1.0);
    CHECK(p.y == 1.0);
    CHECK(p.t == 0.5);

    // Non-commutative: reversing the factors flips the area term.
    HeisenbergPoint q = group_mul({0, 1, 0}, {1, 0, 0});
    CHECK(q.t == -0.5);
}

TEST_CASE("group axioms hold on random triples") {
    std::mt19937_64 rng(420001);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        HeisenbergPoint g{U(rng), U(rng), U(rng)};
        HeisenbergPoint h{U(rng), U(rng), U(rng)};
        HeisenbergPoint k{U(rng), U(rng), U(rng)};
        HeisenbergPoint assoc_l = group_mul(group_mul(g, h), k);
        HeisenbergPoint assoc_r = group_mul(g, group_mul(h, k));
        REQUIRE(dist(assoc_l, assoc_r) <= 1e-10);
        REQUIRE(dist(group_mul(g, group_inv(g)), HeisenbergPoint{}) <= 1e-10);
        REQUIRE(dist(group_mul(group_inv(g), g), HeisenbergPoint{}) <= 1e-10);
        REQUIRE(dist(group_mul(g, HeisenbergPoint{}), g) <= 1e-10);
    }
}

TEST_CASE("dilations are group homomorphisms") {
    std::mt19937_64 rng(420002);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    std::uniform_real_distribution<double> L(0.1, 4.0);
    for (int i = 0; i < 200; ++i) {
        HeisenbergPoint g{U(rng), U(rng), U(rng)};
        HeisenbergPoint h{U(rng), U(rng), U(rng)};
        double lam = L(rng);
        HeisenbergPoint lhs = dilate(group_mul(g, h), lam);
        HeisenbergPoint rhs = group_mul(dilate(g, lam), dilate(h, lam));
        REQUIRE(dist(lhs, rhs) <= 1e-10);
    }
    CHECK_THROWS_AS(dilate({1, 1, 1}, 0.0), PreconditionError);
    CHECK_THROWS_AS(dilate({1, 1, 1}, -2.0), PreconditionError);
}

TEST_CASE("frame passage matrix at a base point") {
    // X1 at (0,2,*) has cartesian parts (1, 0, -y/2) = (1, 0, -1).
    Vec3 v = frame_to_cartesian({1, 0, 0}, {0, 2, 7});
    CHECK(v.x == 1.0);
    CHECK(v.y == 0.0);
    CHECK(v.t == -1.0);
}

TEST_CASE("frame passage round-trips") {
    std::mt19937_64 rng(420003);
    std::uniform_real_distribution<double> U(-4.0, 4.0);
    for (int i = 0; i < 500; ++i) {
        HeisenbergPoint base{U(rng), U(rng), U(rng)};
        FrameCoefficients fc{U(rng), U(rng), U(rng)};
        Vec3 cart = frame_to_cartesian(fc, base);
        FrameCoefficients back = cartesian_to_frame(cart, base);
        REQUIRE(std::abs(back.a - fc.a) <= 1e-12);
        REQUIRE(std::abs(back.b - fc.b) <= 1e-12);
        REQUIRE(std::abs(back.c - fc.c) <= 1e-12);

        Vec3 cart2 = frame_to_cartesian(back, base);
        REQUIRE(std::abs(cart2.x - cart.x) <= 1e-12);
        REQUIRE(std::abs(cart2.y - cart.y) <= 1e-12);
        REQUIRE(std::abs(cart2.t - cart.t) <= 1e-12);
    }
}
