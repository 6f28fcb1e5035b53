#pragma once

// Second-order forward-mode dual numbers: value, first and second derivative
// with respect to a single seed direction. Everything downstream needs at most
// second derivatives, so the order is fixed at two.

#include <cmath>

namespace h1geo {

struct Dual {
    double v = 0.0;   // value
    double d = 0.0;   // first derivative
    double dd = 0.0;  // second derivative

    constexpr Dual() = default;
    constexpr Dual(double v_) : v(v_) {}
    constexpr Dual(double v_, double d_, double dd_ = 0.0) : v(v_), d(d_), dd(dd_) {}

    static constexpr Dual variable(double x) { return {x, 1.0, 0.0}; }
    static constexpr Dual constant(double c) { return {c, 0.0, 0.0}; }
};

constexpr Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
constexpr Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d, -a.dd}; }

constexpr Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.v * b.d + a.d * b.v, a.v * b.dd + 2.0 * a.d * b.d + a.dd * b.v};
}

// 1/g. (1/g)'' = (2 g'^2 - g g'') / g^3.
constexpr Dual recip(const Dual& g) {
    const double iv = 1.0 / g.v;
    return {iv, -g.d * iv * iv, (2.0 * g.d * g.d - g.v * g.dd) * iv * iv * iv};
}

constexpr Dual operator/(const Dual& a, const Dual& b) { return a * recip(b); }

constexpr Dual operator+(const Dual& a, double c) { return {a.v + c, a.d, a.dd}; }
constexpr Dual operator+(double c, const Dual& a) { return a + c; }
constexpr Dual operator-(const Dual& a, double c) { return {a.v - c, a.d, a.dd}; }
constexpr Dual operator-(double c, const Dual& a) { return {c - a.v, -a.d, -a.dd}; }
constexpr Dual operator*(const Dual& a, double c) { return {a.v * c, a.d * c, a.dd * c}; }
constexpr Dual operator*(double c, const Dual& a) { return a * c; }
constexpr Dual operator/(const Dual& a, double c) { return {a.v / c, a.d / c, a.dd / c}; }
constexpr Dual operator/(double c, const Dual& b) { return Dual::constant(c) * recip(b); }

// Chain rule through an outer scalar function with value f, derivatives fd, fdd
// taken at u.v.
constexpr Dual chain(double f, double fd, double fdd, const Dual& u) {
    return {f, fd * u.d, fdd * u.d * u.d + fd * u.dd};
}

inline Dual sin(const Dual& u) {
    const double s = std::sin(u.v), c = std::cos(u.v);
    return chain(s, c, -s, u);
}
inline Dual cos(const Dual& u) {
    const double s = std::sin(u.v), c = std::cos(u.v);
    return chain(c, -s, -c, u);
}
inline Dual tan(const Dual& u) {
    const double t = std::tan(u.v), w = 1.0 + t * t;
    return chain(t, w, 2.0 * t * w, u);
}
inline Dual sec(const Dual& u) {
    const double se = 1.0 / std::cos(u.v), ta = std::tan(u.v);
    return chain(se, se * ta, se * (2.0 * ta * ta + 1.0), u);
}
inline Dual cot(const Dual& u) {
    const double co = 1.0 / std::tan(u.v), w = 1.0 + co * co;
    return chain(co, -w, 2.0 * co * w, u);
}
inline Dual csc(const Dual& u) {
    const double cs = 1.0 / std::sin(u.v), co = 1.0 / std::tan(u.v);
    return chain(cs, -cs * co, cs * (2.0 * co * co + 1.0), u);
}
inline Dual exp(const Dual& u) {
    const double e = std::exp(u.v);
    return chain(e, e, e, u);
}
inline Dual ln(const Dual& u) {
    const double iv = 1.0 / u.v;
    return chain(std::log(u.v), iv, -iv * iv, u);
}
inline Dual sqrt(const Dual& u) {
    const double r = std::sqrt(u.v);
    return chain(r, 0.5 / r, -0.25 / (r * u.v), u);
}
inline Dual tanh(const Dual& u) {
    const double th = std::tanh(u.v), w = 1.0 - th * th;
    return chain(th, w, -2.0 * th * w, u);
}
inline Dual atan(const Dual& u) {
    const double w = 1.0 / (1.0 + u.v * u.v);
    return chain(std::atan(u.v), w, -2.0 * u.v * w * w, u);
}
// |x| with subgradient 0 at the kink.
inline Dual abs(const Dual& u) {
    const double s = (u.v > 0.0) ? 1.0 : (u.v < 0.0 ? -1.0 : 0.0);
    return chain(std::abs(u.v), s, 0.0, u);
}

// Integer power by repeated multiplication; exact for negative bases.
constexpr Dual powi(Dual base, long long n) {
    if (n < 0) return recip(powi(base, -n));
    Dual acc = Dual::constant(1.0);
    while (n > 0) {
        if (n & 1) acc = acc * base;
        base = base * base;
        n >>= 1;
    }
    return acc;
}

}  // namespace h1geo
