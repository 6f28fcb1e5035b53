#pragma once

// First and second variation of horizontal perimeter under psi*X1 deformations
// of intrinsic graphs: the psi_k test-function family on strict strips, the
// closed-form kernel integral and k->infinity limits, instability searches,
// and a finite-difference perimeter oracle that cross-checks the formulas.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "h1geo/errors.hpp"
#include "h1geo/quadrature.hpp"
#include "h1geo/strips.hpp"
#include "h1geo/surfaces.hpp"

namespace h1geo {

namespace detail {

// C-infinity step: 0 for w <= 0, 1 for w >= 1, strictly increasing between.
inline double smooth_step(double w) {
    if (w <= 0.0) return 0.0;
    if (w >= 1.0) return 1.0;
    return 1.0 / (1.0 + std::exp(1.0 / w - 1.0 / (1.0 - w)));
}

inline double smooth_step_prime(double w) {
    if (w <= 0.0 || w >= 1.0) return 0.0;
    const double e = smooth_step(w);
    // e*(1-e) underflows to exactly 0 long before the rational factor can
    // overflow, so the product is safe on the whole open interval.
    return e * (1.0 - e) * (1.0 / ((1.0 - w) * (1.0 - w)) + 1.0 / (w * w));
}

}  // namespace detail

// Smooth even cutoff profile: chi = 1 on |x| <= delta, chi = 0 on |x| >= 2*delta,
// monotone C-infinity transition in between.
struct BumpSpec {
    double delta = 0.25;

    double chi(double x) const {
        if (!(delta > 0.0)) throw PreconditionError("cutoff width must be positive");
        return detail::smooth_step(2.0 - std::abs(x) / delta);
    }

    double chi_prime(double x) const {
        if (!(delta > 0.0)) throw PreconditionError("cutoff width must be positive");
        const double w = 2.0 - std::abs(x) / delta;
        const double dw = (x < 0.0 ? 1.0 : -1.0) / delta;
        return detail::smooth_step_prime(w) * dw;
    }
};

// Test function value together with its u-partial, in strip coordinates (u,s).
struct StripPsiValue {
    double psi = 0.0;
    double psi_u = 0.0;
};

using StripPsi = std::function<StripPsiValue(double u, double s)>;

// Scalar field with first partials on a planar (u,v) domain.
using PsiField = std::function<Grad2(double u, double v)>;

// Closed integration window in strip coordinates.
struct StripWindow {
    double u0 = 0.0, u1 = 0.0;
    double s0 = 0.0, s1 = 0.0;
};

// Region { u0 <= u <= u1, v_lo(u) <= v <= v_hi(u) } in intrinsic coordinates.
struct Band {
    double u0 = 0.0, u1 = 0.0;
    std::function<double(double)> v_lo, v_hi;

    static Band rect(double u0, double u1, double v0, double v1) {
        return {u0, u1, [v0](double) { return v0; }, [v1](double) { return v1; }};
    }
};

// closed form of the real-line integral of (A u^2 + B u + C)^{-2}
inline double kernel_integral(double A, double B, double C) {
    if (!(A > 0.0)) throw PreconditionError("kernel integral requires A > 0");
    const double disc = 4.0 * A * C - B * B;
    if (!(disc > 0.0)) throw PreconditionError("kernel integral requires 4AC - B^2 > 0");
    return 4.0 * std::numbers::pi * A / std::pow(disc, 1.5);
}

enum class StabilityVerdict { StableAtThisTest, Unstable };

// Totals below -kInstabilityThreshold certify instability; the margin keeps
// quadrature noise from flipping a zero.
inline constexpr double kInstabilityThreshold = 1e-9;

struct VariationReport {
    int k = 0;  // psi_k index when the test function is a psi_k, else 0
    double term1 = 0.0;  // gradient term, always >= 0
    double term2 = 0.0;  // potential term, <= 0 on strict strips
    double total = 0.0;
    double limit_prediction = std::numeric_limits<double>::quiet_NaN();
    StabilityVerdict verdict = StabilityVerdict::StableAtThisTest;

    bool unstable() const { return verdict == StabilityVerdict::Unstable; }
};

// psi_k(u,s) = chi(s - center) * chi(u/k) / sqrt(Q(u,s)) on a strict strip,
// Q = G'u^2/2 + F'u + sigma' > 0. The u-profile uses the requested width; the
// s-profile width is clamped so its support [center - 2*delta_s, center + 2*delta_s]
// stays strictly inside J (center is the midpoint of J).
class TestFunctionPsiK {
public:
    TestFunctionPsiK(StripData strip, BumpSpec bump, int k)
        : strip_(std::move(strip)), bump_(bump), k_(k) {
        if (k_ < 1) throw PreconditionError("psi_k index must be a positive integer");
        if (!(bump_.delta > 0.0)) throw PreconditionError("bump width must be positive");
        const Interval& J = strip_.J();
        center_ = J.mid();
        delta_s_ = std::min(bump_.delta, 0.25 * J.length() * 0.99);
    }

    StripPsiValue eval(double u, double s) const {
        const double cs = BumpSpec{delta_s_}.chi(s - center_);
        if (cs == 0.0) return {};
        const double cu = bump_.chi(u / k_);
        const double cup = bump_.chi_prime(u / k_) / k_;
        if (cu == 0.0 && cup == 0.0) return {};
        const Jet2_1 F = strip_.F()(s), G = strip_.G()(s), Sg = strip_.sigma()(s);
        const double Q = 0.5 * G.d * u * u + F.d * u + Sg.d;
        if (!(Q > 0.0))
            throw NumericalError("chart Jacobian not positive under psi_k (strip " +
                                 strip_.label() + ")");
        const double D = G.d * u + F.d;
        const double rQ = std::sqrt(Q);
        return {cs * cu / rQ, cs * (2.0 * cup * Q - cu * D) / (2.0 * Q * rQ)};
    }

    double value(double u, double s) const { return eval(u, s).psi; }

    // s-partial; needs second derivatives of the strip curves.
    double ds(double u, double s) const {
        if (!strip_.has_second())
            throw PreconditionError("psi_k s-derivative needs second derivatives of the strip (" +
                                    strip_.label() + ")");
        const BumpSpec sb{delta_s_};
        const double cs = sb.chi(s - center_);
        const double csp = sb.chi_prime(s - center_);
        if (cs == 0.0 && csp == 0.0) return 0.0;
        const double cu = bump_.chi(u / k_);
        if (cu == 0.0) return 0.0;
        const Jet2_1 F = strip_.F()(s), G = strip_.G()(s), Sg = strip_.sigma()(s);
        const double Q = 0.5 * G.d * u * u + F.d * u + Sg.d;
        if (!(Q > 0.0))
            throw NumericalError("chart Jacobian not positive under psi_k (strip " +
                                 strip_.label() + ")");
        const double Qs = 0.5 * G.dd * u * u + F.dd * u + Sg.dd;
        const double rQ = std::sqrt(Q);
        return csp * cu / rQ - cs * cu * Qs / (2.0 * Q * rQ);
    }

    // Support: {|u| <= 2 delta k} x {|s - center| <= 2 delta_s}, inside R x J.
    StripWindow support() const {
        return {-2.0 * bump_.delta * k_, 2.0 * bump_.delta * k_, center_ - 2.0 * delta_s_,
                center_ + 2.0 * delta_s_};
    }

    int k() const { return k_; }
    double delta_u() const { return bump_.delta; }
    double delta_s() const { return delta_s_; }
    double center() const { return center_; }
    const StripData& strip() const { return strip_; }

private:
    StripData strip_;
    BumpSpec bump_;
    int k_;
    double center_ = 0.0;
    double delta_s_ = 0.0;
};

inline StripPsi psi_k_strip_field(const TestFunctionPsiK& t) {
    return [t](double u, double s) { return t.eval(u, s); };
}

// Second variation in strip coordinates:
//   term1 = int (d_u psi)^2 Q / (1+G^2)^{3/2},
//   term2 = int psi^2 (F'^2 - 2 sigma' G') / ((1+G^2)^{3/2} Q),
// both over the window (s clipped to J).
inline VariationReport second_variation_strip(const StripData& d, const StripPsi& psi,
                                              const StripWindow& w, const QuadOptions& opts = {}) {
    const double s0 = std::max(w.s0, d.J().lo);
    const double s1 = std::min(w.s1, d.J().hi);
    if (!(s0 < s1) || !(w.u0 < w.u1)) throw PreconditionError("empty integration window");

    struct CurveSample {
        double s = std::numeric_limits<double>::quiet_NaN();
        double dF = 0.0, dG = 0.0, dSg = 0.0;
        double weight = 0.0;  // (1+G^2)^{-3/2}
        double strict = 0.0;  // F'^2 - 2 sigma' G'
    };
    CurveSample cache;
    auto at = [&](double s) -> const CurveSample& {
        if (!(cache.s == s)) {
            const Jet2_1 F = d.F()(s), G = d.G()(s), Sg = d.sigma()(s);
            cache = {s, F.d, G.d, Sg.d, std::pow(1.0 + G.f * G.f, -1.5),
                     F.d * F.d - 2.0 * Sg.d * G.d};
        }
        return cache;
    };
    auto jacobian = [](const CurveSample& c, double u) {
        return 0.5 * c.dG * u * u + c.dF * u + c.dSg;
    };

    auto f1 = [&](double s, double u) {
        const CurveSample& c = at(s);
        const StripPsiValue pv = psi(u, s);
        return pv.psi_u * pv.psi_u * jacobian(c, u) * c.weight;
    };
    const QuadResult r1 = integrate2(f1, s0, s1, w.u0, w.u1, opts);

    auto f2 = [&](double s, double u) {
        const CurveSample& c = at(s);
        const StripPsiValue pv = psi(u, s);
        if (pv.psi == 0.0) return 0.0;
        const double Q = jacobian(c, u);
        if (!(Q > 0.0))
            throw NumericalError("chart Jacobian not positive inside the integration window");
        return pv.psi * pv.psi * c.strict * c.weight / Q;
    };
    const QuadResult r2 = integrate2(f2, s0, s1, w.u0, w.u1, opts);

    VariationReport rep;
    rep.term1 = r1.value;
    rep.term2 = r2.value;
    rep.total = rep.term1 + rep.term2;
    rep.verdict = rep.total < -kInstabilityThreshold ? StabilityVerdict::Unstable
                                                     : StabilityVerdict::StableAtThisTest;
    return rep;
}

namespace detail {

// j = int chi(s-center)^2 (1+G^2)^{-3/2} G' (2 sigma' G' - F'^2)^{-1/2} ds over
// the s-support; the k->infinity limits of both terms are multiples of it.
inline double limit_integral(const StripData& d, const BumpSpec& b, const QuadOptions& opts) {
    const Interval& J = d.J();
    const double ds = std::min(b.delta, 0.25 * J.length() * 0.99);
    const double center = J.mid();
    const BumpSpec sb{ds};
    auto f = [&](double s) {
        const double chi = sb.chi(s - center);
        if (chi == 0.0) return 0.0;
        const Jet2_1 F = d.F()(s), G = d.G()(s), Sg = d.sigma()(s);
        const double pos = 2.0 * Sg.d * G.d - F.d * F.d;
        if (!(pos > 0.0) || !(G.d > 0.0))
            throw NumericalError("limit integrand undefined at s=" + std::to_string(s) +
                                 " (strip not strict with G' > 0)");
        return chi * chi * std::pow(1.0 + G.f * G.f, -1.5) * G.d / std::sqrt(pos);
    };
    return integrate(f, center - 2.0 * ds, center + 2.0 * ds, opts).value;
}

}  // namespace detail

// k->infinity limits of the two terms under psi_k; their ratio is -1/4.
struct PsiKLimits {
    double term1_limit = 0.0;  // +(pi/2) * j
    double term2_limit = 0.0;  // -2*pi * j
};

inline PsiKLimits psi_k_limits(const StripData& d, const BumpSpec& b,
                                const QuadOptions& opts = {}) {
    const double j = detail::limit_integral(d, b, opts);
    return {0.5 * std::numbers::pi * j, -2.0 * std::numbers::pi * j};
}

// Limit of the full second variation under psi_k: -(3*pi/2) * j, negative for
// every strict strip, which is what forces instability at finite k.
inline double instability_limit(const StripData& d, const BumpSpec& b,
                                const QuadOptions& opts = {}) {
    const PsiKLimits l = psi_k_limits(d, b, opts);
    return l.term1_limit + l.term2_limit;
}

struct InstabilitySearchResult {
    std::vector<VariationReport> reports;  // k = 1, 2, 4, ... in order
    int witness_k = -1;  // smallest tested k whose total is negative, -1 if none
    double limit = std::numeric_limits<double>::quiet_NaN();

    bool found() const { return witness_k >= 1; }
};

// Doubling sweep k = 1,2,4,...,k_max. Stops at the first negative total.
// Without a witness, the last three totals must close in on the limit;
// otherwise the sweep is diagnosed as a numerical failure.
inline InstabilitySearchResult instability_search(const StripData& d, const BumpSpec& b,
                                                  int k_max = 256,
                                                  const QuadOptions& opts = {}) {
    if (k_max < 1) throw PreconditionError("k_max must be a positive integer");
    InstabilitySearchResult res;
    res.limit = instability_limit(d, b, opts);
    for (int k = 1;; k *= 2) {
        const TestFunctionPsiK t(d, b, k);
        VariationReport rep = second_variation_strip(d, psi_k_strip_field(t), t.support(), opts);
        rep.k = k;
        rep.limit_prediction = res.limit;
        res.reports.push_back(rep);
        if (rep.unstable()) {
            res.witness_k = k;
            return res;
        }
        if (k > k_max / 2) break;
    }
    const std::size_t n = res.reports.size();
    if (n >= 3) {
        auto gap = [&](std::size_t i) { return std::abs(res.reports[i].total - res.limit); };
        if (gap(n - 3) > gap(n - 2) && gap(n - 2) > gap(n - 1)) return res;
    }
    throw NumericalError("instability search exhausted k_max=" + std::to_string(k_max) +
                         " without negativity or a decreasing gap toward the limit");
}

namespace detail {

inline void require_minimal(const IntrinsicGraph& s, const Band& region) {
    constexpr int N = 32;
    for (int i = 0; i <= N; ++i) {
        const double u = region.u0 + (region.u1 - region.u0) * i / N;
        const double lo = region.v_lo(u), hi = region.v_hi(u);
        for (int j = 0; j <= N; ++j) {
            const double v = lo + (hi - lo) * j / N;
            const double r = s.minimality_residual(u, v);
            if (!(std::abs(r) <= 1e-6))
                throw PreconditionError("surface is not minimal on the region (residual " +
                                        std::to_string(r) + " at u=" + std::to_string(u) +
                                        ", v=" + std::to_string(v) + ")");
        }
    }
}

}  // namespace detail

// Second variation on an intrinsic graph, B = phi_u + phi*phi_v:
//   term1 = int (psi_u + phi psi_v)^2 (1+B^2)^{-3/2},
//   term2 = -int psi^2 (2 B_v - phi_v^2) (1+B^2)^{-3/2}.
// The graph must be minimal on the region and expose second derivatives.
inline VariationReport second_variation_intrinsic(const IntrinsicGraph& s, const PsiField& psi,
                                                  const Band& region,
                                                  const QuadOptions& opts = {}) {
    if (!s.has_jet2())
        throw PreconditionError("second variation needs second derivatives of the graph");
    detail::require_minimal(s, region);

    auto f1 = [&](double u, double v) {
        const Grad2 p = psi(u, v);
        const Grad2 j = s.jet1(u, v);
        const double B = j.fu + j.f * j.fv;
        const double Bpsi = p.fu + j.f * p.fv;
        return Bpsi * Bpsi * std::pow(1.0 + B * B, -1.5);
    };
    const QuadResult r1 = integrate2(f1, region.u0, region.u1, region.v_lo, region.v_hi, opts);

    auto f2 = [&](double u, double v) {
        const Grad2 p = psi(u, v);
        if (p.f == 0.0) return 0.0;
        const Jet2_2 j = s.jet2(u, v);
        const double B = j.fu + j.f * j.fv;
        const double Bv = j.fuv + j.fv * j.fv + j.f * j.fvv;
        return -(p.f * p.f) * (2.0 * Bv - j.fv * j.fv) * std::pow(1.0 + B * B, -1.5);
    };
    const QuadResult r2 = integrate2(f2, region.u0, region.u1, region.v_lo, region.v_hi, opts);

    VariationReport rep;
    rep.term1 = r1.value;
    rep.term2 = r2.value;
    rep.total = rep.term1 + rep.term2;
    rep.verdict = rep.total < -kInstabilityThreshold ? StabilityVerdict::Unstable
                                                     : StabilityVerdict::StableAtThisTest;
    return rep;
}

// psi_k as a field on the (u,v) chart image: psi(u,v) = psi_k(u, s(u,v)).
// Valid only on the chart; needs the strip's second derivatives.
inline PsiField psi_k_pullback(const TestFunctionPsiK& t) {
    if (!t.strip().has_second())
        throw PreconditionError("psi_k pullback needs second derivatives of the strip (" +
                                t.strip().label() + ")");
    return [t](double u, double v) {
        const StripChartJets j = strip_chart_jet1(t.strip(), u, v);
        const StripPsiValue pv = t.eval(u, j.s);
        const double ps = t.ds(u, j.s);
        return Grad2{pv.psi, pv.psi_u + ps * j.su, ps * j.sv};
    };
}

// Support of the pulled-back psi_k in (u,v): the chart image of its window.
inline Band psi_k_band(const TestFunctionPsiK& t) {
    const StripWindow w = t.support();
    const StripData d = t.strip();
    return {w.u0, w.u1, [d, s = w.s0](double u) { return psi_map(d, u, s).y; },
            [d, s = w.s1](double u) { return psi_map(d, u, s).y; }};
}

// The pointwise second difference carries a rounding-noise floor of roughly
// eps/lambda^2 ~ 1e-9, so tolerances must sit above it or the adaptive
// subdivision chases noise. The absolute floor also keeps the near-zero first
// difference of a minimal surface from demanding unreachable relative accuracy.
inline QuadOptions fd_quad_defaults() {
    QuadOptions o;
    o.rel_tol = 1e-5;
    o.abs_tol = 1e-8;
    return o;
}

// Central second difference of the perimeter integrand in lambda, applied
// pointwise under the integral, with one Richardson step (lambda, lambda/2).
inline double fd_second_variation(const IntrinsicGraph& s, const PsiField& psi,
                                  const Band& region, double lambda_step = 1e-3,
                                  const QuadOptions& opts = fd_quad_defaults()) {
    if (!(lambda_step > 0.0)) throw PreconditionError("lambda_step must be positive");
    const double l = lambda_step;
    auto combo = [&](double u, double v) {
        const Grad2 j = s.jet1(u, v);
        const Grad2 p = psi(u, v);
        auto f = [&](double lam) {
            const double B = (j.fu + lam * p.fu) + (j.f + lam * p.f) * (j.fv + lam * p.fv);
            return std::sqrt(1.0 + B * B);
        };
        const double f0 = f(0.0);
        const double full = (f(l) - 2.0 * f0 + f(-l)) / (l * l);
        const double half = (f(0.5 * l) - 2.0 * f0 + f(-0.5 * l)) / (0.25 * l * l);
        return (4.0 * half - full) / 3.0;
    };
    return integrate2(combo, region.u0, region.u1, region.v_lo, region.v_hi, opts).value;
}

// Central first difference, same pointwise treatment; vanishes on minimal graphs.
inline double fd_first_variation(const IntrinsicGraph& s, const PsiField& psi, const Band& region,
                                 double lambda_step = 1e-3,
                                 const QuadOptions& opts = fd_quad_defaults()) {
    if (!(lambda_step > 0.0)) throw PreconditionError("lambda_step must be positive");
    const double l = lambda_step;
    auto combo = [&](double u, double v) {
        const Grad2 j = s.jet1(u, v);
        const Grad2 p = psi(u, v);
        auto f = [&](double lam) {
            const double B = (j.fu + lam * p.fu) + (j.f + lam * p.f) * (j.fv + lam * p.fv);
            return std::sqrt(1.0 + B * B);
        };
        const double full = (f(l) - f(-l)) / (2.0 * l);
        const double half = (f(0.5 * l) - f(-0.5 * l)) / l;
        return (4.0 * half - full) / 3.0;
    };
    return integrate2(combo, region.u0, region.u1, region.v_lo, region.v_hi, opts).value;
}

namespace detail {

// Cubic B-spline bump on [-2,2]: C^2, value 2/3 at 0.
inline double cubic_bump(double x) {
    const double a = std::abs(x);
    if (a >= 2.0) return 0.0;
    if (a <= 1.0) return (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
    const double w = 2.0 - a;
    return w * w * w / 6.0;
}

inline double cubic_bump_prime(double x) {
    const double a = std::abs(x);
    if (a >= 2.0) return 0.0;
    const double sign = x < 0.0 ? -1.0 : 1.0;
    if (a <= 1.0) return sign * a * (1.5 * a - 2.0);
    const double w = 2.0 - a;
    return sign * (-0.5 * w * w);
}

inline double numeric_derivative(const std::function<double(double)>& f, double x) {
    const double h = 1e-6 * (1.0 + std::abs(x));
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace detail

struct BasisSpec {
    int n = 16;  // n x n tensor grid of bumps
};

struct GenericSearchResult {
    double minimum = 0.0;  // smallest Rayleigh quotient found
    int n = 0;
    std::vector<double> coefficients;  // row-major (i*n + j), unit Euclidean norm
    int iterations = 0;
    StabilityVerdict verdict = StabilityVerdict::StableAtThisTest;

    bool unstable() const { return verdict == StabilityVerdict::Unstable; }
};

// Assembles the second-variation quadratic form over an n x n tensor grid of
// C^2 bumps spanning the region (sheared to follow the band edges) and
// minimizes the Rayleigh quotient by shifted inverse-power iteration.
inline GenericSearchResult generic_instability_search(const IntrinsicGraph& s, const Band& region,
                                                      const BasisSpec& basis = {}) {
    const int n = basis.n;
    if (n < 2) throw PreconditionError("basis grid needs n >= 2");
    if (!s.has_jet2())
        throw PreconditionError("generic search needs second derivatives of the graph");
    detail::require_minimal(s, region);

    const int cells = n + 3;
    const double hu = (region.u1 - region.u0) / cells;
    const double ht = 1.0 / cells;
    if (!(hu > 0.0)) throw PreconditionError("empty region");

    // 4-point Gauss-Legendre on [0,1].
    static constexpr double gx[4] = {0.069431844202973712, 0.33000947820757187,
                                     0.66999052179242813, 0.93056815579702629};
    static constexpr double gw[4] = {0.17392742256872693, 0.32607257743127307,
                                     0.32607257743127307, 0.17392742256872693};

    struct Active {
        int idx;
        double b, bp;
    };
    // 1-D bump values at x for the grid {start + (i+2)h}; at most 4 are nonzero.
    auto collect = [](double x, double start, double h, int count, Active out[4]) {
        const double rel = (x - start) / h;
        const int first = static_cast<int>(std::floor(rel)) - 3;
        int m = 0;
        for (int i = std::max(first, 0); i <= std::min(first + 3, count - 1); ++i) {
            const double arg = rel - (i + 2);
            const double b = detail::cubic_bump(arg);
            const double bp = detail::cubic_bump_prime(arg) / h;
            if (b != 0.0 || bp != 0.0) out[m++] = {i, b, bp};
        }
        while (m < 4) out[m++] = {-1, 0.0, 0.0};
        return;
    };

    const int N = n * n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    double psi_p[16], bpsi_p[16];
    int index_p[16];

    for (int cu = 0; cu < cells; ++cu) {
        for (int gu = 0; gu < 4; ++gu) {
            const double u = region.u0 + (cu + gx[gu]) * hu;
            Active au[4];
            collect(u, region.u0, hu, n, au);
            const double vlo = region.v_lo(u), vhi = region.v_hi(u);
            const double dv = vhi - vlo;
            if (!(dv > 0.0)) throw PreconditionError("region bands must have positive height");
            const double dlo = detail::numeric_derivative(region.v_lo, u);
            const double dhi = detail::numeric_derivative(region.v_hi, u);
            for (int ct = 0; ct < cells; ++ct) {
                for (int gt = 0; gt < 4; ++gt) {
                    const double tau = (ct + gx[gt]) * ht;
                    Active at[4];
                    collect(tau, 0.0, ht, n, at);
                    const double v = vlo + tau * dv;
                    const double weight = gw[gu] * hu * gw[gt] * ht * dv;
                    const Jet2_2 jet = s.jet2(u, v);
                    const double B = jet.fu + jet.f * jet.fv;
                    const double K1 = std::pow(1.0 + B * B, -1.5);
                    const double Bv = jet.fuv + jet.fv * jet.fv + jet.f * jet.fvv;
                    const double K2 = (2.0 * Bv - jet.fv * jet.fv) * K1;
                    const double tau_u = -(dlo + tau * (dhi - dlo)) / dv;
                    const double tau_v = 1.0 / dv;

                    int m = 0;
                    for (int a = 0; a < 4; ++a) {
                        if (au[a].idx < 0) continue;
                        for (int b = 0; b < 4; ++b) {
                            if (at[b].idx < 0) continue;
                            const double psi = au[a].b * at[b].b;
                            const double psi_u = au[a].bp * at[b].b + au[a].b * at[b].bp * tau_u;
                            const double psi_v = au[a].b * at[b].bp * tau_v;
                            index_p[m] = au[a].idx * n + at[b].idx;
                            psi_p[m] = psi;
                            bpsi_p[m] = psi_u + jet.f * psi_v;
                            ++m;
                        }
                    }
                    for (int a = 0; a < m; ++a) {
                        for (int b = 0; b < m; ++b) {
                            A(index_p[a], index_p[b]) +=
                                weight * (K1 * bpsi_p[a] * bpsi_p[b] - K2 * psi_p[a] * psi_p[b]);
                        }
                    }
                }
            }
        }
    }

    A = 0.5 * (A + A.transpose()).eval();

    // Gershgorin lower bound keeps the shift strictly below the spectrum, so
    // the shifted matrix is positive definite and LDLT is safe.
    double lb = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i)
        lb = std::min(lb, A(i, i) - (A.row(i).cwiseAbs().sum() - std::abs(A(i, i))));
    double shift = lb - std::max(1e-8, 1e-8 * std::abs(lb));
    const double step = std::max(1e-6, 1e-3 * std::abs(shift));

    Eigen::VectorXd x = Eigen::VectorXd::Ones(N);
    x.normalize();
    double quotient = x.dot(A * x);
    int iterations = 0;
    bool converged = false;
    bool ever_iterated = false;
    for (int attempt = 0; attempt < 6 && !converged; ++attempt) {
        Eigen::MatrixXd M = A;
        M.diagonal().array() -= shift;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success) {
            shift -= step;
            continue;
        }
        bool stalled = false;
        while (iterations < 200) {
            const Eigen::VectorXd y = ldlt.solve(x);
            ++iterations;
            if (!y.allFinite() || !(y.norm() > 0.0)) {
                stalled = true;
                break;
            }
            ever_iterated = true;
            x = y / y.norm();
            const double next = x.dot(A * x);
            if (std::abs(next - quotient) <= 1e-8 * std::max(1.0, std::abs(next))) {
                quotient = next;
                converged = true;
                break;
            }
            quotient = next;
        }
        if (stalled) {
            shift -= step;
            continue;
        }
        break;  // converged, or cap reached with a valid Rayleigh quotient in hand
    }
    if (!ever_iterated)
        throw NumericalError("inverse-power iteration failed: ill-conditioned quadratic form");

    GenericSearchResult res;
    res.minimum = quotient;
    res.n = n;
    res.coefficients.assign(x.data(), x.data() + N);
    res.iterations = iterations;
    res.verdict = quotient < -kInstabilityThreshold ? StabilityVerdict::Unstable
                                                    : StabilityVerdict::StableAtThisTest;
    return res;
}

}  // namespace h1geo
