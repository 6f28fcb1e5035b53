#pragma once

// Seed curves and intrinsic graphical strips. A strip is the data
// (J, F, G, sigma): over s in J the surface is charted by
//
//   Psi(u, s) = (u, v(u, s)),   v(u, s) = G(s) u^2/2 + F(s) u + sigma(s),
//
// and the graph function is phi(u, v) = F(s(u,v)) + u G(s(u,v)). The strict
// condition F'^2 - 2 sigma' G' < 0 makes the fiber Jacobian
// Q = G' u^2/2 + F' u + sigma' a positive definite quadratic in u, so s(u,v)
// is globally well defined and the charted surface is an everywhere minimal
// intrinsic graph.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>

#include "h1geo/errors.hpp"
#include "h1geo/expr.hpp"
#include "h1geo/surfaces.hpp"

namespace h1geo {

// ---- scalar curves -------------------------------------------------------

// A C^2 function of one variable with optional second derivative. Seed-derived
// curves only carry first derivatives (their second would need a third
// derivative of the seed).
struct ScalarCurve {
    std::function<Jet2_1(double)> jet;
    bool has_second = true;
    std::string label;

    Jet2_1 operator()(double s) const { return jet(s); }
};

inline ScalarCurve scalar_curve_from_expression(const Expression& e) {
    for (const auto& v : e.free_variables())
        if (v != "s") throw ConfigError("curve expression may only use s, found \"" + v + "\"");
    ScalarCurve c;
    c.jet = [e](double s) { return eval_jet2(e, Bindings{{"s", s}}, "s"); };
    c.has_second = true;
    c.label = e.to_string();
    return c;
}

inline ScalarCurve reflect(const ScalarCurve& c) {
    ScalarCurve r;
    r.jet = [inner = c.jet](double s) {
        Jet2_1 j = inner(-s);
        return Jet2_1{j.f, -j.d, j.dd};
    };
    r.has_second = c.has_second;
    r.label = c.label + " reflected";
    return r;
}

// ---- seed curves -----------------------------------------------------------

// Unit-speed planar curve gamma with a height function h0; the associated
// ruled surface is L(r, s) = (gamma + r (gamma')^perp, h0 - (r/2) gamma.gamma')
// with (a,b)^perp = (b,-a).
class SeedCurve {
  public:
    struct Jets {
        Vec2 gamma, d, dd;
    };

    static SeedCurve from_expressions(const Expression& g1, const Expression& g2,
                                      const Expression& h0, Interval I) {
        for (const Expression* e : {&g1, &g2, &h0})
            for (const auto& v : e->free_variables())
                if (v != "s")
                    throw ConfigError("seed expression may only use s, found \"" + v + "\"");
        auto gamma = [g1, g2](double s) {
            Jet2_1 a = eval_jet2(g1, Bindings{{"s", s}}, "s");
            Jet2_1 b = eval_jet2(g2, Bindings{{"s", s}}, "s");
            return Jets{{a.f, b.f}, {a.d, b.d}, {a.dd, b.dd}};
        };
        auto height = [h0](double s) { return eval_jet2(h0, Bindings{{"s", s}}, "s"); };
        return SeedCurve(std::move(gamma), std::move(height), I,
                         "(" + g1.to_string() + ", " + g2.to_string() + ")");
    }

    static SeedCurve from_callables(std::function<Jets(double)> gamma,
                                    std::function<Jet2_1(double)> h0, Interval I,
                                    std::string label) {
        return SeedCurve(std::move(gamma), std::move(h0), I, std::move(label));
    }

    Jets gamma_jets(double s) const { return impl_->gamma(s); }
    Jet2_1 h0_jets(double s) const { return impl_->h0(s); }
    const Interval& interval() const { return impl_->I; }
    const std::string& label() const { return impl_->label; }

  private:
    struct Impl {
        std::function<Jets(double)> gamma;
        std::function<Jet2_1(double)> h0;
        Interval I;
        std::string label;
    };
    std::shared_ptr<const Impl> impl_;

    SeedCurve(std::function<Jets(double)> gamma, std::function<Jet2_1(double)> h0, Interval I,
              std::string label) {
        auto impl = std::make_shared<Impl>();
        impl->gamma = std::move(gamma);
        impl->h0 = std::move(h0);
        impl->I = I;
        impl->label = std::move(label);
        impl_ = impl;
        // Unit-speed certificate on a 1024-cell grid, endpoints included.
        for (int i = 0; i <= 1024; ++i) {
            const double s = I.lo + I.length() * i / 1024.0;
            const Jets j = impl_->gamma(s);
            const double speed = std::hypot(j.d.x, j.d.y);
            if (std::abs(speed - 1.0) > 1e-8)
                throw PreconditionError("seed curve is not unit speed at s = " +
                                        std::to_string(s) + " (|gamma'| = " +
                                        std::to_string(speed) + ")");
        }
    }
};

// Pointwise invariants of a seed: W0 = h0' + (1/2) gamma'.gamma^perp, the
// planar curvature kappa, and the ruled-surface characteristic quantity
// 1 - 2 W0 kappa (negative means the ruled patch around s is noncharacteristic).
struct SeedQuantities {
    double W0 = 0.0;
    double kappa = 0.0;
    double one_minus_2W0kappa = 0.0;
};

inline SeedQuantities seed_quantities(const SeedCurve& c, double s) {
    SeedCurve::Jets j = c.gamma_jets(s);
    Jet2_1 h = c.h0_jets(s);
    SeedQuantities q;
    // gamma'.gamma^perp with gamma^perp = (gamma2, -gamma1).
    q.W0 = h.d + 0.5 * (j.d.x * j.gamma.y - j.d.y * j.gamma.x);
    // kappa = gamma''.(gamma')^perp.
    q.kappa = j.dd.x * j.d.y - j.dd.y * j.d.x;
    q.one_minus_2W0kappa = 1.0 - 2.0 * q.W0 * q.kappa;
    return q;
}

// Strip data induced by a seed where the chart is graph-like (|gamma1'| away
// from zero): F = gamma.gamma'/gamma1', G = -gamma2'/gamma1',
// sigma = h0 - (1/2) gamma2 F. First derivatives follow by the quotient rule;
// second derivatives would need gamma''' and are not available.
struct SeedStripJets {
    Jet2_1 F, G, sigma;
    double gamma1_prime = 0.0;
};

inline SeedStripJets seed_strip_jets(const SeedCurve& c, double s) {
    SeedCurve::Jets j = c.gamma_jets(s);
    Jet2_1 h = c.h0_jets(s);
    const double g1p = j.d.x;
    if (std::abs(g1p) < 1e-6)
        throw OutOfDomainError("seed chart degenerates: |gamma1'| < 1e-6 at s = " +
                               std::to_string(s));
    const double gg = j.gamma.x * j.d.x + j.gamma.y * j.d.y;        // gamma.gamma'
    const double speed2 = j.d.x * j.d.x + j.d.y * j.d.y;            // |gamma'|^2
    const double ggp = speed2 + j.gamma.x * j.dd.x + j.gamma.y * j.dd.y;  // (gamma.gamma')'
    SeedStripJets out;
    out.gamma1_prime = g1p;
    out.F = {gg / g1p, (ggp * g1p - gg * j.dd.x) / (g1p * g1p),
             std::numeric_limits<double>::quiet_NaN()};
    out.G = {-j.d.y / g1p, -(j.dd.y * g1p - j.d.y * j.dd.x) / (g1p * g1p),
             std::numeric_limits<double>::quiet_NaN()};
    out.sigma = {h.f - 0.5 * j.gamma.y * out.F.f,
                 h.d - 0.5 * (j.d.y * out.F.f + j.gamma.y * out.F.d),
                 std::numeric_limits<double>::quiet_NaN()};
    return out;
}

// ---- strip data ------------------------------------------------------------

// Raw (unvalidated) strip data.
struct StripSpec {
    Interval J;
    ScalarCurve F, G, sigma;
    std::string label;
};

inline StripSpec strip_spec_from_expressions(const Expression& F, const Expression& G,
                                             const Expression& sigma, Interval J) {
    StripSpec spec;
    spec.J = J;
    spec.F = scalar_curve_from_expression(F);
    spec.G = scalar_curve_from_expression(G);
    spec.sigma = scalar_curve_from_expression(sigma);
    spec.label = "(" + spec.F.label + ", " + spec.G.label + ", " + spec.sigma.label + ")";
    return spec;
}

// Largest subinterval of the seed's parameter range where |gamma1'| >= 1e-6 on
// a 1024-cell grid, shrunk by 1% on each side.
inline Interval seed_chart_window(const SeedCurve& c) {
    const Interval I = c.interval();
    const int n = 1024;
    int best_lo = -1, best_len = 0, run_lo = -1, run_len = 0;
    for (int i = 0; i <= n; ++i) {
        const double s = I.lo + I.length() * i / n;
        if (std::abs(c.gamma_jets(s).d.x) >= 1e-6) {
            if (run_len == 0) run_lo = i;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_lo = run_lo;
            }
        } else {
            run_len = 0;
        }
    }
    if (best_len < 2)
        throw PreconditionError("seed chart window: |gamma1'| < 1e-6 across the parameter range");
    double lo = I.lo + I.length() * best_lo / n;
    double hi = I.lo + I.length() * (best_lo + best_len - 1) / n;
    const double margin = 0.01 * (hi - lo);
    return {lo + margin, hi - margin};
}

inline StripSpec strip_spec_from_seed(const SeedCurve& c) {
    Interval J = seed_chart_window(c);
    StripSpec spec;
    spec.J = J;
    spec.F = {[c](double s) { return seed_strip_jets(c, s).F; }, false, "seed F"};
    spec.G = {[c](double s) { return seed_strip_jets(c, s).G; }, false, "seed G"};
    spec.sigma = {[c](double s) { return seed_strip_jets(c, s).sigma; }, false, "seed sigma"};
    spec.label = "seed " + c.label();
    return spec;
}

// Strict-strip quantity F'^2 - 2 sigma' G'; negative throughout J makes the
// data a strict strip.
inline double strict_condition(const StripSpec& spec, double s) {
    const double dF = spec.F(s).d;
    const double dG = spec.G(s).d;
    const double dsig = spec.sigma(s).d;
    return dF * dF - 2.0 * dsig * dG;
}

namespace detail {
inline StripSpec reflect_spec(const StripSpec& spec) {
    StripSpec r;
    r.J = {-spec.J.hi, -spec.J.lo};
    r.F = reflect(spec.F);
    r.G = reflect(spec.G);
    r.sigma = reflect(spec.sigma);
    r.label = spec.label + " reflected";
    return r;
}
}  // namespace detail

// Validated strip: strict on a 1024-cell grid (endpoints included) and
// oriented so G' > 0 (reflecting s -> -s if needed).
class StripData {
  public:
    static StripData create(StripSpec spec) {
        check_strict(spec);
        bool reflected = false;
        const int n = 1024;
        int sign = 0;
        for (int i = 0; i <= n; ++i) {
            const double s = spec.J.lo + spec.J.length() * i / n;
            const double dG = spec.G(s).d;
            const int here = dG > 0.0 ? 1 : (dG < 0.0 ? -1 : 0);
            if (here == 0)
                throw PreconditionError("strip orientation: G' vanishes at s = " +
                                        std::to_string(s));
            if (sign == 0) sign = here;
            if (here != sign)
                throw PreconditionError("strip orientation: G' changes sign inside J");
        }
        if (sign < 0) {
            spec = detail::reflect_spec(spec);
            reflected = true;
        }
        return StripData(std::move(spec), reflected);
    }

    const Interval& J() const { return spec_.J; }
    const ScalarCurve& F() const { return spec_.F; }
    const ScalarCurve& G() const { return spec_.G; }
    const ScalarCurve& sigma() const { return spec_.sigma; }
    bool reflected() const { return reflected_; }
    bool has_second() const {
        return spec_.F.has_second && spec_.G.has_second && spec_.sigma.has_second;
    }
    const std::string& label() const { return spec_.label; }

    // Worst (largest) strict-condition value over the validation grid.
    double strict_upper_bound() const {
        double worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 1024; ++i) {
            const double s = spec_.J.lo + spec_.J.length() * i / 1024.0;
            worst = std::max(worst, strict_condition(spec_, s));
        }
        return worst;
    }

    const StripSpec& spec() const { return spec_; }

  private:
    StripSpec spec_;
    bool reflected_;

    StripData(StripSpec spec, bool reflected) : spec_(std::move(spec)), reflected_(reflected) {}

    static void check_strict(const StripSpec& spec) {
        if (!(spec.J.length() > 0.0))
            throw PreconditionError("strip interval is empty");
        const int n = 1024;
        for (int i = 0; i <= n; ++i) {
            const double s = spec.J.lo + spec.J.length() * i / n;
            const double val = strict_condition(spec, s);
            if (!(val < 0.0))
                throw PreconditionError("strip data is not strict: F'^2 - 2 sigma' G' = " +
                                        std::to_string(val) + " at s = " + std::to_string(s));
        }
    }
};

inline double strict_condition(const StripData& d, double s) {
    return strict_condition(d.spec(), s);
}

// ---- chart operations -------------------------------------------------------

inline Vec2 psi_map(const StripData& d, double u, double s) {
    if (!d.J().contains(s)) throw OutOfDomainError("psi_map: s outside the strip interval");
    return {u, 0.5 * d.G()(s).f * u * u + d.F()(s).f * u + d.sigma()(s).f};
}

// dv/ds at fixed u; positive definite in u on a strict oriented strip.
inline double psi_jacobian(const StripData& d, double u, double s) {
    if (!d.J().contains(s)) throw OutOfDomainError("psi_jacobian: s outside the strip interval");
    return 0.5 * d.G()(s).d * u * u + d.F()(s).d * u + d.sigma()(s).d;
}

// Solve v(u, s) = v for s in J; v(u, .) is strictly increasing since the
// jacobian Q is positive. Safeguarded Newton with a bisection fallback.
inline double invert_s(const StripData& d, double u, double v) {
    const Interval& J = d.J();
    auto value = [&](double s) {
        return 0.5 * d.G()(s).f * u * u + d.F()(s).f * u + d.sigma()(s).f - v;
    };
    double lo = J.lo, hi = J.hi;
    double flo = value(lo), fhi = value(hi);
    const double vscale = std::max({1.0, std::abs(v), std::abs(flo + v), std::abs(fhi + v)});
    if (flo > 0.0 || fhi < 0.0) {
        if (std::abs(flo) <= 1e-12 * vscale) return lo;
        if (std::abs(fhi) <= 1e-12 * vscale) return hi;
        throw OutOfDomainError("invert_s: point (u, v) is outside the strip image");
    }
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double r = value(s);
        if (std::abs(r) <= 1e-14 * vscale) return s;
        if (r > 0.0)
            hi = s;
        else
            lo = s;
        const double q = psi_jacobian(d, u, s);
        double next = (q > 0.0) ? s - r / q : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) < 1e-16 * (1.0 + std::abs(s))) return next;
        s = next;
    }
    return s;
}

inline double strip_phi(const StripData& d, double u, double v) {
    const double s = invert_s(d, u, v);
    return d.F()(s).f + u * d.G()(s).f;
}

// Graph chart -> group coordinates: (u, v) on the vertical plane lifts to
// (phi, u, v - u phi / 2).
inline HeisenbergPoint embed(const StripData& d, double u, double v) {
    const double phi = strip_phi(d, u, v);
    return {phi, u, v - 0.5 * u * phi};
}

// Projection onto the vertical plane {x = 0} along the graph direction:
// (x,y,t) -> (u, v) = (y, t + x y / 2).
inline Vec2 intrinsic_projection(const HeisenbergPoint& p) {
    return {p.y, p.t + 0.5 * p.x * p.y};
}

// First and second derivatives of s(u, v) and phi(u, v) through the chart via
// the implicit function theorem. Second derivatives require curve second
// derivatives (expression-backed strips).
struct StripChartJets {
    double s = 0.0;
    double su = 0.0, sv = 0.0;
    double phi = 0.0, phiu = 0.0, phiv = 0.0;
    double Q = 0.0;
};

inline StripChartJets strip_chart_jet1(const StripData& d, double u, double v) {
    StripChartJets out;
    out.s = invert_s(d, u, v);
    const Jet2_1 F = d.F()(out.s), G = d.G()(out.s), S = d.sigma()(out.s);
    const double P = G.f * u + F.f;                       // dv/du at fixed s
    out.Q = 0.5 * G.d * u * u + F.d * u + S.d;
    out.su = -P / out.Q;
    out.sv = 1.0 / out.Q;
    const double A = F.d + u * G.d;
    out.phi = F.f + u * G.f;
    out.phiu = A * out.su + G.f;
    out.phiv = A * out.sv;
    return out;
}

inline Jet2_2 strip_chart_jet2(const StripData& d, double u, double v) {
    if (!d.has_second())
        throw PreconditionError("strip chart second jet needs curve second derivatives (" +
                                d.label() + ")");
    const double s = invert_s(d, u, v);
    const Jet2_1 F = d.F()(s), G = d.G()(s), S = d.sigma()(s);
    const double Q = 0.5 * G.d * u * u + F.d * u + S.d;
    const double P = G.f * u + F.f;
    const double su = -P / Q, sv = 1.0 / Q;
    const double A = F.d + u * G.d;
    const double vuu = G.f;
    const double vus = A;
    const double vss = 0.5 * G.dd * u * u + F.dd * u + S.dd;
    const double suu = -(vuu + 2.0 * vus * su + vss * su * su) / Q;
    const double suv = -(vus + vss * su) * sv / Q;
    const double svv = -vss * sv * sv / Q;
    const double ddFG = F.dd + u * G.dd;
    Jet2_2 j;
    j.f = F.f + u * G.f;
    j.fu = A * su + G.f;
    j.fv = A * sv;
    j.fuu = ddFG * su * su + A * suu + 2.0 * G.d * su;
    j.fuv = ddFG * su * sv + A * suv + G.d * sv;
    j.fvv = ddFG * sv * sv + A * svv;
    return j;
}

// Whether (u, v) is in the strip image (s(u,v) lands inside J).
inline bool strip_contains(const StripData& d, double u, double v) {
    try {
        invert_s(d, u, v);
        return true;
    } catch (const OutOfDomainError&) {
        return false;
    }
}

// The strip as an intrinsic graph. B_phi(phi) = G(s) exactly, and the
// minimality residual G'(s) (s_u + phi s_v) vanishes identically; for
// expression-backed strips the residual is instead computed from the full
// second jet so that it exercises the chart derivatives.
inline IntrinsicGraph make_intrinsic_graph(const StripData& d) {
    IntrinsicGraph::Backend be;
    be.jet1 = [d](double u, double v) {
        StripChartJets j = strip_chart_jet1(d, u, v);
        return Grad2{j.phi, j.phiu, j.phiv};
    };
    if (d.has_second()) {
        be.jet2 = [d](double u, double v) { return strip_chart_jet2(d, u, v); };
    } else {
        // Exact reduction for seed-backed strips.
        be.residual = [d](double u, double v) {
            StripChartJets j = strip_chart_jet1(d, u, v);
            return d.G()(j.s).d * (j.su + j.phi * j.sv);
        };
    }
    be.burgers = [d](double u, double v) { return d.G()(invert_s(d, u, v)).f; };
    be.contains = [d](double u, double v) { return strip_contains(d, u, v); };
    be.kind = "strip " + d.label();
    return IntrinsicGraph::from_backend(std::move(be));
}

// ---- the catenoid strip ------------------------------------------------------

// Ruled minimal catenoid patch as a strict strip: F = sec s, G = tan s,
// sigma = tan(s)/2 on J = (-eps, eps), eps < pi/4. The patch is an intrinsic
// graph over |v| < cot(eps)/2 (safe_halfwidth). Chart-coordinate injectivity
// is verified on a pair grid; a violating pair is reported.
struct CatenoidStrip {
    StripData data;
    double safe_halfwidth = 0.0;
};

inline CatenoidStrip catenoid_strip(double eps) {
    if (!(eps > 0.0 && eps < 0.25 * std::numbers::pi))
        throw PreconditionError("catenoid_strip: eps must lie in (0, pi/4)");
    StripSpec spec = strip_spec_from_expressions(
        parse_expression("sec(s)"), parse_expression("tan(s)"), parse_expression("tan(s)/2"),
        Interval{-eps, eps});
    spec.label = "catenoid eps=" + std::to_string(eps);
    StripData data = StripData::create(std::move(spec));

    // Rulings at parameters s != s' must not coincide in the plane projection:
    // |(F(s)-F(s'))/(G(s)-G(s'))| stays below 1 on a strict sub-pi/4 strip.
    const int n = 128;
    for (int i = 0; i <= n; ++i) {
        for (int k = i + 1; k <= n; ++k) {
            const double a = -eps + 2.0 * eps * i / n;
            const double b = -eps + 2.0 * eps * k / n;
            const double dF = 1.0 / std::cos(a) - 1.0 / std::cos(b);
            const double dG = std::tan(a) - std::tan(b);
            if (std::abs(dF) >= std::abs(dG))
                throw PreconditionError("catenoid_strip: ruling collision between s = " +
                                        std::to_string(a) + " and s = " + std::to_string(b));
        }
    }
    return {std::move(data), 0.5 / std::tan(eps)};
}

}  // namespace h1geo
