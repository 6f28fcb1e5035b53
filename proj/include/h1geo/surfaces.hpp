#pragma once

// Surfaces in H^1 and their horizontal geometry: graphs over the (x,y) plane
// ("t-graphs"), implicit level sets, and intrinsic graphs over a vertical
// plane. Horizontal data (p, q, W), characteristic points, horizontal mean
// curvature, rule lines, horizontal perimeter, and seed tracing live here.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "h1geo/errors.hpp"
#include "h1geo/expr.hpp"
#include "h1geo/heisenberg.hpp"
#include "h1geo/quadrature.hpp"

namespace h1geo {

// Points with W below this are treated as characteristic.
inline constexpr double kCharacteristicW = 1e-8;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double s) const { return s >= lo && s <= hi; }
};

struct Rect {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

// First-order data of a scalar field of two variables.
struct Grad2 {
    double f = 0.0, fu = 0.0, fv = 0.0;
};

// ---- horizontal data ---------------------------------------------------

// p, q are the X1, X2 derivatives of a defining function, omega its T
// derivative, W = sqrt(p^2 + q^2). Overlined fields are the W-normalized
// versions; they are NaN at characteristic points (W < 1e-8).
struct HorizontalData {
    double p = 0.0, q = 0.0, W = 0.0, omega = 0.0;
    double p_bar = 0.0, q_bar = 0.0, omega_bar = 0.0;
    bool characteristic = false;
};

namespace detail {
inline HorizontalData finish_horizontal(double p, double q, double omega) {
    HorizontalData d;
    d.p = p;
    d.q = q;
    d.omega = omega;
    d.W = std::hypot(p, q);
    d.characteristic = d.W < kCharacteristicW;
    if (d.characteristic) {
        d.p_bar = d.q_bar = d.omega_bar = std::numeric_limits<double>::quiet_NaN();
    } else {
        d.p_bar = p / d.W;
        d.q_bar = q / d.W;
        d.omega_bar = omega / d.W;
    }
    return d;
}
}  // namespace detail

// ---- t-graphs ----------------------------------------------------------

// Graph t = g(x, y); the defining function is g(x,y) - t, so omega = -1.
class TGraph {
  public:
    TGraph(Expression g, Rect domain) : g_(std::move(g)), domain_(domain) {
        for (const auto& v : g_.free_variables())
            if (v != "x" && v != "y")
                throw ConfigError("t-graph expression may only use x and y, found \"" + v + "\"");
    }

    const Expression& g() const { return g_; }
    const Rect& domain() const { return domain_; }

    double height(double x, double y) const {
        return g_.eval(Bindings{{"x", x}, {"y", y}});
    }

    Jet2_2 jet(double x, double y) const {
        return eval_jet2(g_, Bindings{{"x", x}, {"y", y}}, "x", "y");
    }

  private:
    Expression g_;
    Rect domain_;
};

inline HorizontalData horizontal_data(const TGraph& s, double x, double y) {
    Jet2_2 j = s.jet(x, y);
    return detail::finish_horizontal(j.fu + 0.5 * y, j.fv - 0.5 * x, -1.0);
}

// Horizontal mean curvature of a t-graph at a noncharacteristic point:
// H = X1(p/W) + X2(q/W) = (q^2 p_x - p q (p_y + q_x) + p^2 q_y) / W^3,
// with p = g_x + y/2, q = g_y - x/2 independent of t.
inline double mean_curvature(const TGraph& s, double x, double y) {
    Jet2_2 j = s.jet(x, y);
    const double p = j.fu + 0.5 * y;
    const double q = j.fv - 0.5 * x;
    const double W = std::hypot(p, q);
    if (W < kCharacteristicW)
        throw PreconditionError("mean_curvature: characteristic point of t-graph");
    const double px = j.fuu;
    const double py = j.fuv + 0.5;
    const double qx = j.fuv - 0.5;
    const double qy = j.fvv;
    return (q * q * px - p * q * (py + qx) + p * p * qy) / (W * W * W);
}

// Grid scan for near-characteristic points (W < 1e-8) on the domain rectangle.
struct CharPoint {
    double x, y, W;
};

inline std::vector<CharPoint> char_locus_scan(const TGraph& s, int n = 256) {
    if (n < 2) throw PreconditionError("char_locus_scan: grid must have at least 2 points");
    std::vector<CharPoint> out;
    const Rect& r = s.domain();
    for (int i = 0; i < n; ++i) {
        const double x = r.x0 + (r.x1 - r.x0) * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            const double y = r.y0 + (r.y1 - r.y0) * j / (n - 1);
            HorizontalData d = horizontal_data(s, x, y);
            if (d.characteristic) out.push_back({x, y, d.W});
        }
    }
    return out;
}

// ---- rule lines --------------------------------------------------------

// Horizontal straight line through a noncharacteristic graph point, directed
// along nu_H^perp. Minimal t-graphs are ruled by these.
struct RuleLine {
    HeisenbergPoint base;
    double a = 0.0, b = 0.0;  // planar direction (unit)
    double t_slope = 0.0;

    HeisenbergPoint at(double s) const {
        return {base.x + a * s, base.y + b * s, base.t + t_slope * s};
    }
};

inline RuleLine rule_line_through(const TGraph& s, double x, double y) {
    HorizontalData d = horizontal_data(s, x, y);
    if (d.characteristic)
        throw PreconditionError("rule_line_through: characteristic point of t-graph");
    RuleLine line;
    line.base = {x, y, s.height(x, y)};
    line.a = d.q_bar;
    line.b = -d.p_bar;
    // Horizontality: dt/ds = (b x - a y)/2 along the line.
    line.t_slope = 0.5 * (line.b * x - line.a * y);
    return line;
}

// Signed height defect of the rule line against the graph at parameter s.
inline double rule_line_residual(const TGraph& g, const RuleLine& line, double s) {
    HeisenbergPoint p = line.at(s);
    return g.height(p.x, p.y) - p.t;
}

// ---- implicit surfaces -------------------------------------------------

// Level set {f = 0} with a reference point on it. Membership tolerance is
// 1e-8 scaled by the gradient; one projected Newton correction is applied
// before rejecting a point.
class ImplicitSurface {
  public:
    ImplicitSurface(Expression f, HeisenbergPoint ref) : f_(std::move(f)), ref_(ref) {
        for (const auto& v : f_.free_variables())
            if (v != "x" && v != "y" && v != "t")
                throw ConfigError("implicit surface expression may only use x, y, t, found \"" +
                                  v + "\"");
        ref_ = ensure_on_surface(ref);
        Jet2_3 j = jet(ref_);
        if (std::hypot(j.fx, j.fy, j.ft) < 1e-12)
            throw PreconditionError("implicit surface: gradient vanishes at reference point");
    }

    const Expression& f() const { return f_; }
    const HeisenbergPoint& reference() const { return ref_; }

    double value(const HeisenbergPoint& p) const {
        return f_.eval(Bindings{{"x", p.x}, {"y", p.y}, {"t", p.t}});
    }

    Jet2_3 jet(const HeisenbergPoint& p) const {
        return eval_jet2(f_, Bindings{{"x", p.x}, {"y", p.y}, {"t", p.t}}, "x", "y", "t");
    }

    // Returns p, or p moved by one Newton step along the Euclidean gradient if
    // that lands it within tolerance; throws otherwise.
    HeisenbergPoint ensure_on_surface(HeisenbergPoint p) const {
        Jet2_3 j = jet(p);
        const double gn2 = j.fx * j.fx + j.fy * j.fy + j.ft * j.ft;
        const double tol = 1e-8 * (1.0 + std::sqrt(gn2));
        if (std::abs(j.f) <= tol) return p;
        if (gn2 < 1e-24)
            throw OutOfDomainError("point is off the level set and the gradient vanishes");
        const double step = j.f / gn2;
        HeisenbergPoint moved{p.x - step * j.fx, p.y - step * j.fy, p.t - step * j.ft};
        if (std::abs(value(moved)) <= tol) return moved;
        throw OutOfDomainError("point is not on the level set (|f| = " +
                               std::to_string(std::abs(j.f)) + ")");
    }

  private:
    Expression f_;
    HeisenbergPoint ref_;
};

inline HorizontalData horizontal_data(const ImplicitSurface& s, const HeisenbergPoint& p0) {
    HeisenbergPoint p = s.ensure_on_surface(p0);
    Jet2_3 j = s.jet(p);
    const double pp = j.fx - 0.5 * p.y * j.ft;
    const double qq = j.fy + 0.5 * p.x * j.ft;
    return detail::finish_horizontal(pp, qq, j.ft);
}

// H = X1(p/W) + X2(q/W) with p = X1 f, q = X2 f as functions on R^3,
// X1 = d/dx - (y/2) d/dt, X2 = d/dy + (x/2) d/dt.
inline double mean_curvature(const ImplicitSurface& s, const HeisenbergPoint& p0) {
    HeisenbergPoint pt = s.ensure_on_surface(p0);
    Jet2_3 j = s.jet(pt);
    const double x = pt.x, y = pt.y;
    const double p = j.fx - 0.5 * y * j.ft;
    const double q = j.fy + 0.5 * x * j.ft;
    const double W = std::hypot(p, q);
    if (W < kCharacteristicW)
        throw PreconditionError("mean_curvature: characteristic point of implicit surface");
    const double px = j.fxx - 0.5 * y * j.fxt;
    const double py = j.fxy - 0.5 * j.ft - 0.5 * y * j.fyt;
    const double p_t = j.fxt - 0.5 * y * j.ftt;
    const double qx = j.fxy + 0.5 * j.ft + 0.5 * x * j.fxt;
    const double qy = j.fyy + 0.5 * x * j.fyt;
    const double q_t = j.fyt + 0.5 * x * j.ftt;
    const double X1p = px - 0.5 * y * p_t;
    const double X2p = py + 0.5 * x * p_t;
    const double X1q = qx - 0.5 * y * q_t;
    const double X2q = qy + 0.5 * x * q_t;
    return (q * q * X1p - p * q * (X2p + X1q) + p * p * X2q) / (W * W * W);
}

// ---- intrinsic graphs --------------------------------------------------

// Graph x = phi(u, v) over the vertical plane {x = 0} with exponential
// coordinates (u, v) -> (0, u, v). Backends: a closed-form expression in
// (u, v), or chart-backed data installed by the strip machinery. Second
// derivatives may be unavailable for chart-backed graphs built from sampled
// seeds; jet2() reports that.
class IntrinsicGraph {
  public:
    struct Backend {
        std::function<Grad2(double, double)> jet1;
        std::function<Jet2_2(double, double)> jet2;      // optional
        std::function<bool(double, double)> contains;
        std::function<double(double, double)> burgers;   // optional exact B_phi(phi)
        std::function<double(double, double)> residual;  // optional exact B(B(phi))
        std::string kind = "custom";
    };

    static IntrinsicGraph from_expression(Expression phi, Rect domain) {
        for (const auto& v : phi.free_variables())
            if (v != "u" && v != "v")
                throw ConfigError("intrinsic graph expression may only use u and v, found \"" +
                                  v + "\"");
        Backend be;
        be.jet1 = [phi](double u, double v) {
            Dual du = phi.eval_dual(Bindings{{"u", u}, {"v", v}}, "u");
            Dual dv = phi.eval_dual(Bindings{{"u", u}, {"v", v}}, "v");
            return Grad2{du.v, du.d, dv.d};
        };
        be.jet2 = [phi](double u, double v) {
            return eval_jet2(phi, Bindings{{"u", u}, {"v", v}}, "u", "v");
        };
        be.contains = [domain](double u, double v) { return domain.contains(u, v); };
        be.kind = "expression";
        return IntrinsicGraph(std::move(be));
    }

    static IntrinsicGraph from_backend(Backend be) { return IntrinsicGraph(std::move(be)); }

    double operator()(double u, double v) const { return be_.jet1(u, v).f; }
    Grad2 jet1(double u, double v) const { return be_.jet1(u, v); }

    bool has_jet2() const { return static_cast<bool>(be_.jet2); }
    Jet2_2 jet2(double u, double v) const {
        if (!be_.jet2)
            throw PreconditionError(
                "intrinsic graph backend (" + be_.kind + ") has no second derivatives");
        return be_.jet2(u, v);
    }

    bool contains(double u, double v) const { return !be_.contains || be_.contains(u, v); }
    const std::string& kind() const { return be_.kind; }

    // B_phi(phi) = phi_u + phi phi_v.
    double burgers_phi(double u, double v) const {
        if (be_.burgers) return be_.burgers(u, v);
        Grad2 j = be_.jet1(u, v);
        return j.fu + j.f * j.fv;
    }

    // Minimal surface residual B_phi(B_phi(phi)).
    double minimality_residual(double u, double v) const {
        if (be_.residual) return be_.residual(u, v);
        Jet2_2 j = jet2(u, v);
        return j.fuu + 2.0 * j.f * j.fuv + j.f * j.f * j.fvv + j.fu * j.fv + j.f * j.fv * j.fv;
    }

  private:
    explicit IntrinsicGraph(Backend be) : be_(std::move(be)) {}
    Backend be_;
};

// B_phi applied to an arbitrary first-order field.
inline double burgers(const IntrinsicGraph& s, const Grad2& field, double u, double v) {
    return field.fu + s(u, v) * field.fv;
}

inline double max_minimality_residual(const IntrinsicGraph& s, const Rect& r, int n = 32) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double u = r.x0 + (r.x1 - r.x0) * (i + 0.5) / n;
            const double v = r.y0 + (r.y1 - r.y0) * (j + 0.5) / n;
            if (!s.contains(u, v)) continue;
            worst = std::max(worst, std::abs(s.minimality_residual(u, v)));
        }
    return worst;
}

// Horizontal perimeter of the graph patch over a rectangle in the (u,v) plane:
// integral of sqrt(1 + B_phi(phi)^2).
inline QuadResult perimeter(const IntrinsicGraph& s, const Rect& r, const QuadOptions& opts = {}) {
    return integrate2([&](double u, double v) {
        const double B = s.burgers_phi(u, v);
        return std::sqrt(1.0 + B * B);
    }, r.x0, r.x1, r.y0, r.y1, opts);
}

// ---- seed tracing on t-graphs -------------------------------------------

// Integral curve of the unit horizontal normal projection gamma' = (p_bar,
// q_bar), traced with fixed-step RK4 and verified against a half-step run.
struct SeedTrace {
    std::vector<double> s;        // arc-length parameter
    std::vector<Vec2> gamma;      // curve points
    std::vector<Vec2> gamma_dir;  // (p_bar, q_bar) at the points
    std::vector<double> h0;       // graph height along the curve
    bool hit_characteristic = false;
    double reached = 0.0;  // last parameter actually traced
};

namespace detail {
inline Vec2 seed_field(const TGraph& g, double x, double y) {
    HorizontalData d = horizontal_data(g, x, y);
    if (d.characteristic) throw PreconditionError("seed trace reached a characteristic point");
    return {d.p_bar, d.q_bar};
}

inline Vec2 rk4_step(const TGraph& g, Vec2 p, double h) {
    Vec2 k1 = seed_field(g, p.x, p.y);
    Vec2 k2 = seed_field(g, p.x + 0.5 * h * k1.x, p.y + 0.5 * h * k1.y);
    Vec2 k3 = seed_field(g, p.x + 0.5 * h * k2.x, p.y + 0.5 * h * k2.y);
    Vec2 k4 = seed_field(g, p.x + h * k3.x, p.y + h * k3.y);
    return {p.x + h / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
            p.y + h / 6.0 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y)};
}

inline bool trace_rk4(const TGraph& g, Vec2 start, double span, int steps, SeedTrace* out,
                      Vec2* end) {
    const double h = span / steps;
    Vec2 p = start;
    for (int i = 0; i <= steps; ++i) {
        const double s = h * i;
        if (out) {
            Vec2 dir;
            try {
                dir = seed_field(g, p.x, p.y);
            } catch (const PreconditionError&) {
                out->hit_characteristic = true;
                out->reached = s > 0 ? h * (i - 1) : 0.0;
                return false;
            }
            out->s.push_back(s);
            out->gamma.push_back(p);
            out->gamma_dir.push_back(dir);
            out->h0.push_back(g.height(p.x, p.y));
            out->reached = s;
        }
        if (i < steps) {
            try {
                p = rk4_step(g, p, h);
            } catch (const PreconditionError&) {
                if (out) out->hit_characteristic = true;
                return false;
            }
        }
    }
    if (end) *end = p;
    return true;
}
}  // namespace detail

inline SeedTrace trace_seed(const TGraph& g, Vec2 start, double span, int steps = 4096,
                            double check_tol = 1e-6) {
    if (!(span > 0.0)) throw PreconditionError("trace_seed: span must be positive");
    if (steps < 16) throw PreconditionError("trace_seed: too few steps");
    {
        HorizontalData d0 = horizontal_data(g, start.x, start.y);
        if (d0.characteristic)
            throw PreconditionError("trace_seed: start point is characteristic");
    }
    SeedTrace trace;
    bool full = detail::trace_rk4(g, start, span, steps, &trace, nullptr);
    if (full) {
        // Half-step verification of the endpoint.
        Vec2 fine_end;
        if (detail::trace_rk4(g, start, span, steps * 2, nullptr, &fine_end)) {
            const Vec2 coarse_end = trace.gamma.back();
            const double dev = std::hypot(fine_end.x - coarse_end.x, fine_end.y - coarse_end.y);
            if (dev > check_tol)
                throw NumericalError("trace_seed: step-halving check failed (deviation " +
                                     std::to_string(dev) + ")");
        }
    }
    return trace;
}

}  // namespace h1geo
