#pragma once

// Command-line front end: flat "key = value" job configs, the six commands,
// and CSV emission. Every code path here is deterministic, so identical
// inputs produce byte-identical reports and CSV files.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "h1geo/strips.hpp"
#include "h1geo/surfaces.hpp"
#include "h1geo/variation.hpp"

namespace h1geo::cli {

// Exit codes, stable across all commands.
inline constexpr int kExitPass = 0;       // success, PASS, or a definitive search verdict
inline constexpr int kExitFail = 1;       // a mathematical check failed
inline constexpr int kExitConfig = 2;     // config or usage error
inline constexpr int kExitNumerical = 3;  // a numerical process failed

// %.17g round-trips doubles and keeps all output byte-stable.
inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- config files -----------------------------------------------------------

struct ConfigValue {
    std::string text;
    bool quoted = false;
    int line = 0;
};

struct RawConfig {
    std::string path;
    std::map<std::string, ConfigValue> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    const ConfigValue& require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end())
            throw ConfigError(path + ": missing key \"" + key + "\"");
        return it->second;
    }

    double number(const std::string& key) const {
        const ConfigValue& v = require(key);
        if (v.quoted)
            throw ConfigError(path + ": key \"" + key + "\" must be an unquoted number");
        std::size_t pos = 0;
        double x = 0.0;
        try {
            x = std::stod(v.text, &pos);
        } catch (const std::exception&) {
            throw ConfigError(path + ": key \"" + key + "\" is not a number: \"" + v.text + "\"");
        }
        while (pos < v.text.size() && std::isspace(static_cast<unsigned char>(v.text[pos]))) ++pos;
        if (pos != v.text.size())
            throw ConfigError(path + ": key \"" + key + "\" is not a number: \"" + v.text + "\"");
        if (!std::isfinite(x))
            throw ConfigError(path + ": key \"" + key + "\" must be finite");
        return x;
    }

    Expression expression(const std::string& key) const {
        const ConfigValue& v = require(key);
        if (!v.quoted)
            throw ConfigError(path + ": key \"" + key + "\" must be a double-quoted expression");
        try {
            return parse_expression(v.text);
        } catch (const ParseError& e) {
            throw ConfigError(path + ": key \"" + key + "\": " + e.what());
        }
    }
};

namespace detail {
inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}
}  // namespace detail

inline RawConfig parse_config_text(const std::string& text, std::string origin) {
    RawConfig cfg;
    cfg.path = std::move(origin);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = cfg.path + ":" + std::to_string(lineno);

        // Strip comments; a '#' inside a quoted value does not start one.
        std::string body;
        bool quote = false;
        for (char c : line) {
            if (c == '"') quote = !quote;
            if (c == '#' && !quote) break;
            body.push_back(c);
        }
        if (quote) throw ConfigError(where + ": unterminated quote");
        body = detail::trim(body);
        if (body.empty()) continue;

        const std::size_t eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = detail::trim(body.substr(0, eq));
        std::string value = detail::trim(body.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        for (char c : key)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
                throw ConfigError(where + ": bad key \"" + key + "\"");
        if (value.empty()) throw ConfigError(where + ": empty value for \"" + key + "\"");

        ConfigValue cv;
        cv.line = lineno;
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw ConfigError(where + ": unterminated quote");
            cv.text = value.substr(1, value.size() - 2);
            cv.quoted = true;
            if (cv.text.find('"') != std::string::npos)
                throw ConfigError(where + ": nested quote in value");
        } else {
            if (value.find('"') != std::string::npos)
                throw ConfigError(where + ": quote must enclose the whole value");
            cv.text = value;
        }
        if (!cfg.values.emplace(key, std::move(cv)).second)
            throw ConfigError(where + ": duplicate key \"" + key + "\"");
    }
    return cfg;
}

inline RawConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

// ---- job configs --------------------------------------------------------------

enum class Kind { TGraph, Implicit, Intrinsic, Seed, Strip, Catenoid };

struct JobConfig {
    Kind kind = Kind::TGraph;
    std::string path;
    std::optional<TGraph> tgraph;
    std::optional<ImplicitSurface> implicit;
    std::optional<IntrinsicGraph> intrinsic;
    Rect intrinsic_domain{};
    std::optional<SeedCurve> seed;
    std::optional<StripSpec> strip;  // strip kind only
    double epsilon = 0.1;            // catenoid kind only
};

namespace detail {

inline void check_keys(const RawConfig& raw, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : raw.values) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError(raw.path + ": unknown key \"" + key + "\"");
    }
}

inline Interval read_interval(const RawConfig& raw, const char* lo, const char* hi) {
    Interval I{raw.number(lo), raw.number(hi)};
    if (!(I.lo < I.hi))
        throw ConfigError(raw.path + ": need " + lo + " < " + hi);
    return I;
}

inline Rect read_rect(const RawConfig& raw, const char* x0, const char* x1, const char* y0,
                      const char* y1) {
    const Interval X = read_interval(raw, x0, x1);
    const Interval Y = read_interval(raw, y0, y1);
    return Rect{X.lo, X.hi, Y.lo, Y.hi};
}

}  // namespace detail

inline JobConfig interpret(const RawConfig& raw) {
    const std::string type = raw.require("type").text;
    JobConfig job;
    job.path = raw.path;
    if (type == "tgraph") {
        detail::check_keys(raw, {"type", "g", "xmin", "xmax", "ymin", "ymax"});
        job.kind = Kind::TGraph;
        job.tgraph.emplace(raw.expression("g"),
                           detail::read_rect(raw, "xmin", "xmax", "ymin", "ymax"));
    } else if (type == "implicit") {
        detail::check_keys(raw, {"type", "f", "x0", "y0", "t0"});
        job.kind = Kind::Implicit;
        job.implicit.emplace(
            raw.expression("f"),
            HeisenbergPoint{raw.number("x0"), raw.number("y0"), raw.number("t0")});
    } else if (type == "intrinsic") {
        detail::check_keys(raw, {"type", "phi", "umin", "umax", "vmin", "vmax"});
        job.kind = Kind::Intrinsic;
        job.intrinsic_domain = detail::read_rect(raw, "umin", "umax", "vmin", "vmax");
        job.intrinsic = IntrinsicGraph::from_expression(raw.expression("phi"),
                                                        job.intrinsic_domain);
    } else if (type == "seed") {
        detail::check_keys(raw, {"type", "gamma1", "gamma2", "h0", "smin", "smax"});
        job.kind = Kind::Seed;
        job.seed = SeedCurve::from_expressions(raw.expression("gamma1"), raw.expression("gamma2"),
                                               raw.expression("h0"),
                                               detail::read_interval(raw, "smin", "smax"));
    } else if (type == "strip") {
        detail::check_keys(raw, {"type", "F", "G", "sigma", "smin", "smax"});
        job.kind = Kind::Strip;
        job.strip = strip_spec_from_expressions(raw.expression("F"), raw.expression("G"),
                                                raw.expression("sigma"),
                                                detail::read_interval(raw, "smin", "smax"));
    } else if (type == "catenoid") {
        detail::check_keys(raw, {"type", "epsilon"});
        job.kind = Kind::Catenoid;
        job.epsilon = raw.number("epsilon");
    } else {
        throw ConfigError(raw.path + ": unknown type \"" + type +
                          "\" (expected tgraph, implicit, intrinsic, seed, strip, or catenoid)");
    }
    return job;
}

// ---- command options and output --------------------------------------------

struct Options {
    double tol = 1e-8;            // residual tolerance for PASS/FAIL checks
    std::optional<int> grid;      // sample count (generic-search: bumps per side, default 16)
    std::optional<double> delta;  // cutoff half-width, default |J|/4 * 0.99
    std::optional<int> k;         // test-function index
    std::optional<int> kmax;      // search bound, default 256
    std::optional<Vec2> start;    // trace start point
    double span = 2.0;            // trace arc-length span
};

struct Sinks {
    std::ostream& report;
    std::ostream& csv;
};

inline void validate(const Options& o) {
    if (!(o.tol > 0.0)) throw ConfigError("--tol must be positive");
    if (o.grid && *o.grid < 2) throw ConfigError("--grid must be at least 2");
    if (o.delta && !(*o.delta > 0.0)) throw ConfigError("--delta must be positive");
    if (o.k && *o.k < 1) throw ConfigError("--k must be at least 1");
    if (o.kmax && *o.kmax < 1) throw ConfigError("--kmax must be at least 1");
    if (!(o.span > 0.0)) throw ConfigError("--span must be positive");
}

inline void csv_header(std::ostream& os, std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
        if (!first) os << ',';
        os << c;
        first = false;
    }
    os << '\n';
}

inline void csv_row(std::ostream& os, std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
        if (!first) os << ',';
        os << num(v);
        first = false;
    }
    os << '\n';
}

namespace detail {

// 2D checks sample roughly sqrt(grid) points per side.
inline int side_from_grid(int grid) {
    return std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(grid)))));
}

}  // namespace detail

// Builds strip data for strip-like configs. StripData::create rejects data
// that is not strict; the PreconditionError maps to exit 1.
inline StripData make_strip(const JobConfig& job) {
    switch (job.kind) {
        case Kind::Strip: return StripData::create(*job.strip);
        case Kind::Seed: return StripData::create(strip_spec_from_seed(*job.seed));
        case Kind::Catenoid: return catenoid_strip(job.epsilon).data;
        default: throw ConfigError("this command needs a strip, seed, or catenoid config");
    }
}

inline double default_delta(const StripData& d) { return 0.25 * d.J().length() * 0.99; }

// ---- commands ------------------------------------------------------------------

inline int cmd_check_minimal(const JobConfig& job, const Options& opts, Sinks sinks) {
    const int grid = opts.grid.value_or(1024);
    const int side = detail::side_from_grid(grid);

    double worst = -1.0;
    double wx = 0.0, wy = 0.0, wt = 0.0;
    bool has_t = false;
    int skipped = 0;
    std::string quantity;

    auto record = [&](double r, double x, double y, double t) {
        if (std::abs(r) > worst) {
            worst = std::abs(r);
            wx = x;
            wy = y;
            wt = t;
        }
    };

    if (job.kind == Kind::TGraph) {
        quantity = "max |H|";
        const Rect& r = job.tgraph->domain();
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                const double x = r.x0 + (r.x1 - r.x0) * (i + 0.5) / side;
                const double y = r.y0 + (r.y1 - r.y0) * (j + 0.5) / side;
                try {
                    record(mean_curvature(*job.tgraph, x, y), x, y, 0.0);
                } catch (const PreconditionError&) {
                    ++skipped;
                }
            }
    } else if (job.kind == Kind::Intrinsic) {
        quantity = "max |B(B(phi))|";
        const Rect& r = job.intrinsic_domain;
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                const double u = r.x0 + (r.x1 - r.x0) * (i + 0.5) / side;
                const double v = r.y0 + (r.y1 - r.y0) * (j + 0.5) / side;
                record(job.intrinsic->minimality_residual(u, v), u, v, 0.0);
            }
    } else if (job.kind == Kind::Implicit) {
        quantity = "max |H|";
        has_t = true;
        const ImplicitSurface& S = *job.implicit;
        const HeisenbergPoint ref = S.reference();
        const Jet2_3 j0 = S.jet(ref);
        const double gn = std::hypot(j0.fx, j0.fy, j0.ft);
        const double g1 = j0.fx / gn, g2 = j0.fy / gn, g3 = j0.ft / gn;
        // Orthonormal basis of the plane orthogonal to grad f at the reference:
        // cross the normal with its least-aligned coordinate axis.
        double a1 = 1.0, a2 = 0.0, a3 = 0.0;
        if (std::abs(g2) <= std::abs(g1) && std::abs(g2) <= std::abs(g3)) {
            a1 = 0.0; a2 = 1.0;
        } else if (std::abs(g3) <= std::abs(g1)) {
            a1 = 0.0; a3 = 1.0;
        }
        double e1x = g2 * a3 - g3 * a2, e1y = g3 * a1 - g1 * a3, e1t = g1 * a2 - g2 * a1;
        const double e1n = std::hypot(e1x, e1y, e1t);
        e1x /= e1n; e1y /= e1n; e1t /= e1n;
        const double e2x = g2 * e1t - g3 * e1y;
        const double e2y = g3 * e1x - g1 * e1t;
        const double e2t = g1 * e1y - g2 * e1x;

        // Newton projection along the gradient; tangent probes start too far
        // off the level set for the one-step ensure_on_surface check.
        auto project = [&S](HeisenbergPoint p) {
            for (int it = 0; it < 50; ++it) {
                const Jet2_3 jp = S.jet(p);
                const double g2 = jp.fx * jp.fx + jp.fy * jp.fy + jp.ft * jp.ft;
                if (g2 < 1e-24 || std::abs(jp.f) <= 1e-10 * (1.0 + std::sqrt(g2))) break;
                const double c = jp.f / g2;
                p = {p.x - c * jp.fx, p.y - c * jp.fy, p.t - c * jp.ft};
            }
            return p;
        };

        // Deterministic tangent-plane probes around the reference, projected
        // back to the surface before the curvature is evaluated.
        const double radius = 0.25;
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                const double a = radius * (2.0 * (i + 0.5) / side - 1.0);
                const double b = radius * (2.0 * (j + 0.5) / side - 1.0);
                HeisenbergPoint p = project({ref.x + a * e1x + b * e2x, ref.y + a * e1y + b * e2y,
                                             ref.t + a * e1t + b * e2t});
                try {
                    p = S.ensure_on_surface(p);
                    record(mean_curvature(S, p), p.x, p.y, p.t);
                } catch (const PreconditionError&) {
                    ++skipped;
                }
            }
    } else {
        throw ConfigError("check-minimal needs a tgraph, implicit, or intrinsic config");
    }

    const int total = side * side;
    sinks.report << "check-minimal: " << job.path << "\n";
    sinks.report << "samples: " << (total - skipped) << " of " << total;
    if (skipped > 0) sinks.report << " (" << skipped << " characteristic, skipped)";
    sinks.report << "\n";
    if (total == skipped)
        throw NumericalError("check-minimal: every sample point was characteristic");
    sinks.report << quantity << " = " << num(worst) << " at (" << num(wx) << ", " << num(wy);
    if (has_t) sinks.report << ", " << num(wt);
    sinks.report << ")\n";
    sinks.report << "tolerance: " << num(opts.tol) << "\n";
    const bool pass = worst <= opts.tol;
    sinks.report << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kExitPass : kExitFail;
}

inline int cmd_strip(const JobConfig& job, const Options& opts, Sinks sinks) {
    std::optional<StripSpec> spec;
    std::optional<double> halfwidth;
    switch (job.kind) {
        case Kind::Strip: spec = *job.strip; break;
        case Kind::Seed: spec = strip_spec_from_seed(*job.seed); break;
        case Kind::Catenoid: {
            CatenoidStrip c = catenoid_strip(job.epsilon);
            spec = c.data.spec();
            halfwidth = c.safe_halfwidth;
            break;
        }
        default: throw ConfigError("strip needs a strip, seed, or catenoid config");
    }

    const Interval J = spec->J;
    const int rows = opts.grid.value_or(1024);
    csv_header(sinks.csv, {"s", "F", "G", "sigma", "strict", "one_minus_2W0kappa"});
    double worst = -std::numeric_limits<double>::infinity();
    double worst_s = J.lo;
    for (int i = 0; i < rows; ++i) {
        const double s = J.lo + J.length() * (i + 0.5) / rows;
        const Jet2_1 F = spec->F(s), G = spec->G(s), Sg = spec->sigma(s);
        const double strict = F.d * F.d - 2.0 * Sg.d * G.d;
        double seedcond = std::numeric_limits<double>::quiet_NaN();
        if (job.kind == Kind::Seed) seedcond = seed_quantities(*job.seed, s).one_minus_2W0kappa;
        if (strict > worst) {
            worst = strict;
            worst_s = s;
        }
        csv_row(sinks.csv, {s, F.f, G.f, Sg.f, strict, seedcond});
    }

    sinks.report << "strip: " << spec->label << "\n";
    sinks.report << "J = (" << num(J.lo) << ", " << num(J.hi) << ")\n";
    if (halfwidth) sinks.report << "safe halfwidth: " << num(*halfwidth) << "\n";
    sinks.report << "max F'^2 - 2 sigma' G' = " << num(worst) << " at s = " << num(worst_s)
                 << "\n";
    if (!(worst < 0.0)) {
        sinks.report << "verdict: not strict\n";
        return kExitFail;
    }
    StripData data = StripData::create(*spec);
    if (data.reflected()) sinks.report << "orientation: G' < 0, chart reflected\n";
    sinks.report << "verdict: strict\n";
    return kExitPass;
}

inline int cmd_second_variation(const JobConfig& job, const Options& opts, Sinks sinks) {
    StripData data = make_strip(job);
    const double delta = opts.delta.value_or(default_delta(data));
    const BumpSpec bump{delta};
    const double limit = instability_limit(data, bump);

    std::vector<int> ks;
    if (opts.kmax) {
        for (int k = 1;; k *= 2) {
            ks.push_back(k);
            if (k > *opts.kmax / 2) break;
        }
    } else {
        ks.push_back(opts.k.value_or(64));
    }

    sinks.report << "strip: " << data.label() << "\n";
    {
        const TestFunctionPsiK probe(data, bump, ks.front());
        sinks.report << "delta: " << num(delta) << " (delta_s = " << num(probe.delta_s())
                     << ")\n";
    }
    sinks.report << "limit prediction: " << num(limit) << "\n";

    csv_header(sinks.csv, {"k", "term1", "term2", "total", "limit", "unstable"});
    bool any_unstable = false;
    for (int k : ks) {
        const TestFunctionPsiK t(data, bump, k);
        VariationReport rep = second_variation_strip(data, psi_k_strip_field(t), t.support());
        rep.k = k;
        rep.limit_prediction = limit;
        sinks.report << "k = " << k << ": term1 = " << num(rep.term1)
                     << ", term2 = " << num(rep.term2) << ", total = " << num(rep.total) << "\n";
        csv_row(sinks.csv, {static_cast<double>(k), rep.term1, rep.term2, rep.total, limit,
                            rep.unstable() ? 1.0 : 0.0});
        any_unstable = any_unstable || rep.unstable();
    }
    sinks.report << "verdict: " << (any_unstable ? "UNSTABLE" : "stable at these test functions")
                 << "\n";
    return kExitPass;
}

inline int cmd_instability_search(const JobConfig& job, const Options& opts, Sinks sinks) {
    StripData data = make_strip(job);
    const double delta = opts.delta.value_or(default_delta(data));
    const BumpSpec bump{delta};
    const int kmax = opts.kmax.value_or(256);

    const InstabilitySearchResult res = instability_search(data, bump, kmax);

    sinks.report << "strip: " << data.label() << "\n";
    sinks.report << "delta: " << num(delta) << "\n";
    sinks.report << "limit prediction: " << num(res.limit) << "\n";
    csv_header(sinks.csv, {"k", "term1", "term2", "total", "limit", "unstable"});
    for (const VariationReport& rep : res.reports) {
        sinks.report << "k = " << rep.k << ": term1 = " << num(rep.term1)
                     << ", term2 = " << num(rep.term2) << ", total = " << num(rep.total) << "\n";
        csv_row(sinks.csv, {static_cast<double>(rep.k), rep.term1, rep.term2, rep.total,
                            res.limit, rep.unstable() ? 1.0 : 0.0});
    }
    if (res.found())
        sinks.report << "UNSTABLE k=" << res.witness_k << " V=" << num(res.reports.back().total)
                     << "\n";
    else
        sinks.report << "NO-WITNESS\n";
    return kExitPass;
}

inline int cmd_generic_search(const JobConfig& job, const Options& opts, Sinks sinks) {
    std::optional<IntrinsicGraph> graph;
    std::optional<Band> region;
    if (job.kind == Kind::Intrinsic) {
        graph = *job.intrinsic;
        const Rect& r = job.intrinsic_domain;
        region = Band::rect(r.x0, r.x1, r.y0, r.y1);
        sinks.report << "surface: intrinsic graph on [" << num(r.x0) << ", " << num(r.x1)
                     << "] x [" << num(r.y0) << ", " << num(r.y1) << "]\n";
    } else if (job.kind == Kind::TGraph || job.kind == Kind::Implicit) {
        throw ConfigError("generic-search needs an intrinsic, strip, seed, or catenoid config");
    } else {
        StripData data = make_strip(job);
        const double delta = opts.delta.value_or(default_delta(data));
        // The search band follows the chart: the support of psi_k at --k.
        const TestFunctionPsiK t(data, BumpSpec{delta}, opts.k.value_or(4));
        graph = make_intrinsic_graph(data);
        region = psi_k_band(t);
        sinks.report << "surface: " << data.label() << ", band |u| <= "
                     << num(2.0 * t.delta_u() * t.k()) << "\n";
    }

    const int n = opts.grid.value_or(16);
    if (n > 64) throw ConfigError("generic-search basis is capped at 64 bumps per side");
    const GenericSearchResult res = generic_instability_search(*graph, *region, BasisSpec{n});

    sinks.report << "basis: " << res.n << " x " << res.n << " bumps ("
                 << res.coefficients.size() << " coefficients)\n";
    sinks.report << "iterations: " << res.iterations << "\n";
    sinks.report << "minimum: " << num(res.minimum) << "\n";
    csv_header(sinks.csv, {"index", "coefficient"});
    for (std::size_t i = 0; i < res.coefficients.size(); ++i)
        csv_row(sinks.csv, {static_cast<double>(i), res.coefficients[i]});
    if (res.unstable())
        sinks.report << "UNSTABLE V=" << num(res.minimum) << "\n";
    else
        sinks.report << "NO-WITNESS\n";
    return kExitPass;
}

inline int cmd_trace(const JobConfig& job, const Options& opts, Sinks sinks) {
    if (job.kind != Kind::TGraph) throw ConfigError("trace needs a tgraph config");
    if (!opts.start) throw ConfigError("trace needs --start x y");
    const TGraph& g = *job.tgraph;
    const Vec2 start = *opts.start;
    if (!g.domain().contains(start.x, start.y))
        throw ConfigError("trace start lies outside the domain");
    const int steps = std::max(16, opts.grid.value_or(1024));

    csv_header(sinks.csv,
               {"s", "gamma1", "gamma2", "h0", "speed", "dir1", "dir2", "t_slope",
                "rule_residual"});
    sinks.report << "trace: " << job.path << "\n";

    const HorizontalData d0 = horizontal_data(g, start.x, start.y);
    if (d0.characteristic) {
        sinks.report << "warning: start point is characteristic, nothing traced\n";
        sinks.report << "traced: 0 of " << num(opts.span) << "\n";
        return kExitPass;
    }

    const SeedTrace tr = trace_seed(g, start, opts.span, steps);

    // The integrator does not know about the domain box; truncate the output
    // at the first sample that leaves it.
    std::size_t count = tr.s.size();
    bool left_domain = false;
    for (std::size_t i = 0; i < tr.s.size(); ++i) {
        if (!g.domain().contains(tr.gamma[i].x, tr.gamma[i].y)) {
            count = i;
            left_domain = true;
            break;
        }
    }
    for (std::size_t i = 0; i < count; ++i) {
        const Vec2 p = tr.gamma[i];
        const Vec2 dir = tr.gamma_dir[i];
        const RuleLine line = rule_line_through(g, p.x, p.y);
        double resid = 0.0;
        for (double r : {-1.0, -0.5, 0.5, 1.0})
            resid = std::max(resid, std::abs(rule_line_residual(g, line, r)));
        csv_row(sinks.csv, {tr.s[i], p.x, p.y, tr.h0[i], std::hypot(dir.x, dir.y), dir.x, dir.y,
                            line.t_slope, resid});
    }
    const double reached = count > 0 ? tr.s[count - 1] : 0.0;
    if (tr.hit_characteristic)
        sinks.report << "warning: trace stopped at a characteristic point\n";
    if (left_domain) sinks.report << "warning: trace left the domain\n";
    sinks.report << "traced: " << num(reached) << " of " << num(opts.span) << "\n";
    return kExitPass;
}

// ---- dispatch ------------------------------------------------------------------

// Maps the library's exception taxonomy onto the exit-code contract. Option
// and config problems are caught before any mathematics runs, so a
// PreconditionError escaping a command is a genuine mathematical rejection.
template <class Fn>
inline int guarded(Fn&& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const OutOfDomainError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PreconditionError& e) {
        err << "rejected: " << e.what() << "\n";
        return kExitFail;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

inline int run(const std::string& command, const std::string& config_path, const Options& opts,
               Sinks sinks, std::ostream& err) {
    return guarded(
        [&]() -> int {
            validate(opts);
            const JobConfig job = interpret(load_config(config_path));
            if (command == "check-minimal") return cmd_check_minimal(job, opts, sinks);
            if (command == "strip") return cmd_strip(job, opts, sinks);
            if (command == "second-variation") return cmd_second_variation(job, opts, sinks);
            if (command == "instability-search") return cmd_instability_search(job, opts, sinks);
            if (command == "generic-search") return cmd_generic_search(job, opts, sinks);
            if (command == "trace") return cmd_trace(job, opts, sinks);
            throw ConfigError("unknown command \"" + command + "\"");
        },
        err);
}

}  // namespace h1geo::cli
