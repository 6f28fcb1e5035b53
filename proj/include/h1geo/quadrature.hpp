#pragma once

// Adaptive 1-D quadrature on Gauss 7 / Kronrod 15 pairs with recursive
// bisection, plus an iterated 2-D driver with per-column limits. Deterministic:
// intervals are processed depth-first in a fixed order and summed in completion
// order; no parallelism.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "h1geo/errors.hpp"

namespace h1geo {

struct QuadOptions {
    double rel_tol = 1e-8;          // relative to the first whole-interval estimate
    double abs_tol = 0.0;           // absolute floor; useful for near-cancelling integrands
    std::size_t cell_budget = 1000000;  // max refined cells across the whole call tree
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;   // accumulated error estimate
    std::size_t cells = 0;  // accepted cells
};

// Shared evaluation budget so nested (iterated) integrals cannot run away.
struct QuadBudget {
    std::size_t used = 0;
    std::size_t limit = 1000000;
};

namespace detail {

// Kronrod 15 abscissae (positive half) and weights; Gauss 7 weights sit on the
// odd-index abscissae.
inline constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691, 0.7415311855993944,
    0.5860872354676911, 0.4058451513773972, 0.2077849550078985, 0.0,
};
inline constexpr double kWgk[8] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502, 0.1406532597155259,
    0.1690047266392679, 0.1903505780647854, 0.2044329400752989, 0.2094821410847278,
};
inline constexpr double kWg[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189, 0.4179591836734694,
};

struct CellEstimate {
    double k15 = 0.0;
    double err = 0.0;
};

template <class F>
CellEstimate g7k15(F&& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kXgk[i]);
        fv[14 - i] = f(c + h * kXgk[i]);
    }
    fv[7] = f(c);
    double k15 = kWgk[7] * fv[7];
    double g7 = kWg[3] * fv[7];
    double resabs = kWgk[7] * std::abs(fv[7]);
    for (int i = 0; i < 7; ++i) {
        const double pair = fv[i] + fv[14 - i];
        k15 += kWgk[i] * pair;
        resabs += kWgk[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
        if (i % 2 == 1) g7 += kWg[i / 2] * pair;
    }
    const double mean = 0.5 * k15;
    double resasc = kWgk[7] * std::abs(fv[7] - mean);
    for (int i = 0; i < 7; ++i)
        resasc += kWgk[i] * (std::abs(fv[i] - mean) + std::abs(fv[14 - i] - mean));
    k15 *= h;
    g7 *= h;
    resabs *= h;
    resasc *= h;

    double err = std::abs(k15 - g7);
    if (resasc != 0.0 && err != 0.0) {
        const double scaled = std::pow(200.0 * err / resasc, 1.5);
        err = resasc * (scaled < 1.0 ? scaled : 1.0);
    }
    const double eps_floor = 50.0 * 2.220446049250313e-16 * resabs;
    if (err < eps_floor) err = eps_floor;
    return {k15, err};
}

}  // namespace detail

template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opts = {},
                     QuadBudget* budget = nullptr) {
    QuadResult res;
    if (a == b) return res;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }

    QuadBudget local{0, opts.cell_budget};
    QuadBudget& bud = budget ? *budget : local;

    detail::CellEstimate whole = detail::g7k15(f, a, b);
    const double scale = std::abs(whole.k15) > 1e-300 ? std::abs(whole.k15) : 1e-300;
    const double tol0 = std::max(opts.abs_tol, opts.rel_tol * scale);

    struct Cell {
        double a, b, tol;
        detail::CellEstimate est;
    };
    std::vector<Cell> stack;
    stack.push_back({a, b, tol0, whole});

    while (!stack.empty()) {
        Cell cell = stack.back();
        stack.pop_back();
        const double width = cell.b - cell.a;
        const bool too_narrow = width < 1e-14 * (std::abs(cell.a) + std::abs(cell.b) + 1.0);
        if (cell.est.err <= cell.tol || too_narrow) {
            res.value += cell.est.k15;
            res.error += cell.est.err;
            res.cells += 1;
            continue;
        }
        if (++bud.used > bud.limit)
            throw NumericalError("quadrature cell budget exhausted after " +
                                 std::to_string(bud.used - 1) + " refinements");
        const double mid = 0.5 * (cell.a + cell.b);
        detail::CellEstimate left = detail::g7k15(f, cell.a, mid);
        detail::CellEstimate right = detail::g7k15(f, mid, cell.b);
        stack.push_back({mid, cell.b, 0.5 * cell.tol, right});
        stack.push_back({cell.a, mid, 0.5 * cell.tol, left});
    }
    res.value *= sign;
    return res;
}

// Iterated double integral over { (u,v) : u in [u0,u1], lo(u) <= v <= hi(u) }.
template <class F, class Lo, class Hi>
QuadResult integrate2(F&& f, double u0, double u1, Lo&& lo, Hi&& hi,
                      const QuadOptions& opts = {}, QuadBudget* budget = nullptr) {
    QuadBudget local{0, opts.cell_budget};
    QuadBudget& bud = budget ? *budget : local;

    QuadOptions inner = opts;
    inner.rel_tol = opts.rel_tol * 0.3;
    if (opts.abs_tol > 0.0) {
        const double span = std::abs(u1 - u0) > 1.0 ? std::abs(u1 - u0) : 1.0;
        inner.abs_tol = 0.5 * opts.abs_tol / span;
    }

    double inner_error = 0.0;
    auto column = [&](double u) {
        QuadResult r = integrate([&](double v) { return f(u, v); }, lo(u), hi(u), inner, &bud);
        inner_error += r.error;
        return r.value;
    };
    QuadResult outer = integrate(column, u0, u1, opts, &bud);
    outer.error += inner_error;  // coarse: inner estimates accumulated over evaluations
    return outer;
}

template <class F>
QuadResult integrate2(F&& f, double u0, double u1, double v0, double v1,
                      const QuadOptions& opts = {}, QuadBudget* budget = nullptr) {
    return integrate2(std::forward<F>(f), u0, u1, [v0](double) { return v0; },
                      [v1](double) { return v1; }, opts, budget);
}

}  // namespace h1geo
