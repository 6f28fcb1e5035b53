#pragma once

// Group operations and the left-invariant frame of the first Heisenberg group
// H^1 = (R^3, *), coordinates (x, y, t).

#include <cmath>

#include "h1geo/errors.hpp"

namespace h1geo {

struct HeisenbergPoint {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
};

// Tangent vector in cartesian coordinates (d/dx, d/dy, d/dt components).
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
};

// Coefficients of a tangent vector in the left-invariant frame (X1, X2, T).
struct FrameCoefficients {
    double a = 0.0;  // X1 component
    double b = 0.0;  // X2 component
    double c = 0.0;  // T component
};

inline HeisenbergPoint group_mul(const HeisenbergPoint& g, const HeisenbergPoint& h) {
    return {g.x + h.x, g.y + h.y, g.t + h.t + 0.5 * (g.x * h.y - h.x * g.y)};
}

inline HeisenbergPoint group_inv(const HeisenbergPoint& g) {
    // (x,y,t)^{-1} = (-x,-y,-t); the area term cancels.
    return {-g.x, -g.y, -g.t};
}

// Anisotropic dilation: delta_lambda(x,y,t) = (lambda x, lambda y, lambda^2 t).
inline HeisenbergPoint dilate(const HeisenbergPoint& g, double lambda) {
    if (!(lambda > 0.0)) throw PreconditionError("dilate: lambda must be positive");
    return {lambda * g.x, lambda * g.y, lambda * lambda * g.t};
}

// X1 = d/dx - (y/2) d/dt, X2 = d/dy + (x/2) d/dt, T = d/dt at the base point.
inline Vec3 frame_to_cartesian(const FrameCoefficients& v, const HeisenbergPoint& base) {
    return {v.a, v.b, v.c + 0.5 * (v.b * base.x - v.a * base.y)};
}

inline FrameCoefficients cartesian_to_frame(const Vec3& v, const HeisenbergPoint& base) {
    return {v.x, v.y, v.t - 0.5 * (v.y * base.x - v.x * base.y)};
}

}  // namespace h1geo
