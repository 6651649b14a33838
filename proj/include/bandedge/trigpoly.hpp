#pragma once

#include <array>
#include <cmath>
#include <cstdlib>

#include "bandedge/mat2.hpp"

namespace bandedge {

// Trigonometric polynomial of degree 4 on the circle of circumference pi,
// in the basis {1, cos 2t, sin 2t, cos 4t, sin 4t}. Closed under
// differentiation, and under products of two degree-2 members, which is all
// the drift/diffusion construction needs.
struct TrigPoly4 {
    double c0 = 0, c2 = 0, s2 = 0, c4 = 0, s4 = 0;

    double operator()(double t) const {
        return c0 + c2 * std::cos(2 * t) + s2 * std::sin(2 * t) + c4 * std::cos(4 * t) + s4 * std::sin(4 * t);
    }

    TrigPoly4 derivative() const { return {0.0, 2 * s2, -2 * c2, 4 * s4, -4 * c4}; }

    // k-th derivative evaluated at t (exact; used by the singular-ODE layer)
    double deriv(double t, int k) const {
        TrigPoly4 g = *this;
        for (int i = 0; i < k; ++i) g = g.derivative();
        return g(t);
    }

    double max_abs_coeff() const {
        return std::max({std::abs(c0), std::abs(c2), std::abs(s2), std::abs(c4), std::abs(s4)});
    }

    bool is_degree2() const { return c4 == 0.0 && s4 == 0.0; }

    friend TrigPoly4 operator+(const TrigPoly4& a, const TrigPoly4& b) {
        return {a.c0 + b.c0, a.c2 + b.c2, a.s2 + b.s2, a.c4 + b.c4, a.s4 + b.s4};
    }
    friend TrigPoly4 operator-(const TrigPoly4& a, const TrigPoly4& b) {
        return {a.c0 - b.c0, a.c2 - b.c2, a.s2 - b.s2, a.c4 - b.c4, a.s4 - b.s4};
    }
    friend TrigPoly4 operator*(double s, const TrigPoly4& a) {
        return {s * a.c0, s * a.c2, s * a.s2, s * a.c4, s * a.s4};
    }

    // Exact product of two degree-2 polynomials (result has degree 4).
    static TrigPoly4 product2(const TrigPoly4& a, const TrigPoly4& b) {
        if (!a.is_degree2() || !b.is_degree2()) std::abort();
        TrigPoly4 r;
        r.c0 = a.c0 * b.c0 + 0.5 * (a.c2 * b.c2 + a.s2 * b.s2);
        r.c2 = a.c0 * b.c2 + a.c2 * b.c0;
        r.s2 = a.c0 * b.s2 + a.s2 * b.c0;
        r.c4 = 0.5 * (a.c2 * b.c2 - a.s2 * b.s2);
        r.s4 = 0.5 * (a.c2 * b.s2 + a.s2 * b.c2);
        return r;
    }
};

// The phase-shift polynomial of a traceless matrix [[a, b], [c, -a]]:
//   c cos^2(t) - b sin^2(t) - a sin(2t)
// written in the {1, cos 2t, sin 2t} basis.
inline TrigPoly4 phase_poly(const Mat2& p) {
    TrigPoly4 out;
    out.c0 = 0.5 * (p.c - p.b);
    out.c2 = 0.5 * (p.c + p.b);
    out.s2 = -p.a;
    return out;
}

}  // namespace bandedge
