#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "bandedge/trigpoly.hpp"

namespace bandedge {

// A scalar function together with its derivatives up to order 6, supplied
// analytically. The singular-ODE classification never uses finite
// differences; coefficients in this project are trigonometric polynomials
// or hand-written test functions, so exact derivatives are always available.
struct SmoothFn {
    std::function<double(double, int)> eval;  // (x, derivative order)

    double operator()(double x, int k = 0) const { return eval(x, k); }

    static SmoothFn constant(double c) {
        return {[c](double, int k) { return k == 0 ? c : 0.0; }};
    }

    static SmoothFn from_trigpoly(const TrigPoly4& p) {
        return {[p](double x, int k) { return p.deriv(x, k); }};
    }

    // monomial a * (x - x0)^n
    static SmoothFn monomial(double a, double x0, int n) {
        return {[a, x0, n](double x, int k) {
            if (k > n) return 0.0;
            double coef = a;
            for (int j = 0; j < k; ++j) coef *= n - j;
            return coef * std::pow(x - x0, n - k);
        }};
    }
};

// Truncated Taylor arithmetic of order 3 (value and three derivatives).
// Used to assemble the integration-by-parts tail of boundary-layer panels.
struct Jet3 {
    std::array<double, 4> c{};  // c[k] = f^{(k)}(x)

    static Jet3 of(const SmoothFn& f, double x) {
        Jet3 j;
        for (int k = 0; k < 4; ++k) j.c[k] = f(x, k);
        return j;
    }

    friend Jet3 operator+(const Jet3& a, const Jet3& b) {
        Jet3 r;
        for (int k = 0; k < 4; ++k) r.c[k] = a.c[k] + b.c[k];
        return r;
    }

    friend Jet3 operator*(const Jet3& a, const Jet3& b) {
        // derivatives of a product (Leibniz), truncated at order 3
        Jet3 r;
        r.c[0] = a.c[0] * b.c[0];
        r.c[1] = a.c[1] * b.c[0] + a.c[0] * b.c[1];
        r.c[2] = a.c[2] * b.c[0] + 2 * a.c[1] * b.c[1] + a.c[0] * b.c[2];
        r.c[3] = a.c[3] * b.c[0] + 3 * a.c[2] * b.c[1] + 3 * a.c[1] * b.c[2] + a.c[0] * b.c[3];
        return r;
    }

    friend Jet3 operator/(const Jet3& a, const Jet3& b) {
        if (b.c[0] == 0.0) throw std::domain_error("Jet3: division by zero value");
        Jet3 r;
        r.c[0] = a.c[0] / b.c[0];
        r.c[1] = (a.c[1] - r.c[0] * b.c[1]) / b.c[0];
        r.c[2] = (a.c[2] - r.c[0] * b.c[2] - 2 * r.c[1] * b.c[1]) / b.c[0];
        r.c[3] = (a.c[3] - r.c[0] * b.c[3] - 3 * r.c[1] * b.c[2] - 3 * r.c[2] * b.c[1]) / b.c[0];
        return r;
    }

    // jet of f' (one order lower; the top coefficient is lost)
    Jet3 shift() const { return Jet3{{c[1], c[2], c[3], 0.0}}; }
};

}  // namespace bandedge
