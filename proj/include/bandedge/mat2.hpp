#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace bandedge {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Vec2 {
    double x = 0, y = 0;
};

// Real 2x2 matrix, row-major. Transfer matrices and basis changes are
// carried as plain values; unimodularity is a caller-side contract checked
// by is_unimodular().
struct Mat2 {
    double a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]

    static Mat2 identity() { return {1, 0, 0, 1}; }
    static Mat2 diag(double u, double v) { return {u, 0, 0, v}; }
    static Mat2 rotation(double phi) { return {std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi)}; }

    double det() const { return a * d - b * c; }
    double trace() const { return a + d; }
    double norm_inf() const { return std::max(std::max(std::abs(a), std::abs(b)), std::max(std::abs(c), std::abs(d))); }
    double frob() const { return std::sqrt(a * a + b * b + c * c + d * d); }

    Mat2 transpose() const { return {a, c, b, d}; }
    Mat2 inverse() const {
        const double dt = det();
        if (dt == 0.0) throw std::domain_error("Mat2: singular matrix");
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

    friend Mat2 operator*(const Mat2& l, const Mat2& r) {
        return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d, l.c * r.a + l.d * r.c, l.c * r.b + l.d * r.d};
    }
    friend Mat2 operator+(const Mat2& l, const Mat2& r) { return {l.a + r.a, l.b + r.b, l.c + r.c, l.d + r.d}; }
    friend Mat2 operator-(const Mat2& l, const Mat2& r) { return {l.a - r.a, l.b - r.b, l.c - r.c, l.d - r.d}; }
    friend Mat2 operator*(double s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }
    friend Mat2 operator-(const Mat2& m) { return {-m.a, -m.b, -m.c, -m.d}; }
};

inline bool is_unimodular(const Mat2& m, double tol = 1e-10) {
    const double scale = std::max(1.0, m.frob() * m.frob());
    return std::abs(m.det() - 1.0) <= tol * scale;
}

// Value plus first derivative with respect to one declared scalar (E or
// lambda). The product rule is exact by construction.
struct JetMat2 {
    Mat2 value;
    Mat2 d;

    friend JetMat2 operator*(const JetMat2& l, const JetMat2& r) {
        return {l.value * r.value, l.d * r.value + l.value * r.d};
    }
    static JetMat2 constant(const Mat2& m) { return {m, Mat2{}}; }
};

// exp of a traceless 2x2 matrix, closed form via X^2 = -det(X) * I.
inline Mat2 exp_traceless(const Mat2& x) {
    const double q = -x.det();  // X^2 = q * I
    double ch, sh;              // exp(X) = ch * I + sh * X
    if (q > 1e-12) {
        const double r = std::sqrt(q);
        ch = std::cosh(r);
        sh = std::sinh(r) / r;
    } else if (q < -1e-12) {
        const double r = std::sqrt(-q);
        ch = std::cos(r);
        sh = std::sin(r) / r;
    } else {
        ch = 1.0 + q / 2.0;
        sh = 1.0 + q / 6.0;
    }
    Mat2 out = sh * x;
    out.a += ch;
    out.d += ch;
    return out;
}

// Principal logarithm of an SL(2,R) matrix with trace > -2 (elliptic angle
// taken in (-pi, pi), parabolic/hyperbolic handled via the matching closed
// form). For trace <= -2 callers pass -M and keep the sign outside.
inline Mat2 log_sl2(const Mat2& m, double det_tol = 1e-8) {
    if (std::abs(m.det() - 1.0) > det_tol * std::max(1.0, m.frob() * m.frob()))
        throw std::domain_error("log_sl2: determinant not 1");
    const double t = 0.5 * m.trace();
    if (t <= -1.0) throw std::domain_error("log_sl2: trace <= -2, pass the negated matrix");
    double factor;
    const double u = t - 1.0;
    if (std::abs(u) < 1e-8) {
        // phi/sin(phi) and w/sinh(w) agree to this order in (t - 1)
        factor = 1.0 - u / 3.0 + 2.0 * u * u / 15.0;
    } else if (t < 1.0) {
        const double phi = std::acos(std::clamp(t, -1.0, 1.0));
        factor = phi / std::sin(phi);
    } else {
        const double w = std::acosh(t);
        factor = w / std::sinh(w);
    }
    Mat2 x = m;
    x.a -= t;
    x.d -= t;
    return factor * x;
}

}  // namespace bandedge
