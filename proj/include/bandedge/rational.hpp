#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bandedge {

// Exact rational arithmetic for anomaly exponents. Tests like
// eta_K == 2*eta_1 and the basis-change bookkeeping must hold exactly,
// not up to floating-point rounding.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n) : num(n), den(1) {}  // NOLINT(google-explicit-constructor)
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw std::invalid_argument("Rational: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
    friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
    friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
    friend Rational operator/(Rational a, Rational b) {
        if (b.num == 0) throw std::invalid_argument("Rational: division by zero");
        return {a.num * b.den, a.den * b.num};
    }
    friend Rational operator*(std::int64_t k, Rational a) { return {k * a.num, a.den}; }

    friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
    friend bool operator!=(Rational a, Rational b) { return !(a == b); }
    friend bool operator<(Rational a, Rational b) { return a.num * b.den < b.num * a.den; }
    friend bool operator<=(Rational a, Rational b) { return a.num * b.den <= b.num * a.den; }
    friend bool operator>(Rational a, Rational b) { return b < a; }
    friend bool operator>=(Rational a, Rational b) { return b <= a; }

    std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }

    // Accepts "4/3", "2", or a decimal like "0.75" (converted with denominator
    // a power of ten, then reduced).
    static Rational parse(const std::string& s) {
        auto slash = s.find('/');
        if (slash != std::string::npos) {
            return {std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))};
        }
        auto dot = s.find('.');
        if (dot == std::string::npos) return {std::stoll(s), 1};
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        std::int64_t den = 1;
        for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
        return {std::stoll(digits), den};
    }

    // Nearest rational with denominator <= max_den (continued fractions).
    static Rational from_double(double x, std::int64_t max_den = 64) {
        std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
        double v = x;
        for (int i = 0; i < 40; ++i) {
            const auto a = static_cast<std::int64_t>(std::floor(v));
            std::int64_t p2 = a * p1 + p0, q2 = a * q1 + q0;
            if (q2 > max_den) break;
            p0 = p1;
            q0 = q1;
            p1 = p2;
            q1 = q2;
            const double frac = v - static_cast<double>(a);
            if (frac < 1e-12) break;
            v = 1.0 / frac;
        }
        return {p1, q1};
    }
};

}  // namespace bandedge
