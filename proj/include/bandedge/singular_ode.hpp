#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bandedge/smooth_fn.hpp"

namespace bandedge {

// --------------------------------------------------------------------------
// Singular first order ODE  p y' + q y = r  on an interval (a, b) with one
// interior point x_hat where p (and possibly q, r) vanish. Classification
// and solution construction per the seven cases of the singular-point
// analysis; the solver is an exponential-integrator march with an
// integration-by-parts closure inside boundary layers.
// --------------------------------------------------------------------------

// Order of the zero of f at x_hat: smallest m <= max_order with
// |f^(m)(x_hat)| > tol * scale. Returns max_order + 1 if everything below
// tol (callers decide whether that means "identically zero" or an error).
inline int zero_order_or_flat(const SmoothFn& f, double x_hat, int max_order = 6, double tol = 1e-9) {
    double scale = 1.0;
    for (int k = 0; k <= max_order; ++k) scale = std::max(scale, std::abs(f(x_hat, k)));
    for (int m = 0; m <= max_order; ++m)
        if (std::abs(f(x_hat, m)) > tol * scale) return m;
    return max_order + 1;
}

inline int zero_order(const SmoothFn& f, double x_hat, int max_order = 6, double tol = 1e-9) {
    const int m = zero_order_or_flat(f, x_hat, max_order, tol);
    if (m > max_order) throw std::domain_error("zero_order: order > 6 unsupported");
    return m;
}

struct ODEProblem {
    SmoothFn p, q, r;
    double a = 0, b = 1;
    std::optional<double> x_hat;
};

enum class ODECase {
    Regular,          // (i)   l <= 0: one global parameter
    UniqueOrder1,     // (ii)  l = 1, d(p/q) > 0: unique
    TwoParamOrder1,   // (iii) l = 1, d(p/q) < 0: one parameter per side
    EvenUniqueRight,  // (iv)  l even >= 2, d^l(p/q) > 0: unique right, free left
    EvenUniqueLeft,   // (v)   l even >= 2, d^l(p/q) < 0: unique left, free right
    OddUnique,        // (vi)  l odd >= 3, d^l(p/q) > 0: unique
    OddTwoParam,      // (vii) l odd >= 3, d^l(p/q) < 0: one parameter per side
};

inline const char* to_string(ODECase c) {
    switch (c) {
        case ODECase::Regular: return "(i)";
        case ODECase::UniqueOrder1: return "(ii)";
        case ODECase::TwoParamOrder1: return "(iii)";
        case ODECase::EvenUniqueRight: return "(iv)";
        case ODECase::EvenUniqueLeft: return "(v)";
        case ODECase::OddUnique: return "(vi)";
        case ODECase::OddTwoParam: return "(vii)";
    }
    return "?";
}

struct CaseLabel {
    ODECase ode_case = ODECase::Regular;
    int free_params_left = 0;
    int free_params_right = 0;
    int lp = 0, lq = 0, lr = 0;
    double discriminant = 0.0;             // d^l (p/q)(x_hat) for l > 0
    std::optional<double> boundary_value;  // lim r/q when finite
    int guaranteed_smoothness = 6;         // C^n guarantee at x_hat (capped at 6)
};

inline CaseLabel classify(const ODEProblem& prob) {
    CaseLabel out;
    if (!prob.x_hat) {
        out.ode_case = ODECase::Regular;
        out.free_params_left = 1;
        return out;
    }
    const double xh = *prob.x_hat;
    out.lp = zero_order(prob.p, xh);
    out.lq = zero_order(prob.q, xh);
    out.lr = zero_order_or_flat(prob.r, xh);  // r may vanish identically

    if (out.lr < std::min(out.lp, out.lq))
        throw std::domain_error("classify: no C1 solution (inhomogeneity vanishes slower than p and q)");

    // boundary value lim r/q, finite when lr >= lq
    if (out.lr > out.lq)
        out.boundary_value = 0.0;
    else if (out.lr == out.lq)
        out.boundary_value = prob.r(xh, out.lr) / prob.q(xh, out.lq);

    const int l = out.lp - out.lq;
    if (l <= 0) {
        out.ode_case = ODECase::Regular;
        out.free_params_left = 1;  // one global constant; the sides are coupled
        out.free_params_right = 0;
        out.guaranteed_smoothness = std::max(0, 6 - out.lp + 1);
        return out;
    }

    // d^l (p/q)(x_hat) = l! * [p^(lp)/lp!] / [q^(lq)/lq!]
    double fact = 1.0;
    for (int k = 2; k <= l; ++k) fact *= k;
    double p_lead = prob.p(xh, out.lp), q_lead = prob.q(xh, out.lq);
    for (int k = 2; k <= out.lp; ++k) p_lead /= k;
    for (int k = 2; k <= out.lq; ++k) q_lead /= k;
    out.discriminant = fact * p_lead / q_lead;
    out.guaranteed_smoothness = std::max(0, 6 - out.lq);

    if (l == 1) {
        if (out.discriminant > 0) {
            out.ode_case = ODECase::UniqueOrder1;
        } else {
            out.ode_case = ODECase::TwoParamOrder1;
            out.free_params_left = out.free_params_right = 1;
            // only C^n with n < 1/|d(p/q)| is guaranteed here
            const double bound = 1.0 / std::abs(out.discriminant);
            const int n = bound > 6.0 ? 6 : std::max(0, static_cast<int>(std::ceil(bound)) - 1);
            out.guaranteed_smoothness = std::min(out.guaranteed_smoothness, n);
        }
    } else if (l % 2 == 0) {
        if (out.discriminant > 0) {
            out.ode_case = ODECase::EvenUniqueRight;
            out.free_params_left = 1;
        } else {
            out.ode_case = ODECase::EvenUniqueLeft;
            out.free_params_right = 1;
        }
    } else {
        if (out.discriminant > 0) {
            out.ode_case = ODECase::OddUnique;
        } else {
            out.ode_case = ODECase::OddTwoParam;
            out.free_params_left = out.free_params_right = 1;
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Exponential-integrator march
// --------------------------------------------------------------------------

namespace ode_detail {

inline constexpr double kGaussX[7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972, 0.0,
                                      0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
inline constexpr double kGaussW[7] = {0.1294849661688697, 0.2797053914892766, 0.3818300505051189, 0.4179591836734694,
                                      0.3818300505051189, 0.2797053914892766, 0.1294849661688697};

inline double safe_exp(double x) { return std::exp(std::clamp(x, -745.0, 709.0)); }

struct Coeffs {
    const SmoothFn* p;
    const SmoothFn* q;
    const SmoothFn* r;
    std::optional<double> x_hat;  // only needed when a removable 0/0 can occur
    double span = 1.0;

    // f/p with the removable singularity of the regular case (l <= 0)
    // resolved by reduced Taylor expansions around x_hat.
    double over_p(const SmoothFn& f, double x) const {
        if (x_hat && std::abs(x - *x_hat) < 1e-6 * span) {
            const double xh = *x_hat;
            const int lp = zero_order(*p, xh);
            if (lp > 0) {
                const double u = x - xh;
                double num = 0.0, den = 0.0, upow = 1.0, fact = 1.0;
                for (int k = lp; k > 1; --k) fact *= k;  // lp!
                double factk = fact;
                for (int k = 0; k + lp <= 6 && k <= 3; ++k) {
                    num += f(xh, lp + k) / factk * upow;
                    den += (*p)(xh, lp + k) / factk * upow;
                    upow *= u;
                    factk *= lp + k + 1;
                }
                return num / den;
            }
        }
        return f(x) / (*p)(x);
    }
    double q_over_p(double x) const { return over_p(*q, x); }
    double r_over_p(double x) const { return over_p(*r, x); }
};

// signed integral of q/p over [x0, x1] (x0, x1 in marching order)
inline double panel_dw(const Coeffs& c, double x0, double x1) {
    const double mid = 0.5 * (x0 + x1), half = 0.5 * (x1 - x0);
    double s = 0.0;
    for (int j = 0; j < 7; ++j) s += kGaussW[j] * c.q_over_p(mid + half * kGaussX[j]);
    return s * half;
}

// A_0 = r/q, A_{k+1} = A_k' * (p/q); integration-by-parts tail of the
// boundary-layer source integral.
inline std::array<double, 4> ibp_terms(const Coeffs& c, double x) {
    const Jet3 jp = Jet3::of(*c.p, x), jq = Jet3::of(*c.q, x), jr = Jet3::of(*c.r, x);
    const Jet3 poq = jp / jq;
    Jet3 A = jr / jq;
    std::array<double, 4> out{};
    out[0] = A.c[0];
    for (int k = 1; k < 4; ++k) {
        A = A.shift() * poq;
        out[k] = A.c[0];
    }
    return out;
}

// One panel of the update  y(x1) = e^{-dw} y(x0) + S  along the march, with
//   S = int_{x0}^{x1} e^{-(w(x1) - w(s))} (r/p)(s) ds.
// Subdivides until either the exponent variation is tame enough for Gauss
// quadrature or the integration-by-parts series has converged.
inline void panel_source(const Coeffs& c, double x0, double x1, int depth, double& dw_out, double& src_out) {
    const double dw = panel_dw(c, x0, x1);
    if (std::abs(dw) <= 2.0 || depth >= 14) {
        const double mid = 0.5 * (x0 + x1), half = 0.5 * (x1 - x0);
        double s = 0.0;
        for (int j = 0; j < 7; ++j) {
            const double x = mid + half * kGaussX[j];
            const double tail = panel_dw(c, x, x1);  // w(x1) - w(x)
            s += kGaussW[j] * safe_exp(-tail) * c.r_over_p(x);
        }
        dw_out = dw;
        src_out = s * half;
        return;
    }
    if (dw > 2.0 && c.q->eval(x0, 0) != 0.0 && c.q->eval(x1, 0) != 0.0) {
        const auto A1 = ibp_terms(c, x1);
        const auto A0 = ibp_terms(c, x0);
        const double damp = safe_exp(-dw);
        const double scale = std::max({std::abs(A1[0]), damp * std::abs(A0[0]), 1e-300});
        if (std::abs(A1[3]) + damp * std::abs(A0[3]) <= 1e-9 * scale) {
            double s = 0.0, sign = 1.0;
            for (int k = 0; k < 4; ++k, sign = -sign) s += sign * (A1[k] - damp * A0[k]);
            dw_out = dw;
            src_out = s;
            return;
        }
    }
    const double m = 0.5 * (x0 + x1);
    double dwa, sa, dwb, sb;
    panel_source(c, x0, m, depth + 1, dwa, sa);
    panel_source(c, m, x1, depth + 1, dwb, sb);
    dw_out = dwa + dwb;
    src_out = safe_exp(-dwb) * sa + sb;
}

}  // namespace ode_detail

// March the solution through `nodes` (any monotone order), starting from y0
// at nodes[0]. Optionally accumulates w(node) - w(nodes[0]) for the
// homogeneous solution e^{-w}.
inline std::vector<double> exp_march(const SmoothFn& p, const SmoothFn& q, const SmoothFn& r,
                                     const std::vector<double>& nodes, double y0,
                                     std::vector<double>* w_accum = nullptr,
                                     std::optional<double> x_hat = std::nullopt) {
    ode_detail::Coeffs c{&p, &q, &r, x_hat, std::abs(nodes.back() - nodes.front())};
    std::vector<double> y(nodes.size());
    y[0] = y0;
    if (w_accum) w_accum->assign(nodes.size(), 0.0);
    double w_cum = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        double dw, src;
        ode_detail::panel_source(c, nodes[i], nodes[i + 1], 0, dw, src);
        y[i + 1] = ode_detail::safe_exp(-dw) * y[i] + src;
        w_cum += dw;
        if (w_accum) (*w_accum)[i + 1] = w_cum;
    }
    return y;
}

// Taylor data of the continuous solution at the singular point. After
// normalizing the equation by q (reduced expansions when q itself
// vanishes), differentiation gives the recursion
//   (n P'(x_hat) + 1) y^(n) = R^(n) - sum_{j>=2} C(n,j) P^(j) y^(n-j+1),
// whose factor n P' + 1 is the paper's q_n.
inline std::vector<double> boundary_taylor(const ODEProblem& prob, double bv, int order = 3) {
    const double xh = *prob.x_hat;
    const int lq = zero_order(prob.q, xh);

    // reduced Taylor coefficients f^{(lq+k)}(xh) / (lq+k)! of f / u^{lq}
    auto reduced = [&](const SmoothFn& f) {
        std::array<double, 4> c{};
        double fact = 1.0;
        for (int k = 2; k <= lq; ++k) fact *= k;
        for (int k = 0; k <= 3 && lq + k <= 6; ++k) {
            c[k] = f(xh, lq + k) / fact;
            fact *= lq + k + 1;
        }
        return c;
    };
    const auto pc = reduced(prob.p), qc = reduced(prob.q), rc = reduced(prob.r);
    // P = p/q and R = r/q as order-3 jets at x_hat (derivatives, not Taylor coefficients)
    auto to_jet = [](const std::array<double, 4>& c) {
        return Jet3{{c[0], c[1], 2.0 * c[2], 6.0 * c[3]}};
    };
    const Jet3 P = to_jet(pc) / to_jet(qc);
    const Jet3 R = to_jet(rc) / to_jet(qc);

    std::vector<double> y{bv};
    auto binom = [](int n, int k) {
        double b = 1.0;
        for (int j = 0; j < k; ++j) b = b * (n - j) / (j + 1);
        return b;
    };
    for (int n = 1; n <= order && n <= 3; ++n) {
        const double qn = n * P.c[1] + 1.0;
        if (std::abs(qn) < 1e-12) break;  // q_n degenerates; lower-order data suffices
        double rhs = R.c[n];
        for (int j = 2; j <= n; ++j) rhs -= binom(n, j) * P.c[j] * y[n + 1 - j];
        y.push_back(rhs / qn);
    }
    return y;
}

inline double eval_taylor(const std::vector<double>& coef, double h) {
    double sum = 0.0, hk = 1.0, fact = 1.0;
    for (std::size_t k = 0; k < coef.size(); ++k) {
        if (k > 0) {
            hk *= h;
            fact *= static_cast<double>(k);
        }
        sum += coef[k] * hk / fact;
    }
    return sum;
}

enum class Side { Left, Right, Both };

struct ODESolution {
    std::vector<double> x;
    std::vector<double> y;
    double guard = 0.0;  // half-width of the guard band around x_hat (0 if none)
};

// Sampled solution on a uniform grid. Free parameters are the solution
// values at the outer interval ends (a on the left side, b on the right);
// requesting a parameter on a side where the solution is unique is the
// "non-integrable singularity" error. Inside the guard band the values come
// from the boundary condition plus a Taylor step.
inline ODESolution solve(const ODEProblem& prob, Side side, std::span<const double> params, int grid = 2001) {
    if (grid < 16) throw std::invalid_argument("solve: grid too coarse");
    const CaseLabel label = classify(prob);
    ODESolution sol;
    sol.x.resize(grid);
    sol.y.assign(grid, std::numeric_limits<double>::quiet_NaN());
    const double h = (prob.b - prob.a) / (grid - 1);
    for (int i = 0; i < grid; ++i) sol.x[i] = prob.a + i * h;

    if (label.ode_case == ODECase::Regular) {
        if (params.size() != 1) throw std::invalid_argument("solve: case (i) takes one global parameter");
        const bool from_left = side != Side::Right;
        std::vector<double> nodes = sol.x;
        if (!from_left) std::reverse(nodes.begin(), nodes.end());
        auto y = exp_march(prob.p, prob.q, prob.r, nodes, params[0], nullptr, prob.x_hat);
        for (int i = 0; i < grid; ++i) sol.y[i] = from_left ? y[i] : y[grid - 1 - i];
        return sol;
    }

    const double xh = *prob.x_hat;
    sol.guard = 1e-3 * (prob.b - prob.a);
    const double bv = label.boundary_value ? *label.boundary_value : 0.0;
    const auto taylor = boundary_taylor(prob, bv);

    const bool want_left = side != Side::Right, want_right = side != Side::Left;
    const std::size_t need = (want_left ? label.free_params_left : 0) + (want_right ? label.free_params_right : 0);
    if (params.size() != need) {
        if (params.size() > need)
            throw std::domain_error("solve: non-integrable singularity (no free parameter on a unique side)");
        throw std::invalid_argument("solve: wrong number of free parameters");
    }
    std::size_t next_param = 0;

    auto build_side = [&](bool left) {
        const bool unique = (left ? label.free_params_left : label.free_params_right) == 0;
        std::vector<int> idx;  // grid nodes strictly outside the guard band, ordered outward
        for (int i = 0; i < grid; ++i) {
            if (left && sol.x[i] <= xh - sol.guard) idx.push_back(i);
            if (!left && sol.x[i] >= xh + sol.guard) idx.push_back(i);
        }
        if (idx.empty()) return;
        if (left) std::reverse(idx.begin(), idx.end());  // from x_hat outward

        std::vector<double> nodes;
        if (unique) {
            // start at the guard edge with boundary Taylor data, march outward
            nodes.push_back(left ? xh - sol.guard : xh + sol.guard);
            for (int i : idx) nodes.push_back(sol.x[i]);
            auto y = exp_march(prob.p, prob.q, prob.r, nodes, eval_taylor(taylor, left ? -sol.guard : sol.guard));
            for (std::size_t k = 0; k < idx.size(); ++k) sol.y[idx[k]] = y[k + 1];
        } else {
            // march from the outer end toward the singularity; the free
            // parameter is the value at the outer end, carried by the
            // decaying homogeneous solution e^{-(w - w_outer)}
            const double cpar = params[next_param++];
            for (auto it = idx.rbegin(); it != idx.rend(); ++it) nodes.push_back(sol.x[*it]);
            std::vector<double> w;
            auto ypart = exp_march(prob.p, prob.q, prob.r, nodes, 0.0, &w);
            for (std::size_t k = 0; k < nodes.size(); ++k)
                sol.y[idx[idx.size() - 1 - k]] = ypart[k] + cpar * ode_detail::safe_exp(-w[k]);
        }
    };

    if (want_left) build_side(true);
    if (want_right) build_side(false);

    for (int i = 0; i < grid; ++i) {
        const double d = sol.x[i] - xh;
        if (std::abs(d) < sol.guard && ((d < 0 && want_left) || (d >= 0 && want_right)))
            sol.y[i] = eval_taylor(taylor, d);
    }
    return sol;
}

}  // namespace bandedge
