#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bandedge/anomaly.hpp"
#include "bandedge/singular_ode.hpp"
#include "bandedge/trigpoly.hpp"

namespace bandedge {

// --------------------------------------------------------------------------
// Drift/diffusion polynomials of the phase dynamics at a second-order
// anomaly:  p = E(p_1^2),  q = 2 E(p_K) + E(p_1 d_theta p_1).
// Both are degree-4 trigonometric polynomials on the circle of length pi.
// --------------------------------------------------------------------------

struct FPCoefficients {
    TrigPoly4 p, q;
    bool degenerate = false;  // p identically zero
};

inline FPCoefficients fp_coefficients(const AnomalyExpansion& e) {
    const auto cls = classify(e);
    if (cls.order != AnomalyOrder::Second) throw std::domain_error("fp_coefficients: anomaly is not second order");
    const auto& p1 = e.terms.front();
    const auto& pK = e.terms[e.K_index()];

    const TrigPoly4 poly_mean = phase_poly(p1.mean);
    const TrigPoly4 poly_rand = phase_poly(p1.rand_coeff);
    FPCoefficients out;
    out.p = TrigPoly4::product2(poly_mean, poly_mean) + p1.xi_m2 * TrigPoly4::product2(poly_rand, poly_rand);
    out.q = 2.0 * phase_poly(pK.mean) + TrigPoly4::product2(poly_mean, poly_mean.derivative()) +
            p1.xi_m2 * TrigPoly4::product2(poly_rand, poly_rand.derivative());
    out.degenerate = out.p.max_abs_coeff() < 1e-14;
    return out;
}

// --------------------------------------------------------------------------
// Groundstate of the Fokker-Planck operator L* = d_theta (d_theta p - q):
// integrate once to (p d_theta + q~) rho = C with q~ = p' - q, and build the
// normalized non-negative periodic solution case by case.
// --------------------------------------------------------------------------

enum class GroundstateCase {
    Regular,             // p > 0 on the circle
    SingleZero,          // one zero of p (order 2 or 4), q~(theta_hat) != 0
    TwoZerosSameSign,    // two zeros, q~ of equal sign: cut twice, C != 0
    SplitSupport,        // zeros trapping an arc: C = 0, density vanishes outside
    Dirac,               // order-4 common zero with stable drift: the peak is the groundstate
    SituationI,          // order-2 common zero, attracting: only the zero solution is continuous
    SituationIIBoundary, // order-4 common zero with the equality cases: reported, not resolved
};

struct ZeroInfo {
    double theta = 0;
    int order = 0;       // 2 or 4
    double q_tilde = 0;  // q~(theta)
    bool common = false; // q~ vanishes too (equivalently q(theta) = 0)
    int stability_l = 0; // order of the first nonvanishing odd derivative of q~ (1 or 3; 0 = none)
    double stability_sign = 0;
};

struct GroundstateClassification {
    GroundstateCase tag = GroundstateCase::Regular;
    std::vector<ZeroInfo> zeros;
    std::optional<double> theta_hat;  // Dirac position
    bool degenerate_dirac = false;    // two stable Dirac points
    bool possibly_nonsmooth = false;  // repelling common zero inside the support
};

namespace fp_detail {

inline std::vector<double> find_zeros(const TrigPoly4& p, int scan = 10000) {
    const double scale = std::max(p.max_abs_coeff(), 1e-300);
    std::vector<double> zeros;
    const double h = kPi / scan;
    auto pv = [&](int i) { return p(i * h); };
    for (int i = 0; i < scan; ++i) {
        const double v0 = pv(i - 1), v1 = pv(i), v2 = pv(i + 1);
        if (v1 <= v0 && v1 < v2 && v1 < 1e-6 * scale) {
            // refine the minimum by bisection on p'
            double lo = (i - 1) * h, hi = (i + 1) * h;
            const TrigPoly4 dp = p.derivative();
            double flo = dp(lo);
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = dp(mid);
                if ((flo <= 0) == (fm <= 0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            double t = 0.5 * (lo + hi);
            // the sign of p' is pure rounding noise within ~eps^{1/m} of a
            // zero of order m; polish on p^{(m-1)}, which has a simple zero
            const int m = zero_order_or_flat(SmoothFn::from_trigpoly(p), t);
            if (m >= 2 && m <= 6) {
                for (int it = 0; it < 50; ++it) {
                    const double f = p.deriv(t, m - 1), df = p.deriv(t, m);
                    if (df == 0.0) break;
                    const double step = f / df;
                    t -= step;
                    if (std::abs(step) < 1e-15) break;
                }
            }
            if (t < 0) t += kPi;
            if (t >= kPi) t -= kPi;
            if (p(t) < 1e-10 * scale) zeros.push_back(t);
        }
    }
    std::sort(zeros.begin(), zeros.end());
    zeros.erase(std::unique(zeros.begin(), zeros.end(), [&](double a, double b) { return std::abs(a - b) < 1e-6; }),
                zeros.end());
    if (zeros.size() >= 2 && zeros.back() - zeros.front() > kPi - 1e-6) zeros.pop_back();
    return zeros;
}

}  // namespace fp_detail

inline GroundstateClassification classify_groundstate(const TrigPoly4& p, const TrigPoly4& q, int scan = 10000) {
    const double scale = std::max(p.max_abs_coeff(), 1e-300);
    const double h = kPi / scan;
    for (int i = 0; i < scan; ++i)
        if (p(i * h) < -1e-10 * scale) throw std::domain_error("classify_groundstate: p is not nonnegative");

    GroundstateClassification out;
    const TrigPoly4 qt = p.derivative() - q;
    const SmoothFn p_fn = SmoothFn::from_trigpoly(p);
    const SmoothFn qt_fn = SmoothFn::from_trigpoly(qt);
    for (double z : fp_detail::find_zeros(p, scan)) {
        ZeroInfo info;
        info.theta = z;
        info.order = zero_order(p_fn, z);
        info.q_tilde = qt(z);
        const double qscale = std::max(1.0, qt.max_abs_coeff());
        info.common = std::abs(info.q_tilde) <= 1e-8 * qscale;
        if (info.common) {
            for (int l : {1, 3}) {
                const double d = qt.deriv(z, l);
                if (std::abs(d) > 1e-8 * qscale) {
                    info.stability_l = l;
                    info.stability_sign = d > 0 ? 1.0 : -1.0;
                    break;
                }
                // an even derivative in between makes the point one-sided
                if (l == 1 && std::abs(qt.deriv(z, 2)) > 1e-8 * qscale) break;
            }
        }
        out.zeros.push_back(info);
    }

    if (out.zeros.empty()) {
        out.tag = GroundstateCase::Regular;
        return out;
    }

    int stable_common = 0;
    bool order2_stable = false, repelling_common = false, boundary_common = false;
    for (const auto& z : out.zeros) {
        if (!z.common) continue;
        if (z.stability_l == 1 && z.stability_sign > 0) {
            ++stable_common;
            if (z.order == 2) order2_stable = true;
            if (!out.theta_hat) out.theta_hat = z.theta;
        } else if (z.stability_l > 0 && z.stability_sign < 0) {
            repelling_common = true;
        } else {
            boundary_common = true;  // vanishing or third-order-only drift derivative
        }
    }
    if (stable_common >= 2) {
        out.tag = GroundstateCase::Dirac;
        out.degenerate_dirac = true;
        return out;
    }
    if (stable_common == 1) {
        out.tag = order2_stable ? GroundstateCase::SituationI : GroundstateCase::Dirac;
        return out;
    }
    if (boundary_common) {
        out.tag = GroundstateCase::SituationIIBoundary;
        return out;
    }
    if (repelling_common) {
        // a repelling common zero still admits the homogeneous continuous
        // solution C e^{-w~}; treat it as a trapping endpoint
        out.possibly_nonsmooth = true;
        if (out.zeros.size() == 1) {
            out.tag = GroundstateCase::SplitSupport;  // support is the full cut circle
            return out;
        }
    }
    if (out.zeros.size() == 1) {
        out.tag = GroundstateCase::SingleZero;
        return out;
    }
    if (out.zeros.size() == 2) {
        const double s1 = out.zeros[0].common ? out.zeros[0].stability_sign : (out.zeros[0].q_tilde > 0 ? 1.0 : -1.0);
        const double s2 = out.zeros[1].common ? out.zeros[1].stability_sign : (out.zeros[1].q_tilde > 0 ? 1.0 : -1.0);
        out.tag = (s1 * s2 > 0 && !repelling_common) ? GroundstateCase::TwoZerosSameSign : GroundstateCase::SplitSupport;
        return out;
    }
    throw std::domain_error("classify_groundstate: more than two zeros of p (degree bound violated)");
}

struct Groundstate {
    enum class Kind { Density, Dirac } kind = Kind::Density;
    std::vector<double> grid;  // n uniform points on [0, pi)
    std::vector<double> rho;
    double theta_hat = 0;  // Dirac position
    double C = 0;          // integration constant of (p d + q~) rho = C
    GroundstateCase case_tag = GroundstateCase::Regular;
    bool possibly_nonsmooth = false;
    double guard = 0;  // cut guard half-width (0 for regular/Dirac)
};

namespace fp_detail {

// march (p d_theta + q~) rho = c_rhs through angular nodes (signed order)
inline std::vector<double> march_rho(const TrigPoly4& p, const TrigPoly4& qt, double c_rhs,
                                     const std::vector<double>& nodes, double rho0,
                                     std::vector<double>* w = nullptr) {
    return exp_march(SmoothFn::from_trigpoly(p), SmoothFn::from_trigpoly(qt), SmoothFn::constant(c_rhs), nodes, rho0,
                     w);
}

struct CutGrid {
    std::vector<double> tau;      // cut coordinates of grid points, ascending, outside guards
    std::vector<int> index;       // output indices matching tau
};

// grid points mapped into the cut coordinate tau = dir * (theta - theta_hat) mod pi
inline CutGrid cut_grid(const std::vector<double>& grid, double theta_hat, int dir, double guard_lo, double guard_hi) {
    CutGrid out;
    std::vector<std::pair<double, int>> items;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double tau = std::fmod(dir * (grid[i] - theta_hat), kPi);
        if (tau < 0) tau += kPi;
        if (tau >= guard_lo && tau <= kPi - guard_hi) items.emplace_back(tau, static_cast<int>(i));
    }
    std::sort(items.begin(), items.end());
    for (auto& [t, i] : items) {
        out.tau.push_back(t);
        out.index.push_back(i);
    }
    return out;
}

}  // namespace fp_detail

// Normalized groundstate density (or Dirac peak) of L* for the given (p, q).
inline Groundstate groundstate(const TrigPoly4& p, const TrigPoly4& q, int n_grid = 4096) {
    const auto cls = classify_groundstate(p, q);
    Groundstate out;
    out.case_tag = cls.tag;
    out.possibly_nonsmooth = cls.possibly_nonsmooth;
    out.grid.resize(n_grid);
    const double h = kPi / n_grid;
    for (int i = 0; i < n_grid; ++i) out.grid[i] = i * h;

    if (cls.tag == GroundstateCase::SituationI)
        throw std::domain_error("groundstate: no normalizable groundstate (situation I, only the zero solution)");
    if (cls.tag == GroundstateCase::SituationIIBoundary)
        throw std::domain_error("groundstate: situation II boundary case detected, not resolved");
    if (cls.tag == GroundstateCase::Dirac) {
        if (cls.degenerate_dirac)
            throw std::domain_error("groundstate: degenerate groundstate (two stable Dirac points)");
        out.kind = Groundstate::Kind::Dirac;
        out.theta_hat = *cls.theta_hat;
        out.rho.assign(n_grid, 0.0);
        out.C = 0.0;
        return out;
    }

    const TrigPoly4 qt = p.derivative() - q;
    out.rho.assign(n_grid, 0.0);

    auto normalize = [&]() {
        double z = 0.0;
        for (double v : out.rho) z += v * h;
        if (z == 0.0) throw std::domain_error("groundstate: vanishing density");
        for (auto& v : out.rho) v /= z;
        return z;
    };

    if (cls.tag == GroundstateCase::Regular) {
        // periodic closure of the affine march: rho(0) = Psi / (1 - Phi)
        std::vector<double> nodes(n_grid + 1);
        double wtot_probe = 0.0;
        {
            // probe marching direction: total w over the circle
            std::vector<double> probe{0.0, kPi};
            std::vector<double> w;
            fp_detail::march_rho(p, qt, 0.0, probe, 0.0, &w);
            wtot_probe = w.back();
        }
        const int dir = wtot_probe >= 0 ? +1 : -1;
        for (int i = 0; i <= n_grid; ++i) nodes[i] = dir > 0 ? i * h : kPi - i * h;
        std::vector<double> w;
        auto y = fp_detail::march_rho(p, qt, 1.0, nodes, 0.0, &w);
        const double phi = ode_detail::safe_exp(-w.back());
        if (std::abs(1.0 - phi) > 1e-9) {
            const double rho0 = y.back() / (1.0 - phi);
            auto ry = fp_detail::march_rho(p, qt, 1.0, nodes, rho0);
            for (int i = 0; i < n_grid; ++i) out.rho[dir > 0 ? i : (n_grid - i) % n_grid] = ry[i];
            const double z = normalize();
            out.C = 1.0 / z;
        } else {
            // w is pi-periodic: C = 0 and rho is proportional to e^{-w}
            double wmin = 0.0;
            for (double v : w) wmin = std::min(wmin, v);
            for (int i = 0; i < n_grid; ++i)
                out.rho[dir > 0 ? i : (n_grid - i) % n_grid] = ode_detail::safe_exp(-(w[i] - wmin));
            normalize();
            out.C = 0.0;
        }
        return out;
    }

    if (cls.tag == GroundstateCase::SplitSupport) {
        // density proportional to e^{-w~} on the trapped arc, zero outside
        double a, b;  // arc from a to b counterclockwise
        if (cls.zeros.size() == 1) {
            a = cls.zeros[0].theta;
            b = a + kPi;
        } else {
            const double t1 = cls.zeros[0].theta, t2 = cls.zeros[1].theta;
            auto trapped_left = [&](const ZeroInfo& z) { return z.common ? z.stability_sign < 0 : z.q_tilde < 0; };
            if (trapped_left(cls.zeros[0]) && (cls.zeros[1].common ? cls.zeros[1].stability_sign > 0
                                                                   : cls.zeros[1].q_tilde > 0)) {
                a = t1;
                b = t2;
            } else {
                a = t2;
                b = t1 + kPi;
            }
        }
        out.guard = 1e-3 * kPi;
        const double mid = 0.5 * (a + b);
        // log rho = -w~ relative to the arc midpoint, marched outward on
        // both sides; the density vanishes outside the arc
        std::vector<std::pair<int, double>> logs;  // (output index, -w)
        for (int side = 0; side < 2; ++side) {
            std::vector<std::pair<double, int>> tagged;
            for (int i = 0; i < n_grid; ++i) {
                double tt = out.grid[i];
                while (tt < a - 1e-12) tt += kPi;
                while (tt > b + 1e-12) tt -= kPi;
                if (!(tt > a + out.guard && tt < b - out.guard)) continue;
                if ((side == 0) == (tt >= mid)) tagged.emplace_back(tt, i);
            }
            std::sort(tagged.begin(), tagged.end());
            if (side == 1) std::reverse(tagged.begin(), tagged.end());
            std::vector<double> ns{mid};
            for (auto& [tt, i] : tagged) ns.push_back(tt);
            std::vector<double> w;
            fp_detail::march_rho(p, qt, 0.0, ns, 0.0, &w);
            for (std::size_t k = 0; k < tagged.size(); ++k) logs.emplace_back(tagged[k].second, -w[k + 1]);
        }
        double lmax = -1e300;
        for (auto& [i, lw] : logs) lmax = std::max(lmax, lw);
        for (auto& [i, lw] : logs) out.rho[i] = ode_detail::safe_exp(lw - lmax);
        normalize();
        out.C = 0.0;
        return out;
    }

    // SingleZero and TwoZerosSameSign: cut the circle at a zero and march in
    // the direction where e^{-w~} decays, re-initializing at each singular
    // point from the boundary condition rho = C / q~.
    out.guard = 1e-3 * kPi;
    const double theta0 = cls.zeros[0].theta;
    const int dir = cls.zeros[0].q_tilde > 0 ? +1 : -1;

    // singular points in cut coordinates
    std::vector<double> cuts{0.0};
    if (cls.zeros.size() == 2) {
        double tau2 = std::fmod(dir * (cls.zeros[1].theta - theta0), kPi);
        if (tau2 < 0) tau2 += kPi;
        cuts.push_back(tau2);
    }
    cuts.push_back(kPi);

    auto angle_of = [&](double tau) { return theta0 + dir * tau; };
    auto bv_at = [&](double theta) { return 1.0 / qt(theta); };

    // Taylor data at each singular point for guard-band fill
    auto taylor_at = [&](double theta) {
        ODEProblem prob{SmoothFn::from_trigpoly(p), SmoothFn::from_trigpoly(qt), SmoothFn::constant(1.0),
                        theta - 0.5, theta + 0.5, theta};
        return boundary_taylor(prob, bv_at(theta));
    };

    std::vector<double> guard_mass_contrib;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        const double t_lo = cuts[seg] + out.guard, t_hi = cuts[seg + 1] - out.guard;
        std::vector<std::pair<double, int>> tagged;
        for (int i = 0; i < n_grid; ++i) {
            double tau = std::fmod(dir * (out.grid[i] - theta0), kPi);
            if (tau < 0) tau += kPi;
            if (tau >= t_lo && tau <= t_hi) tagged.emplace_back(tau, i);
        }
        std::sort(tagged.begin(), tagged.end());
        std::vector<double> ns{t_lo};
        for (auto& [tau, i] : tagged) ns.push_back(tau);
        // angular nodes
        std::vector<double> angular(ns.size());
        for (std::size_t k = 0; k < ns.size(); ++k) angular[k] = angle_of(ns[k]);
        const auto tay = taylor_at(angle_of(cuts[seg]));
        const double y0 = eval_taylor(tay, dir * out.guard);
        auto y = fp_detail::march_rho(p, qt, 1.0, angular, y0);
        for (std::size_t k = 0; k < tagged.size(); ++k) out.rho[tagged[k].second] = y[k + 1];
    }

    // guard bands at the singular points
    for (int i = 0; i < n_grid; ++i) {
        double tau = std::fmod(dir * (out.grid[i] - theta0), kPi);
        if (tau < 0) tau += kPi;
        for (double cut : cuts) {
            const double d = tau - cut;
            if (std::abs(d) < out.guard || std::abs(d - kPi) < out.guard) {
                const double cut_angle = angle_of(cut);
                const auto tay = taylor_at(cut_angle);
                const double dd = std::abs(d) < out.guard ? d : d - kPi;
                out.rho[i] = eval_taylor(tay, dir * dd);
            }
        }
    }
    const double z = normalize();
    out.C = 1.0 / z;
    return out;
}

// Expectation of an observable under the groundstate.
inline double expectation(const Groundstate& g, const std::function<double(double)>& f) {
    if (g.kind == Groundstate::Kind::Dirac) return f(g.theta_hat);
    double sum = 0.0;
    const double h = kPi / static_cast<double>(g.grid.size());
    for (std::size_t i = 0; i < g.grid.size(); ++i) sum += g.rho[i] * f(g.grid[i]);
    return sum * h;
}

// --------------------------------------------------------------------------
// Parabolic-regime theory: the explicit normal-form polynomials
//   p = m2 cos^4,  q = eps_x - 1 + (eps_x + 1) cos 2t - 2 m2 cos^3 sin,
// their groundstate, and the scaling coefficients
//   gamma(lambda) = B lambda^{2/3},  N - N_0 = A lambda^{2/3}
// in the canonical orientation (lower-edge normal form, per unit cell).
// --------------------------------------------------------------------------

struct ParabolicTheory {
    double A = 0;  // IDS shift coefficient (canonical orientation, per cell)
    double B = 0;  // Lyapunov coefficient (per cell)
    Groundstate rho;
    TrigPoly4 p, q;
};

inline ParabolicTheory parabolic_theory(double eps_x, double m2, int n_grid = 4096) {
    if (!(m2 > 0)) throw std::invalid_argument("parabolic_theory: m2 must be positive");
    AnomalyExpansion e;
    ExpansionTerm t1;
    t1.eta = Rational(1, 3);
    t1.rand_coeff = Mat2{0, 0, 1, 0};
    t1.xi_m2 = m2;
    ExpansionTerm tK;
    tK.eta = Rational(2, 3);
    tK.mean = Mat2{0, 1, eps_x, 0};
    e.terms = {t1, tK};
    const auto co = fp_coefficients(e);

    ParabolicTheory out;
    out.p = co.p;
    out.q = co.q;
    out.rho = groundstate(co.p, co.q, n_grid);
    const double ic2 = expectation(out.rho, [](double t) { return std::cos(2 * t); });
    const double is2 = expectation(out.rho, [](double t) { return std::sin(2 * t); });
    const double ic4 = expectation(out.rho, [](double t) { return std::cos(4 * t); });
    const double is4 = expectation(out.rho, [](double t) { return std::sin(4 * t); });
    out.B = 0.5 * (eps_x + 1.0) * is2 + (m2 / 8.0) * (1.0 + 2.0 * ic2 + ic4);
    out.A = -(1.0 / (2.0 * kPi)) * (eps_x - 1.0 + (eps_x + 1.0) * ic2 - (m2 / 4.0) * (2.0 * is2 + is4));
    return out;
}

}  // namespace bandedge
