#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bandedge/mat2.hpp"
#include "bandedge/model.hpp"
#include "bandedge/rng.hpp"

namespace bandedge {

// Site transfer matrix  [[(E - v)/t, -t], [1/t, 0]]  in SL(2,R).
// It propagates the solution pair (t(n+1) psi(n+1), psi(n)) of the Jacobi
// difference equation across one site with coefficients (t(n), v(n)).
inline Mat2 site_transfer(double E, double t, double v) {
    if (!(t > 0.0)) throw std::domain_error("site_transfer: hopping must be positive");
    return {(E - v) / t, -t, 1.0 / t, 0.0};
}

enum class JetVar { None, Energy, Coupling };

inline JetMat2 site_jet(double E, double t, double v, double t_dot, double v_dot, JetVar var) {
    JetMat2 j;
    j.value = site_transfer(E, t, v);
    switch (var) {
        case JetVar::None:
            break;
        case JetVar::Energy:
            j.d = {1.0 / t, 0.0, 0.0, 0.0};
            break;
        case JetVar::Coupling:
            // d/dlambda through t = t_hat + lambda t~ and v = v_hat + lambda v~
            j.d = {-v_dot / t + t_dot * (-(E - v) / (t * t)), -t_dot, t_dot * (-1.0 / (t * t)), 0.0};
            break;
    }
    return j;
}

// Transfer matrix over one unit cell: ordered product, site 1 applied first.
// Jet mode propagates the exact derivative in E or lambda by the product rule.
inline JetMat2 cell_transfer(const ModelInstance& model, const Sigma& sigma, double E, JetVar var = JetVar::None) {
    JetMat2 prod = JetMat2::constant(Mat2::identity());
    for (int l = 1; l <= model.background.L; ++l) {
        auto [t, v] = site_coefficients(model, sigma, l);
        const double t_dot = model.disorder.hop_perturbation(sigma, l - 1);
        const double v_dot = model.disorder.pot_perturbation(sigma, l - 1);
        prod = site_jet(E, t, v, t_dot, v_dot, var) * prod;
    }
    return prod;
}

// Trace of the unperturbed cell transfer matrix at energy E.
inline double periodic_trace(const PeriodicBackground& bg, double E) {
    Mat2 prod = Mat2::identity();
    for (int l = 0; l < bg.L; ++l) prod = site_transfer(E, bg.hop[l], bg.pot[l]) * prod;
    return prod.trace();
}

inline double periodic_trace_dE(const PeriodicBackground& bg, double E) {
    ModelInstance m;
    m.background = bg;
    m.disorder = DisorderSpec{DisorderLaw::Zero, std::vector<double>(bg.L, 0.0), std::vector<double>(bg.L, 0.0)};
    m.lambda = 0.0;
    Sigma zero(2 * bg.L, 0.0);
    return cell_transfer(m, zero, E, JetVar::Energy).d.trace();
}

struct BandEdgeInfo {
    double E_b = 0;
    int edge_sign = +1;  // sign of Tr at the edge
};

struct BandEdgeScan {
    std::vector<BandEdgeInfo> edges;
    std::vector<double> touchings;  // |Tr| = 2 with dTr/dE = 0, excluded
    std::vector<std::string> warnings;
};

namespace detail {

inline double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol) {
    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// golden-section minimum of |f| on [lo, hi]
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = std::abs(f(c)), fd = std::abs(f(d));
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = std::abs(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = std::abs(f(d));
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// All band edges (|Tr| = 2 with dTr/dE != 0) in [E_lo, E_hi], located by a
// sign scan plus bisection to 1e-12. Band touchings (double roots, where the
// trace grazes +-2) are reported separately and excluded.
inline BandEdgeScan band_edges(const PeriodicBackground& bg, double E_lo, double E_hi, int grid = 2000) {
    if (grid < 100) throw std::invalid_argument("band_edges: grid must be >= 100");
    bg.validate();
    BandEdgeScan scan;
    const double pitch = (E_hi - E_lo) / grid;
    const double root_tol = 1e-12;

    for (const int sign : {+1, -1}) {
        auto f = [&](double E) { return periodic_trace(bg, E) - 2.0 * sign; };
        std::vector<double> fv(grid + 1);
        for (int i = 0; i <= grid; ++i) fv[i] = f(E_lo + i * pitch);

        std::vector<double> roots;
        for (int i = 0; i < grid; ++i)
            if ((fv[i] <= 0.0) != (fv[i + 1] <= 0.0))
                roots.push_back(detail::bisect_root(f, E_lo + i * pitch, E_lo + (i + 1) * pitch, root_tol));
        // grazing roots: |f| dips to zero without a sign change
        for (int i = 1; i < grid; ++i) {
            if ((fv[i - 1] <= 0.0) != (fv[i] <= 0.0) || (fv[i] <= 0.0) != (fv[i + 1] <= 0.0)) continue;
            if (std::abs(fv[i]) >= std::abs(fv[i - 1]) || std::abs(fv[i]) > std::abs(fv[i + 1])) continue;
            if (std::abs(fv[i]) > 1e-2) continue;
            const double Em = detail::golden_min(f, E_lo + (i - 1) * pitch, E_lo + (i + 1) * pitch, root_tol);
            if (std::abs(f(Em)) < 1e-9) roots.push_back(Em);
        }
        std::sort(roots.begin(), roots.end());
        // a double root is located only to O(sqrt(eps)); cluster at that scale
        std::vector<double> merged;
        for (std::size_t i = 0; i < roots.size();) {
            std::size_t j = i + 1;
            double sum = roots[i];
            while (j < roots.size() && roots[j] - roots[j - 1] < 1e-7 * std::max(1.0, std::abs(roots[i]))) {
                sum += roots[j];
                ++j;
            }
            merged.push_back(sum / static_cast<double>(j - i));
            i = j;
        }
        for (std::size_t i = 0; i + 1 < merged.size(); ++i)
            if (merged[i + 1] - merged[i] < pitch)
                scan.warnings.push_back("band_edges: roots closer than grid pitch near E=" +
                                        std::to_string(merged[i]) + ", refine the grid");
        for (double E : merged) {
            if (std::abs(periodic_trace_dE(bg, E)) < 1e-6)
                scan.touchings.push_back(E);
            else
                scan.edges.push_back({E, sign});
        }
    }
    std::sort(scan.edges.begin(), scan.edges.end(), [](auto& a, auto& b) { return a.E_b < b.E_b; });
    std::sort(scan.touchings.begin(), scan.touchings.end());
    return scan;
}

struct JordanBasis {
    Mat2 N;    // det N = 1
    int sign;  // s in N T N^{-1} = +-[[1, s], [0, 1]];  + lower edge, - upper edge
};

// Jordan basis of a transfer matrix with |Tr| = 2 and T != +-1. The
// superdiagonal sign s is an invariant once det N = 1 is enforced.
inline JordanBasis jordan_basis(const Mat2& T, double trace_tol = 1e-8) {
    const double tr = T.trace();
    if (std::abs(std::abs(tr) - 2.0) > trace_tol) throw std::domain_error("jordan_basis: |trace| must be 2");
    const double tau = tr > 0 ? 1.0 : -1.0;
    Mat2 M0 = tau * T;  // nilpotent part: (tau T - 1)^2 = 0
    M0.a -= 1.0;
    M0.d -= 1.0;
    if (M0.norm_inf() < 1e-12) throw std::domain_error("jordan_basis: matrix is diagonalizable (equals +-1)");

    // null vector of M0 from its larger row, normalized with a deterministic sign
    Vec2 u;
    if (std::abs(M0.a) + std::abs(M0.b) >= std::abs(M0.c) + std::abs(M0.d))
        u = {-M0.b, M0.a};
    else
        u = {-M0.d, M0.c};
    double nu = std::hypot(u.x, u.y);
    u = {u.x / nu, u.y / nu};
    if (u.x < 0 || (u.x == 0 && u.y < 0)) u = {-u.x, -u.y};

    const Vec2 v0{-u.y, u.x};  // det(u, v0) = 1
    const Vec2 Mv = M0.apply(v0);
    // M0 v0 = kappa u; kappa != 0 since M0 has rank 1 with range = span(u)
    const double kappa = std::abs(u.x) > std::abs(u.y) ? Mv.x / u.x : Mv.y / u.y;
    const int s = kappa > 0 ? +1 : -1;
    const double alpha = std::sqrt(std::abs(kappa));
    // N^{-1} = [alpha u | v0 / alpha]
    const Mat2 Ninv{alpha * u.x, v0.x / alpha, alpha * u.y, v0.y / alpha};
    return {Ninv.inverse(), s};
}

// Band-edge data feeding the normal forms: the trace derivatives
//   x       = d/dE   Tr T^E_{0}          at E_b,
//   x_sigma = d/dlam Tr T^{E_b}_{lam,s}  at lam = 0,
// the Jordan basis, and the direction pointing into the band.
struct EdgeData {
    double E_b = 0;
    int edge_sign = +1;    // tau, sign of the trace
    int jordan_sign = +1;  // s, superdiagonal sign
    Mat2 N;                // Jordan basis, det 1
    double x = 0;
    double x_sigma_m2 = 0;         // E(x_sigma^2)
    double x_sigma_m2_stderr = 0;  // 0 when computed in closed form
    int inward = +1;               // energy direction into the band
    PeriodicBackground background;
    DisorderSpec disorder;

    ModelInstance model_at(double lambda) const {
        ModelInstance m;
        m.background = background;
        m.disorder = disorder;
        m.lambda = lambda;
        return m;
    }
};

// x_sigma for one disorder configuration, from the exact d/dlambda jet.
inline double edge_x_sigma(const EdgeData& edge, const Sigma& sigma) {
    ModelInstance m = edge.model_at(0.0);
    return cell_transfer(m, sigma, edge.E_b, JetVar::Coupling).d.trace();
}

struct EdgeDataOptions {
    std::size_t mc_samples = 1000000;
    std::uint64_t mc_seed = 0x5EED;
    bool force_monte_carlo = false;  // exercise the sampling fallback
};

inline EdgeData edge_data(const PeriodicBackground& bg, const DisorderSpec& disorder, double E_b,
                          const EdgeDataOptions& opts = {}) {
    bg.validate();
    disorder.validate();
    EdgeData e;
    e.E_b = E_b;
    e.background = bg;
    e.disorder = disorder;

    ModelInstance m0 = e.model_at(0.0);
    Sigma zero(2 * bg.L, 0.0);
    const Mat2 T = cell_transfer(m0, zero, E_b).value;
    const double tr = T.trace();
    if (std::abs(std::abs(tr) - 2.0) > 1e-8) throw std::domain_error("edge_data: E_b is not a band edge");
    e.edge_sign = tr > 0 ? +1 : -1;

    e.x = cell_transfer(m0, zero, E_b, JetVar::Energy).d.trace();
    if (std::abs(e.x) < 1e-10) throw std::domain_error("edge_data: band touching (dTr/dE vanishes)");

    const JordanBasis jb = jordan_basis(T);
    e.N = jb.N;
    e.jordan_sign = jb.sign;

    // E(x_sigma^2): x_sigma is linear in the components of sigma, so under
    // the uniform i.i.d. law the second moment is a finite sum over the
    // per-component trace derivatives.
    if (disorder.law == DisorderLaw::UniformIID && !opts.force_monte_carlo) {
        double sum = 0.0;
        Sigma unit(2 * bg.L, 0.0);
        for (std::size_t j = 0; j < unit.size(); ++j) {
            unit[j] = 1.0;
            const double g = edge_x_sigma(e, unit);
            sum += g * g;
            unit[j] = 0.0;
        }
        e.x_sigma_m2 = disorder.component_m2() * sum;
        e.x_sigma_m2_stderr = 0.0;
    } else {
        double sum = 0.0, sum2 = 0.0;
        RngStream rng(opts.mc_seed, 0);
        Sigma sigma;
        for (std::size_t i = 0; i < opts.mc_samples; ++i) {
            disorder.draw(rng, sigma);
            const double xs = edge_x_sigma(e, sigma);
            sum += xs * xs;
            sum2 += xs * xs * xs * xs;
        }
        const auto n = static_cast<double>(opts.mc_samples);
        e.x_sigma_m2 = sum / n;
        e.x_sigma_m2_stderr = std::sqrt(std::max(0.0, sum2 / n - e.x_sigma_m2 * e.x_sigma_m2) / n);
    }
    if (e.x_sigma_m2 <= 4.0 * e.x_sigma_m2_stderr)
        throw std::domain_error("edge_data: trivial perturbation (x_sigma vanishes almost surely)");

    const double h = 1e-6;
    const bool up_inside = std::abs(periodic_trace(bg, E_b + h)) < 2.0;
    const bool down_inside = std::abs(periodic_trace(bg, E_b - h)) < 2.0;
    if (up_inside == down_inside) throw std::domain_error("edge_data: could not determine inward direction");
    e.inward = up_inside ? +1 : -1;
    return e;
}

// Rescaled band-edge transfer matrix
//   N_{lam,delta} N T^{E_b + eps lam^eta}_{lam,sigma} N^{-1} N_{lam,delta}^{-1},
// with N_{lam,delta} = diag(lam^delta, 1). This is the matrix family whose
// lam -> 0 limit is +-1 (the anomaly).
inline Mat2 rescaled_transfer(const EdgeData& edge, const ModelInstance& model, const Sigma& sigma, double lambda,
                              double eta, double eps, double delta) {
    if (!(lambda > 0.0)) throw std::invalid_argument("rescaled_transfer: lambda must be > 0");
    if (!(eta > 0.0)) throw std::invalid_argument("rescaled_transfer: eta must be > 0");
    if (!(delta > 0.0 && delta < std::min(1.0, eta)))
        throw std::invalid_argument("rescaled_transfer: need 0 < delta < min(1, eta)");
    const double E = edge.E_b + eps * std::pow(lambda, eta);
    const Mat2 T = cell_transfer(model.with_lambda(lambda), sigma, E).value;
    const double ld = std::pow(lambda, delta);
    const Mat2 D = Mat2::diag(ld, 1.0);
    const Mat2 Dinv = Mat2::diag(1.0 / ld, 1.0);
    const Mat2 out = D * (edge.N * T * edge.N.inverse()) * Dinv;
    if (out.norm_inf() > 1e12) throw std::domain_error("rescaled_transfer: rescaling out of range (lambda too large)");
    return out;
}

}  // namespace bandedge
