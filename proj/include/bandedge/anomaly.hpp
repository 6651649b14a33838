#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bandedge/mat2.hpp"
#include "bandedge/rational.hpp"
#include "bandedge/rng.hpp"
#include "bandedge/transfer.hpp"
#include "bandedge/trigpoly.hpp"

namespace bandedge {

using Complex = std::complex<double>;

// One term lambda^eta P(sigma) of an anomaly expansion, with
//   P(sigma) = mean + xi(sigma) * rand_coeff,
// xi a centered scalar with second moment xi_m2 (the band-edge normal forms
// all share the single scalar xi = x_sigma). Terms whose mean is only known
// through sampling carry `sample` instead of an exact mean.
struct ExpansionTerm {
    Rational eta{1, 1};
    Mat2 mean{};
    Mat2 rand_coeff{};
    double xi_m2 = 0.0;
    std::function<Mat2(RngStream&)> sample;  // optional Monte Carlo source

    bool has_randomness() const { return xi_m2 > 0.0 || static_cast<bool>(sample); }
};

struct AnomalyExpansion {
    std::vector<ExpansionTerm> terms;

    void validate() const {
        if (terms.empty()) throw std::invalid_argument("AnomalyExpansion: no terms");
        if (!(Rational(0) < terms.front().eta))
            throw std::invalid_argument("AnomalyExpansion: exponents must be positive");
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& t = terms[i];
            const double scale = std::max(1.0, t.mean.norm_inf() + t.rand_coeff.norm_inf());
            if (std::abs(t.mean.trace()) > 1e-12 * scale || std::abs(t.rand_coeff.trace()) > 1e-12 * scale)
                throw std::invalid_argument("AnomalyExpansion: terms must be traceless");
            if (i > 0 && !(terms[i - 1].eta < t.eta))
                throw std::invalid_argument("AnomalyExpansion: exponents must be strictly increasing");
        }
        K_index();
    }

    // index K with eta_K = 2 eta_1; exact rational comparison
    std::size_t K_index() const {
        const Rational target = 2 * terms.front().eta;
        for (std::size_t k = 0; k < terms.size(); ++k)
            if (terms[k].eta == target) return k;
        throw std::invalid_argument("AnomalyExpansion: no term with eta_K = 2 eta_1");
    }

    AnomalyExpansion conjugated(const Mat2& M) const {
        AnomalyExpansion out;
        const Mat2 Minv = M.inverse();
        for (const auto& t : terms) {
            ExpansionTerm nt = t;
            nt.mean = M * t.mean * Minv;
            nt.rand_coeff = M * t.rand_coeff * Minv;
            if (t.sample) {
                auto base = t.sample;
                nt.sample = [M, Minv, base](RngStream& rng) { return M * base(rng) * Minv; };
            }
            out.terms.push_back(std::move(nt));
        }
        return out;
    }
};

// insert a zero placeholder at 2 eta_1 when the expansion lacks that
// exponent, so the K bookkeeping of the classification is well-defined
inline void ensure_K_term(AnomalyExpansion& e) {
    const Rational target = 2 * e.terms.front().eta;
    for (const auto& t : e.terms)
        if (t.eta == target) return;
    ExpansionTerm placeholder;
    placeholder.eta = target;
    auto pos = e.terms.begin();
    while (pos != e.terms.end() && pos->eta < target) ++pos;
    e.terms.insert(pos, placeholder);
}

enum class AnomalyOrder { First, Second };
enum class AnomalyType { Elliptic, Hyperbolic, Parabolic };

struct Classification {
    AnomalyOrder order = AnomalyOrder::Second;
    std::size_t kind = 0;  // index of the first uncentered term (first order only)
    AnomalyType type = AnomalyType::Parabolic;
    double det_mean = 0.0;  // det E(P_kind)
};

namespace anomaly_detail {

struct MeanEstimate {
    Mat2 mean;
    Mat2 se;          // per-entry standard error (zero for exact means)
    bool exact;
};

inline MeanEstimate term_mean(const ExpansionTerm& t, std::size_t mc_samples, std::uint64_t seed) {
    if (!t.sample) return {t.mean, Mat2{}, true};
    if (mc_samples < 100000) throw std::invalid_argument("classify: mc_samples must be >= 1e5 for sampled terms");
    RngStream rng(seed, 17);
    Mat2 sum{}, sum2{};
    for (std::size_t i = 0; i < mc_samples; ++i) {
        const Mat2 v = t.sample(rng);
        sum = sum + v;
        sum2 = sum2 + Mat2{v.a * v.a, v.b * v.b, v.c * v.c, v.d * v.d};
    }
    const double n = static_cast<double>(mc_samples);
    Mat2 mean = (1.0 / n) * sum;
    auto se1 = [&](double s2, double m) { return std::sqrt(std::max(0.0, s2 / n - m * m) / n); };
    Mat2 se{se1(sum2.a, mean.a), se1(sum2.b, mean.b), se1(sum2.c, mean.c), se1(sum2.d, mean.d)};
    return {mean, se, false};
}

inline bool significantly_nonzero(const MeanEstimate& est, double scale) {
    if (est.exact) return est.mean.norm_inf() > 1e-12 * std::max(1.0, scale);
    bool nonzero = false, inband = false;
    for (auto [m, s] : {std::pair{est.mean.a, est.se.a},
                        std::pair{est.mean.b, est.se.b},
                        std::pair{est.mean.c, est.se.c},
                        std::pair{est.mean.d, est.se.d}}) {
        if (std::abs(m) > 4.0 * s + 1e-12 * std::max(1.0, scale))
            nonzero = true;
        else if (std::abs(m) > 1e-12 * std::max(1.0, scale))
            inband = true;
    }
    if (!nonzero && inband)
        throw std::domain_error("classify: indeterminate (sampled mean inside the statistical zero band)");
    return nonzero;
}

}  // namespace anomaly_detail

// First/second order and elliptic/hyperbolic/parabolic type per the sign of
// det E(P_K). Means are exact when terms are declared exactly; sampled terms
// use a 4-standard-error zero test.
inline Classification classify(const AnomalyExpansion& e, std::size_t mc_samples = 100000,
                               std::uint64_t seed = 0xC1A5) {
    e.validate();
    const std::size_t K = e.K_index();
    Classification out;
    for (std::size_t k = 0; k < K; ++k) {
        const double scale = e.terms[k].mean.norm_inf() + e.terms[k].rand_coeff.norm_inf();
        const auto est = anomaly_detail::term_mean(e.terms[k], mc_samples, seed);
        if (anomaly_detail::significantly_nonzero(est, scale)) {
            out.order = AnomalyOrder::First;
            out.kind = k;
            out.det_mean = est.mean.det();
            const double dscale = est.mean.norm_inf();
            double det_band = 1e-12 * std::max(1.0, dscale * dscale);
            if (!est.exact) det_band += 8.0 * est.se.norm_inf() * std::max(dscale, est.se.norm_inf());
            if (out.det_mean > det_band)
                out.type = AnomalyType::Elliptic;
            else if (out.det_mean < -det_band)
                out.type = AnomalyType::Hyperbolic;
            else
                out.type = AnomalyType::Parabolic;
            return out;
        }
    }
    out.order = AnomalyOrder::Second;
    out.kind = K;
    return out;
}

// --------------------------------------------------------------------------
// Coefficients alpha, beta, gamma of the phase-shift and log-norm expansion,
// with v = (1, -i)/sqrt(2).
// --------------------------------------------------------------------------

inline Complex bra_v_M_v(const Mat2& m) {  // <v|M|v>
    return {0.5 * (m.a + m.d), 0.5 * (m.c - m.b)};
}
inline Complex bra_vbar_M_v(const Mat2& m) {  // <vbar|M|v>
    return {0.5 * (m.a - m.d), -0.5 * (m.b + m.c)};
}

struct MomentCoeffs {
    Complex alpha;      // <v|P|v>
    Complex beta;       // <vbar|P|v>
    Complex gamma;      // <vbar| P^T P |v>
    TrigPoly4 p_poly;   // c cos^2 - b sin^2 - a sin 2theta
};

inline MomentCoeffs moment_coeffs(const Mat2& p) {
    if (std::abs(p.trace()) > 1e-12 * std::max(1.0, p.norm_inf()))
        throw std::invalid_argument("moment_coeffs: matrix must be traceless");
    return {bra_v_M_v(p), bra_vbar_M_v(p), bra_vbar_M_v(p.transpose() * p), phase_poly(p)};
}

// gamma as a bilinear form, used for expectations over the shared scalar
inline Complex gamma_bilinear(const Mat2& m, const Mat2& n) { return bra_vbar_M_v(m.transpose() * n); }

// the mixed coefficient  (1/2) <vbar| (P1 + P1*) P2 + (P2 + P2*) P1 |v>
inline Complex delta_mixed(const Mat2& p1, const Mat2& p2) {
    const Mat2 m = (p1 + p1.transpose()) * p2 + (p2 + p2.transpose()) * p1;
    return 0.5 * bra_vbar_M_v(m);
}

// --------------------------------------------------------------------------
// Basis changes of the first-order anomalies
// --------------------------------------------------------------------------

// M with det 1 such that M E(P_kind) M^{-1} = [[0, -mu], [mu, 0]].
struct EllipticBasis {
    Mat2 M;
    double mu;  // signed: the rotation direction is an invariant
};

inline EllipticBasis elliptic_basis_of(const Mat2& mean) {
    const double det = mean.det();
    if (!(det > 0.0)) throw std::domain_error("elliptic_basis: det E(P) must be positive");
    // basis (u, P u / mu): P u = mu * (Pu/mu), P (Pu/mu) = -mu u since P^2 = -det * 1
    const double c = mean.c;
    if (std::abs(c) < 1e-300) throw std::domain_error("elliptic_basis: degenerate matrix");
    const double mu = c > 0 ? std::sqrt(det) : -std::sqrt(det);
    const double alpha = std::sqrt(mu / c);  // det normalization, mu/c > 0
    const Mat2 Minv{alpha, alpha * mean.a / mu, 0.0, alpha * mean.c / mu};
    return {Minv.inverse(), mu};
}

inline EllipticBasis elliptic_basis(const AnomalyExpansion& e) {
    const auto cls = classify(e);
    if (cls.order != AnomalyOrder::First || cls.type != AnomalyType::Elliptic)
        throw std::domain_error("elliptic_basis: anomaly is not elliptic of first order");
    return elliptic_basis_of(e.terms[cls.kind].mean);
}

// M with det 1 such that M E(P_kind) M^{-1} = diag(-mu, mu), mu > 0.
struct HyperbolicBasis {
    Mat2 M;
    double mu;
};

inline HyperbolicBasis hyperbolic_basis_of(const Mat2& mean) {
    const double det = mean.det();
    if (!(det < 0.0)) throw std::domain_error("hyperbolic_basis: det E(P) must be negative");
    const double mu = std::sqrt(-det);
    const double a = mean.a, b = mean.b, c = mean.c;
    Mat2 M;
    if (std::abs(c) > 1e-14 * std::max(1.0, mean.norm_inf())) {
        // rows are left eigenvectors (c, -mu - a) and (c, mu - a)
        const double d2 = 2.0 * c * mu;
        const double s = std::sqrt(std::abs(d2));
        const double s1 = 1.0 / s, s2 = d2 > 0 ? 1.0 / s : -1.0 / s;
        M = {s1 * c, s1 * (-mu - a), s2 * c, s2 * (mu - a)};
    } else if (std::abs(b) > 1e-14 * std::max(1.0, mean.norm_inf())) {
        // rows (mu - a, b) and (-mu - a, b)
        const double d2 = 2.0 * b * mu;
        const double s = std::sqrt(std::abs(d2));
        const double s1 = 1.0 / s, s2 = d2 > 0 ? 1.0 / s : -1.0 / s;
        M = {s1 * (mu - a), s1 * b, s2 * (-mu - a), s2 * b};
    } else {
        M = a < 0 ? Mat2::identity() : Mat2{0, 1, -1, 0};
    }
    return {M, mu};
}

namespace anomaly_detail {

// apply N_{lambda,delta} = diag(lambda^delta, 1): the a/d parts keep their
// exponent, b gains +delta, c gains -delta. Exact on the expansion.
inline AnomalyExpansion rescale_expansion(const AnomalyExpansion& e, Rational delta) {
    std::vector<ExpansionTerm> split;
    for (const auto& t : e.terms) {
        if (t.sample) throw std::invalid_argument("rescale_expansion: sampled terms not supported");
        ExpansionTerm diag;
        diag.eta = t.eta;
        diag.mean = {t.mean.a, 0, 0, t.mean.d};
        diag.rand_coeff = {t.rand_coeff.a, 0, 0, t.rand_coeff.d};
        diag.xi_m2 = t.xi_m2;
        ExpansionTerm upper;
        upper.eta = t.eta + delta;
        upper.mean = {0, t.mean.b, 0, 0};
        upper.rand_coeff = {0, t.rand_coeff.b, 0, 0};
        upper.xi_m2 = t.xi_m2;
        ExpansionTerm lower;
        lower.eta = t.eta - delta;
        lower.mean = {0, 0, t.mean.c, 0};
        lower.rand_coeff = {0, 0, t.rand_coeff.c, 0};
        lower.xi_m2 = t.xi_m2;
        for (const auto& part : {diag, upper, lower})
            if (part.mean.norm_inf() > 0 || part.rand_coeff.norm_inf() > 0) split.push_back(part);
    }
    std::sort(split.begin(), split.end(), [](const auto& x, const auto& y) { return x.eta < y.eta; });
    AnomalyExpansion out;
    for (auto& t : split) {
        if (!out.terms.empty() && out.terms.back().eta == t.eta) {
            auto& last = out.terms.back();
            last.mean = last.mean + t.mean;
            last.rand_coeff = last.rand_coeff + t.rand_coeff;
            last.xi_m2 = std::max(last.xi_m2, t.xi_m2);
        } else {
            out.terms.push_back(t);
        }
    }
    if (out.terms.empty()) throw std::domain_error("rescale_expansion: expansion vanished");
    ensure_K_term(out);
    return out;
}

}  // namespace anomaly_detail

// Transform a hyperbolic first-order anomaly into a second-order one:
// diagonalize E(P_kind), then blow up with N_{lambda,delta} where delta is
// set by the smallest exponent chi carrying variance in the lower-left
// entry. When an uncentered lower-left entry appears first (exponent xi),
// the alternative step delta = xi - eta_kind is applied and the procedure
// recurses, up to 4 levels.
inline AnomalyExpansion hyperbolic_to_second_order(const AnomalyExpansion& e, int max_depth = 4) {
    if (max_depth <= 0) throw std::domain_error("hyperbolic_to_second_order: needs iteration beyond depth limit");
    const auto cls = classify(e);
    if (cls.order == AnomalyOrder::Second) return e;
    if (cls.type != AnomalyType::Hyperbolic)
        throw std::domain_error("hyperbolic_to_second_order: anomaly is not hyperbolic of first order");

    const Rational eta_kind = e.terms[cls.kind].eta;
    const auto hb = hyperbolic_basis_of(e.terms[cls.kind].mean);
    AnomalyExpansion diag = e.conjugated(hb.M);

    // chi: smallest exponent with E(c^2) > 0; xi: smallest exponent with
    // E(c) != 0 below eta_kind/2 + chi
    std::optional<Rational> chi, xi;
    for (const auto& t : diag.terms) {
        const double c_m2 = t.mean.c * t.mean.c + t.xi_m2 * t.rand_coeff.c * t.rand_coeff.c;
        if (!chi && c_m2 > 1e-24) chi = t.eta;
    }
    if (!chi) throw std::domain_error("hyperbolic_to_second_order: trivial perturbation (no lower-left variance)");
    for (const auto& t : diag.terms) {
        if (!(t.eta < Rational(1, 2) * eta_kind + *chi)) break;
        if (std::abs(t.mean.c) > 1e-12 && !(t.eta == eta_kind)) {
            xi = t.eta;
            break;
        }
    }
    if (!xi) {
        const Rational delta = *chi - Rational(1, 2) * eta_kind;
        if (!(Rational(0) < delta))
            throw std::domain_error("hyperbolic_to_second_order: exponent bookkeeping violated (chi <= eta_kind/2)");
        auto out = anomaly_detail::rescale_expansion(diag, delta);
        if (classify(out).order != AnomalyOrder::Second)
            throw std::domain_error("hyperbolic_to_second_order: transform did not reach second order");
        return out;
    }
    const Rational delta = *xi - eta_kind;
    if (!(Rational(0) < delta))
        throw std::domain_error("hyperbolic_to_second_order: needs iteration (xi <= eta_kind)");
    return hyperbolic_to_second_order(anomaly_detail::rescale_expansion(diag, delta), max_depth - 1);
}

// --------------------------------------------------------------------------
// Perturbative Lyapunov exponent and rotation number from the expansion and
// the Birkhoff inputs I(e^{2 i theta}), I(e^{4 i theta}).
// --------------------------------------------------------------------------

struct PerturbativeValues {
    double gamma;            // per-cell Lyapunov exponent
    double rotation;         // per-cell rotation number R(lambda) (1/pi included)
    double gamma_error_order;     // formal exponent of the neglected terms
    double rotation_error_order;
};

inline PerturbativeValues perturbative_values(const AnomalyExpansion& e, Complex I2, Complex I4, double lambda) {
    e.validate();
    struct TermMoments {
        double lpow;       // lambda^eta
        Complex alpha_m, beta_m;       // E alpha, E beta
        Complex alpha_r, beta_r;       // coefficients of xi
        double m2;
        Complex beta_abs2;  // E |beta|^2
        Complex beta_sq;    // E beta^2
        Complex gamma_m;    // E gamma
        Complex alpha_beta; // E alpha beta
    };
    std::vector<TermMoments> tm;
    for (const auto& t : e.terms) {
        TermMoments m;
        m.lpow = std::pow(lambda, t.eta.value());
        m.alpha_m = bra_v_M_v(t.mean);
        m.beta_m = bra_vbar_M_v(t.mean);
        m.alpha_r = bra_v_M_v(t.rand_coeff);
        m.beta_r = bra_vbar_M_v(t.rand_coeff);
        m.m2 = t.xi_m2;
        m.beta_abs2 = std::norm(m.beta_m) + m.m2 * std::norm(m.beta_r);
        m.beta_sq = m.beta_m * m.beta_m + m.m2 * m.beta_r * m.beta_r;
        m.gamma_m = gamma_bilinear(t.mean, t.mean) + m.m2 * gamma_bilinear(t.rand_coeff, t.rand_coeff);
        m.alpha_beta = m.alpha_m * m.beta_m + m.m2 * m.alpha_r * m.beta_r;
        tm.push_back(m);
    }

    double gamma = 0.0, rot = 0.0;
    for (std::size_t k = 0; k < tm.size(); ++k) {
        const auto& m = tm[k];
        gamma += std::real(m.lpow * m.beta_m * I2);
        gamma += 0.5 * m.lpow * m.lpow * std::real(m.beta_abs2 + m.gamma_m * I2 - m.beta_sq * I4);
        rot += std::imag(m.lpow * (m.alpha_m - m.beta_m * I2));
        rot += 0.5 * m.lpow * m.lpow * std::imag(-2.0 * m.alpha_beta * I2 + m.beta_sq * I4);
    }
    for (std::size_t k1 = 0; k1 < tm.size(); ++k1) {
        for (std::size_t k2 = k1 + 1; k2 < tm.size(); ++k2) {
            const auto& t1 = e.terms[k1];
            const auto& t2 = e.terms[k2];
            const Complex b1b2bar = tm[k1].beta_m * std::conj(tm[k2].beta_m) +
                                    tm[k1].m2 * tm[k1].beta_r * std::conj(tm[k2].beta_r);
            const Complex b1b2 = tm[k1].beta_m * tm[k2].beta_m + tm[k1].m2 * tm[k1].beta_r * tm[k2].beta_r;
            const Complex dm = delta_mixed(t1.mean, t2.mean) + tm[k1].m2 * delta_mixed(t1.rand_coeff, t2.rand_coeff);
            gamma += tm[k1].lpow * tm[k2].lpow * std::real(b1b2bar + dm * I2 - b1b2 * I4);
        }
    }

    PerturbativeValues out;
    out.gamma = gamma;
    out.rotation = rot / kPi;
    out.gamma_error_order = 3.0 * e.terms.front().eta.value();
    out.rotation_error_order =
        e.terms.size() > 1 ? (e.terms[0].eta + e.terms[1].eta).value() : 3.0 * e.terms.front().eta.value();
    return out;
}

// --------------------------------------------------------------------------
// Band-edge normal forms as expansions
// --------------------------------------------------------------------------

// Expansion of N_{lambda,delta} N T^{E_b + eps lambda^eta} N^{-1}
// N_{lambda,delta}^{-1} = +-exp(sum lambda^{eta_k} P_k(sigma)): the Jordan
// superdiagonal at delta, the energy drift at eta - delta, and the centered
// random entry x_sigma at 1 - delta, all in the lower-left/upper-right
// normal-form slots fixed by the edge signs.
inline AnomalyExpansion build_edge_expansion(const EdgeData& edge, Rational eta, double eps, Rational delta) {
    if (!(Rational(0) < delta) || !(delta < Rational(1)) || !(delta < eta))
        throw std::invalid_argument("build_edge_expansion: need 0 < delta < min(1, eta)");
    const double ts = edge.edge_sign * edge.jordan_sign;
    std::vector<ExpansionTerm> raw;

    ExpansionTerm jordan;
    jordan.eta = delta;
    jordan.mean = {0, static_cast<double>(edge.jordan_sign), 0, 0};
    raw.push_back(jordan);

    if (eps != 0.0) {
        ExpansionTerm drift;
        drift.eta = eta - delta;
        drift.mean = {0, 0, ts * eps * edge.x, 0};
        raw.push_back(drift);
    }

    ExpansionTerm random;
    random.eta = Rational(1) - delta;
    random.rand_coeff = {0, 0, ts, 0};
    random.xi_m2 = edge.x_sigma_m2;
    raw.push_back(random);

    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.eta < b.eta; });
    AnomalyExpansion out;
    for (auto& t : raw) {
        if (!out.terms.empty() && out.terms.back().eta == t.eta) {
            out.terms.back().mean = out.terms.back().mean + t.mean;
            out.terms.back().rand_coeff = out.terms.back().rand_coeff + t.rand_coeff;
            out.terms.back().xi_m2 = std::max(out.terms.back().xi_m2, t.xi_m2);
        } else {
            out.terms.push_back(t);
        }
    }
    ensure_K_term(out);
    out.validate();
    return out;
}

// delta = min(eta/2, 2/3), the blow-up balancing drift against diffusion
inline Rational edge_delta(Rational eta) {
    const Rational half_eta = Rational(1, 2) * eta;
    return half_eta < Rational(2, 3) ? half_eta : Rational(2, 3);
}

// Conjugation frames for simulating the transformed families. The returned
// matrix B acts as T -> B T B^{-1} on the raw cell transfer matrix.
inline Mat2 rescaled_frame(const EdgeData& edge, Rational delta, double lambda) {
    return Mat2::diag(std::pow(lambda, delta.value()), 1.0) * edge.N;
}

inline Mat2 elliptic_frame(const EdgeData& edge, Rational eta, double eps, double lambda) {
    const auto expn = build_edge_expansion(edge, eta, eps, edge_delta(eta));
    return elliptic_basis(expn).M * rescaled_frame(edge, edge_delta(eta), lambda);
}

// second-order frame for the hyperbolic regime: N_{lambda,delta2} M_hyp N_{lambda,eta/2} N
inline Mat2 hyperbolic_second_order_frame(const EdgeData& edge, Rational eta, double eps, double lambda) {
    const Rational half_eta = Rational(1, 2) * eta;
    const auto expn = build_edge_expansion(edge, eta, eps, half_eta);
    const auto cls = classify(expn);
    if (cls.order != AnomalyOrder::First || cls.type != AnomalyType::Hyperbolic)
        throw std::domain_error("hyperbolic_second_order_frame: regime is not hyperbolic");
    const auto hb = hyperbolic_basis_of(expn.terms[cls.kind].mean);
    const Rational delta2 = Rational(1) - Rational(3, 4) * eta;  // chi - eta_kind/2 with chi = 1 - eta/2
    if (!(Rational(0) < delta2))
        throw std::domain_error("hyperbolic_second_order_frame: eta out of range (needs eta < 4/3)");
    return Mat2::diag(std::pow(lambda, delta2.value()), 1.0) * hb.M * rescaled_frame(edge, half_eta, lambda);
}

}  // namespace bandedge
