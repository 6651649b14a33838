#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bandedge/rng.hpp"

namespace bandedge {

// One disorder configuration sigma in [-1,1]^{2L}: components [0, L) feed
// the hopping amplitudes, [L, 2L) the potential amplitudes.
using Sigma = std::vector<double>;

// L-periodic Jacobi background: hopping t_l > 0 and potential v_l.
struct PeriodicBackground {
    int L = 1;
    std::vector<double> hop;
    std::vector<double> pot;

    void validate() const {
        if (L < 1) throw std::invalid_argument("PeriodicBackground: L must be >= 1");
        if (static_cast<int>(hop.size()) != L || static_cast<int>(pot.size()) != L)
            throw std::invalid_argument("PeriodicBackground: hop/pot size must equal L");
        for (double t : hop)
            if (!(t > 0.0)) throw std::invalid_argument("PeriodicBackground: hopping must be positive");
    }
};

enum class DisorderLaw {
    UniformIID,  // i.i.d. uniform on [-1, 1] per component
    Zero,        // degenerate law sigma == 0
};

// Centered random perturbation with linear amplitude maps:
//   t~_l(sigma) = hop_amp[l] * sigma_l,  v~_l(sigma) = pot_amp[l] * sigma_{L+l}.
// Both are centered because the component laws are.
struct DisorderSpec {
    DisorderLaw law = DisorderLaw::UniformIID;
    std::vector<double> hop_amp;
    std::vector<double> pot_amp;

    int L() const { return static_cast<int>(pot_amp.size()); }

    void validate() const {
        if (hop_amp.size() != pot_amp.size() || pot_amp.empty())
            throw std::invalid_argument("DisorderSpec: hop_amp/pot_amp must be non-empty and equal-sized");
    }

    // Per-component second moment of sigma under the law.
    double component_m2() const { return law == DisorderLaw::UniformIID ? 1.0 / 3.0 : 0.0; }

    void draw(RngStream& rng, Sigma& out) const {
        out.resize(2 * pot_amp.size());
        if (law == DisorderLaw::Zero) {
            for (auto& v : out) v = 0.0;
            return;
        }
        for (auto& v : out) v = rng.uniform_pm1();
    }

    double hop_perturbation(const Sigma& sigma, int l) const { return hop_amp[l] * sigma[l]; }
    double pot_perturbation(const Sigma& sigma, int l) const { return pot_amp[l] * sigma[pot_amp.size() + l]; }
};

struct ModelInstance {
    PeriodicBackground background;
    DisorderSpec disorder;
    double lambda = 0.0;

    void validate() const {
        background.validate();
        disorder.validate();
        if (background.L != disorder.L())
            throw std::invalid_argument("ModelInstance: background and disorder period mismatch");
        if (lambda < 0.0) throw std::invalid_argument("ModelInstance: lambda must be >= 0");
        // Worst case over the support [-1,1]^{2L}: hopping must stay positive.
        for (int l = 0; l < background.L; ++l)
            if (!(background.hop[l] - lambda * std::abs(disorder.hop_amp[l]) > 0.0))
                throw std::invalid_argument("ModelInstance: lambda too large, hopping can turn non-positive");
    }

    ModelInstance with_lambda(double lam) const {
        ModelInstance m = *this;
        m.lambda = lam;
        return m;
    }
};

// m independent draws; draw i is a deterministic function of (seed, i).
inline std::vector<Sigma> sample_disorder(const DisorderSpec& spec, std::uint64_t seed, std::size_t m) {
    if (m < 1) throw std::invalid_argument("sample_disorder: m must be >= 1");
    std::vector<Sigma> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        RngStream rng(seed, i);
        spec.draw(rng, out[i]);
    }
    return out;
}

// Site coefficients (t, v) at unit-cell position l in 1..L.
inline std::pair<double, double> site_coefficients(const ModelInstance& model, const Sigma& sigma, int l) {
    if (l < 1 || l > model.background.L) throw std::invalid_argument("site_coefficients: l out of range");
    const int i = l - 1;
    const double t = model.background.hop[i] + model.lambda * model.disorder.hop_perturbation(sigma, i);
    const double v = model.background.pot[i] + model.lambda * model.disorder.pot_perturbation(sigma, i);
    if (!(t > 0.0)) throw std::domain_error("site_coefficients: non-positive hopping (model invalid)");
    return {t, v};
}

// The standard single-band Anderson model: L = 1, t = 1, v = 0, potential
// disorder v~(sigma) = sigma.
inline ModelInstance anderson_model(double lambda = 0.0) {
    ModelInstance m;
    m.background = PeriodicBackground{1, {1.0}, {0.0}};
    m.disorder = DisorderSpec{DisorderLaw::UniformIID, {0.0}, {1.0}};
    m.lambda = lambda;
    m.validate();
    return m;
}

}  // namespace bandedge
