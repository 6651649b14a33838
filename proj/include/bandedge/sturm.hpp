#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bandedge/model.hpp"

namespace bandedge {

// Number of eigenvalues strictly below E of the n x n Dirichlet truncation
// of H_{lambda,omega}, by Sturm sign counting on the LDL^T pivots of H - E.
// O(n) per energy; no diagonalization. Exact up to the pivot guard.
//
// The truncation uses sites 1..n of the two-sided operator with the unit
// cell phased at k = 1, i.e. site n has coefficients (t(n), v(n)) with
// t, v built from cell ceil(n/L) and in-cell position ((n-1) mod L) + 1;
// the coupling between sites n and n+1 is t(n+1).
inline int finite_volume_count(const ModelInstance& model, const std::vector<Sigma>& omega, int n_sites, double E) {
    if (n_sites < 2) throw std::invalid_argument("finite_volume_count: n_sites must be >= 2");
    const int L = model.background.L;
    const std::size_t cells_needed = (static_cast<std::size_t>(n_sites) + L) / L + 1;
    if (omega.size() < cells_needed)
        throw std::invalid_argument("finite_volume_count: not enough disorder cells supplied");

    // guard against exact zero pivots; scale-free since entries are O(1)
    const double pivmin = 1e-300;
    int count = 0;
    double d_prev = 0.0;
    for (int n = 1; n <= n_sites; ++n) {
        const int cell = (n - 1) / L;
        const int l = (n - 1) % L + 1;
        auto [t_n, v_n] = site_coefficients(model, omega[cell], l);
        double d = v_n - E;
        if (n > 1) {
            // coupling between n-1 and n is t(n)
            d -= t_n * t_n / d_prev;
        }
        // exact ties (E hits an eigenvalue) resolve upward: strict below-count
        if (std::abs(d) < pivmin) d = pivmin;
        if (d < 0.0) ++count;
        d_prev = d;
    }
    return count;
}

// Convenience overload drawing the disorder internally from (seed, cell).
inline int finite_volume_count(const ModelInstance& model, std::uint64_t seed, int n_sites, double E) {
    const int L = model.background.L;
    const std::size_t cells = (static_cast<std::size_t>(n_sites) + L) / L + 1;
    return finite_volume_count(model, sample_disorder(model.disorder, seed, cells), n_sites, E);
}

}  // namespace bandedge
