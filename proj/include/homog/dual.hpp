#pragma once

#include <vector>

#include "homog/calculus.hpp"
#include "homog/cell.hpp"

namespace homog {

/// Potentials f_ij and dual correctors phi_kij on the (d+1)-torus,
/// phi_kij = d_k f_ij - d_i f_kj with k, i in 1..d+1 (y_{d+1} = s).
/// Antisymmetry phi_kij = -phi_ikj is exact: each entry is assembled as the
/// difference of the same two gradient fields, and IEEE negation of a
/// rounded difference is exact.
struct DualCorrectorSet {
    Scheme scheme = Scheme::spectral;
    GridFunction f_pot;             // shape (d+1, d)
    GridFunction phi;               // shape (d+1, d+1, d): [k][i][j]
    GridFunction grad_phi_spatial;  // shape (d, d, d): [l][k][axis] of phi_{(d+1) l k}
    double sup_phi = 0.0;
    double sup_grad_phi = 0.0;
    /// ||grad(sum_i d_i f_ij)||_2 / ||b||_2: the divergence-free correction
    /// term dropped from the potential construction, verified small rather
    /// than assumed constant.
    double gauge_residual = 0.0;

    std::size_t phi_index(int k, int i, int j) const {
        const int d = f_pot.grid.d;
        return (std::size_t(k) * (d + 1) + i) * d + j;
    }
};

struct FluxIdentityResidual {
    double relative = 0.0;      // ||sum_k d_k phi_kij - b_ij||_2 / ||b||_2
    double antisymmetry = 0.0;  // max |phi_kij + phi_ikj|, expected exactly 0
};

/// Builds the dual correctors from the flux matrix by periodic Poisson
/// inversion in d+1 dimensions. Mean-zero violations in b propagate as
/// errors from poisson_invert_d1.
inline DualCorrectorSet solve_dual_correctors(const FluxMatrix& flux,
                                              Scheme scheme = Scheme::spectral) {
    const auto& b = flux.b;
    const int d = b.grid.d;
    DualCorrectorSet set;
    set.scheme = scheme;
    set.f_pot = poisson_invert_d1(b, scheme);

    // G[i][j][k] = d_k f_ij over all d+1 axes
    GridFunction G = gradient(set.f_pot, GradientAxes::space_time, scheme);
    auto g_comp = [&](int i, int j, int k) {
        return G.comp((std::size_t(i) * d + j) * (d + 1) + k);
    };

    set.phi = GridFunction::zeros(b.grid, {std::size_t(d + 1), std::size_t(d + 1), std::size_t(d)});
    const std::size_t nn = b.grid.n_nodes();
    for (int k = 0; k <= d; ++k)
        for (int i = 0; i <= d; ++i)
            for (int j = 0; j < d; ++j) {
                auto dst = set.phi.comp(set.phi_index(k, i, j));
                auto dk_fij = g_comp(i, j, k);
                auto di_fkj = g_comp(k, j, i);
                for (std::size_t node = 0; node < nn; ++node)
                    dst[node] = dk_fij[node] - di_fkj[node];
            }
    set.sup_phi = max_abs(set.phi.values);

    // spatial gradients of the time-row phi_{(d+1) l k}, used by the
    // two-scale forcing
    GridFunction time_row = GridFunction::zeros(b.grid, {std::size_t(d), std::size_t(d)});
    for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k) {
            auto src = set.phi.comp(set.phi_index(d, l, k));
            auto dst = time_row.comp(std::size_t(l) * d + k);
            std::copy(src.begin(), src.end(), dst.begin());
        }
    set.grad_phi_spatial = gradient(time_row, GradientAxes::spatial_only, scheme);
    set.sup_grad_phi = max_abs(set.grad_phi_spatial.values);

    // gauge check: grad of q_j = sum_i d_i f_ij should vanish
    double worst = 0.0;
    const double b_norm = std::max(norm2(b.values), 1e-300);
    for (int j = 0; j < d; ++j) {
        GridFunction q = GridFunction::zeros(b.grid);
        for (int i = 0; i <= d; ++i) {
            auto src = g_comp(i, j, i);
            for (std::size_t node = 0; node < nn; ++node) q.values[node] += src[node];
        }
        auto gq = gradient(q, GradientAxes::space_time, scheme);
        worst = std::max(worst, norm2(gq.values) / b_norm);
    }
    set.gauge_residual = worst;
    return set;
}

/// Residual of the flux identity b_ij = sum_k d_k phi_kij, plus the
/// antisymmetry defect (reported separately; must be exactly zero).
inline FluxIdentityResidual flux_identity_residual(const DualCorrectorSet& set,
                                                   const FluxMatrix& flux) {
    const auto& b = flux.b;
    if (!(set.f_pot.grid == b.grid)) throw Error("flux_identity_residual: grid mismatch");
    const int d = b.grid.d;
    const std::size_t nn = b.grid.n_nodes();

    FluxIdentityResidual out;
    double num = 0.0;
    for (int i = 0; i <= d; ++i)
        for (int j = 0; j < d; ++j) {
            GridFunction acc = GridFunction::zeros(b.grid);
            for (int k = 0; k <= d; ++k) {
                GridFunction col = GridFunction::zeros(b.grid);
                auto src = set.phi.comp(set.phi_index(k, i, j));
                std::copy(src.begin(), src.end(), col.values.begin());
                auto der = derivative(col, k, set.scheme);
                for (std::size_t node = 0; node < nn; ++node) acc.values[node] += der.values[node];
            }
            auto b_ij = b.comp(b.comp_index({std::size_t(i), std::size_t(j)}));
            for (std::size_t node = 0; node < nn; ++node) num += sqr(acc.values[node] - b_ij[node]);
        }
    const double den = norm2(b.values);
    out.relative = den == 0.0 ? std::sqrt(num) : std::sqrt(num) / den;

    for (int k = 0; k <= d; ++k)
        for (int i = 0; i <= d; ++i)
            for (int j = 0; j < d; ++j) {
                auto pk = set.phi.comp(set.phi_index(k, i, j));
                auto pi = set.phi.comp(set.phi_index(i, k, j));
                for (std::size_t node = 0; node < nn; ++node)
                    out.antisymmetry = std::max(out.antisymmetry, std::abs(pk[node] + pi[node]));
            }
    return out;
}

} // namespace homog
