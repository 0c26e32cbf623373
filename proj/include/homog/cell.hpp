#pragma once

#include <complex>
#include <vector>

#include "homog/calculus.hpp"
#include "homog/coefficients.hpp"
#include "homog/linalg.hpp"

namespace homog {

/// Constant homogenized tensor with its verified ellipticity lower bound.
struct HomogenizedTensor {
    CoeffMatrix a_hat;
    double mu_check = 0.0;   // min of the Rayleigh quotient over sampled directions
    double max_entry = 0.0;

    double scalar() const { return a_hat(0, 0); }
    /// Symmetric part, the only piece entering the constant-coefficient kernel.
    CoeffMatrix sym() const {
        CoeffMatrix s = a_hat;
        for (int i = 0; i < a_hat.d; ++i)
            for (int j = 0; j < a_hat.d; ++j) s.entry(i, j) = 0.5 * (a_hat(i, j) + a_hat(j, i));
        return s;
    }
};

/// Flux matrix rows 1..d hold a_ij + a_ik dchi_j/dy_k - a^_ij; row d+1 holds
/// -chi_j (y_{d+1} = s). Mean-zero per component by construction.
struct FluxMatrix {
    GridFunction b;  // shape (d+1, d)
};

struct CorrectorSet {
    CoefficientField coefficient;
    Scheme scheme = Scheme::spectral;
    GridFunction chi;        // shape (d): chi_j
    GridFunction grad_chi;   // shape (d, d): [j][k] = d chi_j / d y_k
    HomogenizedTensor a_hat;
    FluxMatrix flux;
    double solve_residual = 0.0;
    int periods_used = 0;
    int krylov_iterations = 0;
};

struct CellSolveOptions {
    double tol = 0.0;          // 0 = scheme default (1e-9 spectral, 1e-7 fd)
    int max_periods = 200;
    int max_krylov = 800;
    double fixed_point_tol = 1e-13;

    double effective_tol(Scheme scheme) const {
        if (tol > 0.0) return tol;
        return scheme == Scheme::spectral ? 1e-9 : 1e-7;
    }
};

namespace detail {

/// Samples a_ij at the grid nodes; shape (d, d).
inline GridFunction sample_coefficient(const CoefficientField& A, const SpaceTimeTorusGrid& g) {
    const int d = g.d;
    GridFunction a = GridFunction::zeros(g, {std::size_t(d), std::size_t(d)});
    for (std::size_t node = 0; node < g.n_nodes(); ++node) {
        int sp[2];
        int it;
        g.decompose(node, sp, &it);
        CoeffMatrix m = A.evaluate(sp[0] * g.h_space, d == 2 ? sp[1] * g.h_space : 0.0,
                                   it * g.h_time);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a.at(a.comp_index({std::size_t(i), std::size_t(j)}), node) = m(i, j);
    }
    return a;
}

/// One Crank-Nicolson march of the d=1 cell problem over a full period,
/// conservative flux form with midpoint coefficient sampling. Returns the
/// slice at s=1; if `store` is non-null, writes the slice at each node time.
inline std::vector<double> march_period_1d(const CoefficientField& A, const SpaceTimeTorusGrid& g,
                                           std::vector<double> u, GridFunction* store) {
    const int n = g.n_space;
    const int nt = g.n_time;
    const double h = g.h_space;
    const double ds = g.h_time;
    const double lam = 0.5 * ds / (h * h);

    auto half_coeff = [&](int level, std::vector<double>& ah) {
        const double s = level * ds;
        for (int i = 0; i < n; ++i) ah[i] = A.scalar((i + 0.5) * h, s);
    };
    std::vector<double> a_lo(n), a_hi(n);
    half_coeff(0, a_lo);

    std::vector<double> low(n), diag(n), up(n), rhs(n);
    for (int level = 0; level < nt; ++level) {
        if (store) {
            for (int i = 0; i < n; ++i) store->values[std::size_t(level) * n + i] = u[i];
        }
        half_coeff(level + 1, a_hi);
        // explicit half-step: u + lam*(flux divergence) + ds/2*(g^n + g^{n+1})
        for (int i = 0; i < n; ++i) {
            const int im = i == 0 ? n - 1 : i - 1;
            const int ip = i == n - 1 ? 0 : i + 1;
            const double div_lo = a_lo[i] * (u[ip] - u[i]) - a_lo[im] * (u[i] - u[im]);
            const double g_lo = (a_lo[i] - a_lo[im]) / h;
            const double g_hi = (a_hi[i] - a_hi[im]) / h;
            rhs[i] = u[i] + lam * div_lo + 0.5 * ds * (g_lo + g_hi);
        }
        for (int i = 0; i < n; ++i) {
            const int im = i == 0 ? n - 1 : i - 1;
            diag[i] = 1.0 + lam * (a_hi[i] + a_hi[im]);
            up[i] = -lam * a_hi[i];
            low[i] = -lam * a_hi[im];
        }
        u = cyclic_tridiag_solve(low, diag, up, rhs);
        std::swap(a_lo, a_hi);  // a_lo now holds the level+1 coefficients
    }
    return u;
}

/// Fused spectral apply of T u = d_s u - div_y(A grad_y u) for one scalar
/// column; 2 + 2d transforms per call.
class SpectralCellOperator {
public:
    SpectralCellOperator(const GridFunction& a_nodes, const SpaceTimeTorusGrid& g)
        : a_(a_nodes), g_(g), dims_(g.dims()) {
        // mean coefficient for the constant-coefficient preconditioner
        auto means = cell_mean(a_nodes);
        const int d = g.d;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                a_mean_[i][j] = means[a_nodes.comp_index({std::size_t(i), std::size_t(j)})];
    }

    std::vector<double> apply(const std::vector<double>& u) const {
        const int d = g_.d;
        const std::size_t nn = g_.n_nodes();
        std::vector<std::complex<double>> u_hat(u.begin(), u.end());
        fft::Transform::forward(dims_, u_hat.data());

        // spatial gradients
        std::array<std::vector<double>, 2> grad;
        for (int axis = 0; axis < d; ++axis) {
            std::vector<std::complex<double>> buf = u_hat;
            detail::for_each_mode(g_, [&](std::size_t node, int i1, int i2, int it) {
                if (detail::axis_nyquist(g_, axis, i1, i2, it)) {
                    buf[node] = 0.0;
                    return;
                }
                double k = detail::axis_freq(g_, axis, i1, i2, it);
                buf[node] *= std::complex<double>(0.0, two_pi * k);
            });
            fft::Transform::backward(dims_, buf.data());
            grad[axis].resize(nn);
            const double inv = 1.0 / double(nn);
            for (std::size_t i = 0; i < nn; ++i) grad[axis][i] = buf[i].real() * inv;
        }

        // result spectrum: i k_t u_hat - sum_i i k_i flux_i_hat
        std::vector<std::complex<double>> out_hat = u_hat;
        detail::for_each_mode(g_, [&](std::size_t node, int i1, int i2, int it) {
            if (detail::axis_nyquist(g_, d, i1, i2, it)) {
                out_hat[node] = 0.0;
                return;
            }
            double kt = detail::axis_freq(g_, d, i1, i2, it);
            out_hat[node] *= std::complex<double>(0.0, two_pi * kt);
        });
        for (int i = 0; i < d; ++i) {
            std::vector<std::complex<double>> flux(nn);
            for (std::size_t node = 0; node < nn; ++node) {
                double f = 0.0;
                for (int j = 0; j < d; ++j)
                    f += a_.at(a_.comp_index({std::size_t(i), std::size_t(j)}), node) * grad[j][node];
                flux[node] = f;
            }
            fft::Transform::forward(dims_, flux.data());
            detail::for_each_mode(g_, [&](std::size_t node, int i1, int i2, int it) {
                if (detail::axis_nyquist(g_, i, i1, i2, it)) return;
                double k = detail::axis_freq(g_, i, i1, i2, it);
                out_hat[node] -= std::complex<double>(0.0, two_pi * k) * flux[node];
            });
        }
        fft::Transform::backward(dims_, out_hat.data());
        std::vector<double> out(nn);
        const double inv = 1.0 / double(nn);
        for (std::size_t i = 0; i < nn; ++i) out[i] = out_hat[i].real() * inv;
        return out;
    }

    /// Constant-coefficient inverse (d_s - div(A_mean grad))^{-1}, zero mode
    /// projected out.
    std::vector<double> precondition(const std::vector<double>& r) const {
        const int d = g_.d;
        const std::size_t nn = g_.n_nodes();
        std::vector<std::complex<double>> buf(r.begin(), r.end());
        fft::Transform::forward(dims_, buf.data());
        detail::for_each_mode(g_, [&](std::size_t node, int i1, int i2, int it) {
            double k[2] = {double(detail::axis_freq(g_, 0, i1, i2, it)),
                           d == 2 ? double(detail::axis_freq(g_, 1, i1, i2, it)) : 0.0};
            double kt = detail::axis_freq(g_, d, i1, i2, it);
            double q = 0.0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    q += 0.5 * (a_mean_[i][j] + a_mean_[j][i]) * k[i] * k[j];
            std::complex<double> sym(sqr(two_pi) * q, two_pi * kt);
            buf[node] = (k[0] == 0.0 && k[1] == 0.0 && kt == 0.0) ? 0.0 : buf[node] / sym;
        });
        fft::Transform::backward(dims_, buf.data());
        std::vector<double> out(nn);
        const double inv = 1.0 / double(nn);
        for (std::size_t i = 0; i < nn; ++i) out[i] = buf[i].real() * inv;
        return out;
    }

private:
    const GridFunction& a_;
    SpaceTimeTorusGrid g_;
    std::vector<int> dims_;
    double a_mean_[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
};

} // namespace detail

/// Homogenized tensor a^ = mean(A + A grad chi) with the ellipticity check
/// on a deterministic direction sample.
inline HomogenizedTensor homogenized_tensor(const CoefficientField& A, const GridFunction& a_nodes,
                                            const GridFunction& grad_chi) {
    const int d = a_nodes.grid.d;
    const std::size_t nn = a_nodes.grid.n_nodes();
    HomogenizedTensor H;
    H.a_hat.d = d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            long double acc = 0.0L;
            auto a_ij = a_nodes.comp(a_nodes.comp_index({std::size_t(i), std::size_t(j)}));
            for (std::size_t node = 0; node < nn; ++node) {
                double v = a_ij[node];
                for (int k = 0; k < d; ++k)
                    v += a_nodes.at(a_nodes.comp_index({std::size_t(i), std::size_t(k)}), node) *
                         grad_chi.at(grad_chi.comp_index({std::size_t(j), std::size_t(k)}), node);
                acc += v;
            }
            H.a_hat.entry(i, j) = static_cast<double>(acc / nn);
            H.max_entry = std::max(H.max_entry, std::abs(H.a_hat(i, j)));
        }
    H.mu_check = detail::rayleigh_min(H.a_hat, 64);
    if (H.mu_check < A.declared_mu() * (1.0 - 1e-6))
        throw Error("homogenized tensor failed the ellipticity check (corrector solve error?)");
    return H;
}

inline HomogenizedTensor homogenized_tensor(const CoefficientField& A, const CorrectorSet& set) {
    auto a_nodes = detail::sample_coefficient(A, set.chi.grid);
    return homogenized_tensor(A, a_nodes, set.grad_chi);
}

/// Assembles the flux matrix; checks the mean-zero invariant per component.
inline FluxMatrix flux_matrix(const GridFunction& a_nodes, const GridFunction& chi,
                              const GridFunction& grad_chi, const HomogenizedTensor& a_hat) {
    const int d = a_nodes.grid.d;
    const std::size_t nn = a_nodes.grid.n_nodes();
    FluxMatrix F;
    F.b = GridFunction::zeros(a_nodes.grid, {std::size_t(d + 1), std::size_t(d)});
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) {
            auto dst = F.b.comp(F.b.comp_index({std::size_t(i), std::size_t(j)}));
            for (std::size_t node = 0; node < nn; ++node) {
                double v = a_nodes.at(a_nodes.comp_index({std::size_t(i), std::size_t(j)}), node) -
                           a_hat.a_hat(i, j);
                for (int k = 0; k < d; ++k)
                    v += a_nodes.at(a_nodes.comp_index({std::size_t(i), std::size_t(k)}), node) *
                         grad_chi.at(grad_chi.comp_index({std::size_t(j), std::size_t(k)}), node);
                dst[node] = v;
            }
        }
        auto dst = F.b.comp(F.b.comp_index({std::size_t(d), std::size_t(j)}));
        auto src = chi.comp(j);
        for (std::size_t node = 0; node < nn; ++node) dst[node] = -src[node];
    }
    const double scale = std::max(max_abs(F.b.values), 1e-300);
    for (double m : cell_mean(F.b))
        if (std::abs(m) > mean_zero_rel_tol * scale)
            throw Error("flux matrix violates the mean-zero identity");
    return F;
}

inline FluxMatrix flux_matrix(const CoefficientField& A, const CorrectorSet& set,
                              const HomogenizedTensor& a_hat) {
    auto a_nodes = detail::sample_coefficient(A, set.chi.grid);
    return flux_matrix(a_nodes, set.chi, set.grad_chi, a_hat);
}

/// l2 residual of the discrete space-time divergence identity
/// sum_{i=1}^{d+1} d_i b_ij = 0 under the set's scheme, normalized by the
/// size of the terms being cancelled (scale-free cancellation measure).
inline double flux_divergence_residual(const CorrectorSet& set) {
    const int d = set.chi.grid.d;
    const auto& b = set.flux.b;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < d; ++j) {
        GridFunction div = GridFunction::zeros(b.grid);
        for (int i = 0; i <= d; ++i) {
            GridFunction row = GridFunction::zeros(b.grid);
            auto src = b.comp(b.comp_index({std::size_t(i), std::size_t(j)}));
            std::copy(src.begin(), src.end(), row.values.begin());
            auto der = derivative(row, i, set.scheme);
            den += sqr(norm2(der.values));
            for (std::size_t node = 0; node < div.values.size(); ++node)
                div.values[node] += der.values[node];
        }
        num += sqr(norm2(div.values));
    }
    return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

/// Solves the time-periodic cell problem for all corrector columns, then
/// assembles the homogenized tensor and flux matrix from the same solve.
///
/// d=1 marches the Crank-Nicolson period map to its fixed point (the map is
/// a strong contraction on spatial-mean-zero data). The spectral path then
/// polishes with preconditioned BiCGStab on the space-time spectral operator
/// so the spectral residual meets tol; the FD path keeps the marched orbit.
inline CorrectorSet solve_corrector(const CoefficientField& A, const SpaceTimeTorusGrid& grid,
                                    Scheme scheme = Scheme::spectral,
                                    const CellSolveOptions& opts = {}) {
    if (A.d() != grid.d) throw Error("solve_corrector: coefficient/grid dimension mismatch");
    if (A.declared_mu() <= 0.0) throw Error("solve_corrector: coefficient not elliptic");
    if (scheme == Scheme::finite_difference && grid.d != 1)
        throw Error("solve_corrector: finite-difference cell solve supports d=1 only");

    const int d = grid.d;
    const double tol = opts.effective_tol(scheme);
    auto a_nodes = detail::sample_coefficient(A, grid);

    CorrectorSet set;
    set.coefficient = A;
    set.scheme = scheme;
    set.chi = GridFunction::zeros(grid, {std::size_t(d)});

    detail::SpectralCellOperator op(a_nodes, grid);

    // Spectral right-hand sides g_j = sum_i d_i a_ij. Columns whose RHS is
    // pure differentiation round-off (constant coefficients) are solved as
    // exactly zero so Â = mean(A) without noise.
    auto make_rhs = [&](int j) {
        GridFunction g_rhs = GridFunction::zeros(grid);
        for (int i = 0; i < d; ++i) {
            GridFunction col = GridFunction::zeros(grid);
            auto src = a_nodes.comp(a_nodes.comp_index({std::size_t(i), std::size_t(j)}));
            std::copy(src.begin(), src.end(), col.values.begin());
            auto der = derivative(col, i, Scheme::spectral);
            for (std::size_t node = 0; node < g_rhs.values.size(); ++node)
                g_rhs.values[node] += der.values[node];
        }
        if (max_abs(g_rhs.values) <= 1e-11 * std::max(1.0, max_abs(a_nodes.values)))
            g_rhs.values.assign(g_rhs.values.size(), 0.0);
        return g_rhs;
    };

    double fixed_point_diff = 0.0;
    for (int j = 0; j < d; ++j) {
        GridFunction g_rhs = make_rhs(j);
        const double g_norm = norm2(g_rhs.values);

        std::vector<double> column(grid.n_nodes(), 0.0);
        if (g_norm > 0.0 && d == 1) {
            // period-map fixed point on the starting slice
            std::vector<double> slice(grid.n_space, 0.0);
            bool converged = false;
            for (int period = 1; period <= opts.max_periods; ++period) {
                auto next = detail::march_period_1d(A, grid, slice, nullptr);
                double diff = 0.0, scale = 1.0;
                for (int i = 0; i < grid.n_space; ++i) {
                    diff = std::max(diff, std::abs(next[i] - slice[i]));
                    scale = std::max(scale, std::abs(next[i]));
                }
                slice = std::move(next);
                set.periods_used = period;
                fixed_point_diff = std::max(fixed_point_diff, 0.0);
                if (diff <= opts.fixed_point_tol * scale) {
                    fixed_point_diff = diff;
                    converged = true;
                    break;
                }
            }
            if (!converged)
                throw Error("solve_corrector: time-periodicity fixed point did not converge within " +
                            std::to_string(opts.max_periods) + " periods");
            GridFunction orbit = GridFunction::zeros(grid);
            detail::march_period_1d(A, grid, slice, &orbit);
            column = std::move(orbit.values);
        }

        if (g_norm > 0.0 && scheme == Scheme::spectral) {
            auto applied = bicgstab([&](const std::vector<double>& u) { return op.apply(u); },
                                    [&](const std::vector<double>& r) { return op.precondition(r); },
                                    g_rhs.values, column, tol, opts.max_krylov);
            set.krylov_iterations = std::max(set.krylov_iterations, applied.iterations);
            if (!applied.converged)
                throw Error("solve_corrector: spectral space-time solve stalled at relative residual " +
                            std::to_string(applied.rel_residual));
        }

        std::copy(column.begin(), column.end(),
                  set.chi.values.begin() + std::size_t(j) * grid.n_nodes());
    }

    // normalization: the cell problem fixes chi only up to its cell mean
    remove_mean(set.chi);
    if (!set.chi.finite()) throw Error("solve_corrector: non-finite corrector values");

    if (scheme == Scheme::spectral) {
        // relative spectral residual recomputed after normalization
        double num = 0.0, den = 0.0;
        for (int j = 0; j < d; ++j) {
            GridFunction g_rhs = make_rhs(j);
            std::vector<double> column(set.chi.comp(j).begin(), set.chi.comp(j).end());
            auto t = op.apply(column);
            double r2 = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) r2 += sqr(t[i] - g_rhs.values[i]);
            num += r2;
            den += sqr(norm2(g_rhs.values));
        }
        set.solve_residual = den == 0.0 ? 0.0 : std::sqrt(num / den);
    } else {
        // FD path converges the period map; report the fixed-point gap
        set.solve_residual = fixed_point_diff;
    }

    set.grad_chi = gradient(set.chi, GradientAxes::spatial_only, scheme);
    set.a_hat = homogenized_tensor(A, a_nodes, set.grad_chi);
    set.flux = flux_matrix(a_nodes, set.chi, set.grad_chi, set.a_hat);
    return set;
}

} // namespace homog
