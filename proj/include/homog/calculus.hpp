#pragma once

#include <complex>
#include <span>
#include <vector>

#include "homog/fft.hpp"
#include "homog/grid.hpp"

namespace homog {

/// Discrete calculus scheme on the torus. Spectral is the default; the
/// finite-difference path exists for robustness studies.
enum class Scheme { spectral, finite_difference };

enum class GradientAxes { spatial_only, space_time };

namespace detail {

inline std::vector<std::complex<double>> to_spectrum(const SpaceTimeTorusGrid& g,
                                                     std::span<const double> field) {
    std::vector<std::complex<double>> buf(field.begin(), field.end());
    fft::Transform::forward(g.dims(), buf.data());
    return buf;
}

inline void from_spectrum(const SpaceTimeTorusGrid& g, std::vector<std::complex<double>> buf,
                          std::span<double> out) {
    fft::Transform::backward(g.dims(), buf.data());
    const double inv_n = 1.0 / static_cast<double>(g.n_nodes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i].real() * inv_n;
}

/// Applies fn(node, spatial frequencies..., time frequency index) to a spectrum.
/// `fn` receives the per-axis grid indices (not signed frequencies).
template <typename Fn>
inline void for_each_mode(const SpaceTimeTorusGrid& g, Fn&& fn) {
    const int n = g.n_space;
    const int nt = g.n_time;
    std::size_t node = 0;
    if (g.d == 1) {
        for (int it = 0; it < nt; ++it)
            for (int i1 = 0; i1 < n; ++i1) fn(node++, i1, 0, it);
    } else {
        for (int it = 0; it < nt; ++it)
            for (int i1 = 0; i1 < n; ++i1)
                for (int i2 = 0; i2 < n; ++i2) fn(node++, i1, i2, it);
    }
}

/// Signed frequency along `axis` for the mode with per-axis indices (i1,i2,it).
inline int axis_freq(const SpaceTimeTorusGrid& g, int axis, int i1, int i2, int it) {
    if (axis == g.d) return fft::freq(it, g.n_time);
    return fft::freq(axis == 0 ? i1 : i2, g.n_space);
}

inline bool axis_nyquist(const SpaceTimeTorusGrid& g, int axis, int i1, int i2, int it) {
    if (axis == g.d) return fft::is_nyquist(it, g.n_time);
    return fft::is_nyquist(axis == 0 ? i1 : i2, g.n_space);
}

inline void spectral_derivative(const SpaceTimeTorusGrid& g, std::span<const double> in,
                                int axis, std::span<double> out) {
    auto buf = to_spectrum(g, in);
    for_each_mode(g, [&](std::size_t node, int i1, int i2, int it) {
        if (axis_nyquist(g, axis, i1, i2, it)) {
            buf[node] = 0.0;  // odd-order symbol vanishes on the Nyquist mode
            return;
        }
        const double k = axis_freq(g, axis, i1, i2, it);
        buf[node] *= std::complex<double>(0.0, two_pi * k);
    });
    from_spectrum(g, std::move(buf), out);
}

inline void central_derivative(const SpaceTimeTorusGrid& g, std::span<const double> in,
                               int axis, std::span<double> out) {
    const double inv_2h = 0.5 / g.axis_h(axis);
    for (std::size_t node = 0; node < g.n_nodes(); ++node) {
        out[node] = (in[g.shift(node, axis, +1)] - in[g.shift(node, axis, -1)]) * inv_2h;
    }
}

/// True when the scheme's Laplacian symbol vanishes identically on this mode
/// (decided structurally, not by comparing the float symbol to zero).
/// Spectral: only the constant mode. FD composed-central: every axis index
/// at 0 or Nyquist.
inline bool laplace_symbol_is_zero(const SpaceTimeTorusGrid& g, Scheme scheme,
                                   int i1, int i2, int it) {
    for (int axis = 0; axis <= g.d; ++axis) {
        const int k = axis_freq(g, axis, i1, i2, it);
        if (scheme == Scheme::spectral) {
            if (k != 0) return false;
        } else {
            if (k != 0 && !axis_nyquist(g, axis, i1, i2, it)) return false;
        }
    }
    return true;
}

/// Laplacian symbol over all d+1 axes. Spectral: -4pi^2 |k|^2 including the
/// Nyquist modes. FD: the composed central-difference symbol
/// -sum_a (n_a sin(2 pi k_a / n_a))^2, which also vanishes when every axis
/// index sits at 0 or Nyquist.
inline double laplace_symbol(const SpaceTimeTorusGrid& g, Scheme scheme,
                             int i1, int i2, int it) {
    if (laplace_symbol_is_zero(g, scheme, i1, i2, it)) return 0.0;
    double sym = 0.0;
    for (int axis = 0; axis <= g.d; ++axis) {
        const int n = g.axis_size(axis);
        const int k = axis_freq(g, axis, i1, i2, it);
        if (scheme == Scheme::spectral) {
            sym -= sqr(two_pi * k);
        } else if (!axis_nyquist(g, axis, i1, i2, it)) {
            // composed central-difference symbol; exactly 0 on a Nyquist axis
            sym -= sqr(n * std::sin(two_pi * k / static_cast<double>(n)));
        }
    }
    return sym;
}

} // namespace detail

/// Arithmetic mean over all nodes, per component (exact trapezoidal rule
/// on the torus).
inline std::vector<double> cell_mean(const GridFunction& f) {
    std::vector<double> means(f.n_comp());
    const double inv_n = 1.0 / static_cast<double>(f.grid.n_nodes());
    for (std::size_t c = 0; c < f.n_comp(); ++c) {
        auto s = f.comp(c);
        means[c] = sum(s.data(), s.size()) * inv_n;
    }
    return means;
}

/// Subtracts the per-component mean in place.
inline void remove_mean(GridFunction& f) {
    auto means = cell_mean(f);
    for (std::size_t c = 0; c < f.n_comp(); ++c) {
        auto s = f.comp(c);
        for (double& v : s) v -= means[c];
    }
}

/// Periodic derivative along every requested axis; appends one tensor index
/// of size d (spatial_only) or d+1 (space_time) as the LAST index:
///   gradient(f)[..., a] = d f[...] / d y_a,  with axis d = s.
inline GridFunction gradient(const GridFunction& f, GradientAxes axes,
                             Scheme scheme = Scheme::spectral) {
    const int n_axes = (axes == GradientAxes::spatial_only) ? f.grid.d : f.grid.d + 1;
    std::vector<std::size_t> shape = f.shape;
    shape.push_back(static_cast<std::size_t>(n_axes));
    GridFunction out = GridFunction::zeros(f.grid, shape);
    for (std::size_t c = 0; c < f.n_comp(); ++c) {
        for (int axis = 0; axis < n_axes; ++axis) {
            auto dst = out.comp(c * n_axes + axis);
            if (scheme == Scheme::spectral)
                detail::spectral_derivative(f.grid, f.comp(c), axis, dst);
            else
                detail::central_derivative(f.grid, f.comp(c), axis, dst);
        }
    }
    return out;
}

/// Single-axis derivative, same scheme conventions as gradient().
inline GridFunction derivative(const GridFunction& f, int axis, Scheme scheme = Scheme::spectral) {
    GridFunction out = GridFunction::zeros(f.grid, f.shape);
    for (std::size_t c = 0; c < f.n_comp(); ++c) {
        if (scheme == Scheme::spectral)
            detail::spectral_derivative(f.grid, f.comp(c), axis, out.comp(c));
        else
            detail::central_derivative(f.grid, f.comp(c), axis, out.comp(c));
    }
    return out;
}

/// (d+1)-dimensional Laplacian matching the scheme's Poisson symbol.
inline GridFunction laplacian_d1(const GridFunction& f, Scheme scheme = Scheme::spectral) {
    GridFunction out = GridFunction::zeros(f.grid, f.shape);
    for (std::size_t c = 0; c < f.n_comp(); ++c) {
        auto buf = detail::to_spectrum(f.grid, f.comp(c));
        detail::for_each_mode(f.grid, [&](std::size_t node, int i1, int i2, int it) {
            buf[node] *= detail::laplace_symbol(f.grid, scheme, i1, i2, it);
        });
        detail::from_spectrum(f.grid, std::move(buf), out.comp(c));
    }
    return out;
}

inline constexpr double mean_zero_rel_tol = 1e-8;

/// Solves Delta_{d+1} f = b on the torus with cell_mean(f) = 0, per component.
/// Rejects inputs whose cell mean exceeds mean_zero_rel_tol * ||b||_inf
/// (a nonzero mean signals an upstream flux-matrix bug). Under the FD scheme
/// the modes annihilated by the composed central symbol are projected out.
inline GridFunction poisson_invert_d1(const GridFunction& b, Scheme scheme = Scheme::spectral) {
    const auto means = cell_mean(b);
    const double scale = max_abs(b.values);  // tolerance is relative to ||b||_inf
    for (std::size_t c = 0; c < b.n_comp(); ++c) {
        if (std::abs(means[c]) > mean_zero_rel_tol * scale)
            throw Error("poisson_invert_d1: input component " + std::to_string(c) +
                        " is not mean-zero (mean " + std::to_string(means[c]) + ")");
    }
    GridFunction out = GridFunction::zeros(b.grid, b.shape);
    for (std::size_t c = 0; c < b.n_comp(); ++c) {
        auto buf = detail::to_spectrum(b.grid, b.comp(c));
        detail::for_each_mode(b.grid, [&](std::size_t node, int i1, int i2, int it) {
            const double sym = detail::laplace_symbol(b.grid, scheme, i1, i2, it);
            buf[node] = (sym == 0.0) ? 0.0 : buf[node] / sym;
        });
        detail::from_spectrum(b.grid, std::move(buf), out.comp(c));
    }
    return out;
}

} // namespace homog
