#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "homog/common.hpp"

namespace homog {

/// Uniform space-time box lattice {x0 + i hx} x {t0 + j ht}, row layout
/// values[it*nx + ix]. The carrier for sampled physical-space fields.
struct BoxLattice {
    double x0 = 0.0, t0 = 0.0;
    double hx = 0.0, ht = 0.0;
    std::size_t nx = 0, nt = 0;
    std::vector<double> values;

    static BoxLattice make(double x0, double t0, double hx, double ht, std::size_t nx,
                           std::size_t nt) {
        BoxLattice b{x0, t0, hx, ht, nx, nt, {}};
        b.values.assign(nx * nt, 0.0);
        return b;
    }

    double x(std::size_t ix) const { return x0 + static_cast<double>(ix) * hx; }
    double t(std::size_t it) const { return t0 + static_cast<double>(it) * ht; }
    double& at(std::size_t ix, std::size_t it) { return values[it * nx + ix]; }
    double at(std::size_t ix, std::size_t it) const { return values[it * nx + ix]; }

    template <typename Fn>
    void fill(Fn&& fn) {
        for (std::size_t it = 0; it < nt; ++it)
            for (std::size_t ix = 0; ix < nx; ++ix) at(ix, it) = fn(x(ix), t(it));
    }

    bool same_geometry(const BoxLattice& o) const {
        return x0 == o.x0 && t0 == o.t0 && hx == o.hx && ht == o.ht && nx == o.nx && nt == o.nt;
    }
};

/// Parabolic smoothing operator S_eps(f) = f * theta_eps at scale
/// (eps, eps^2), with theta a quartic bump supported in
/// O = {|x|^2 + |t| <= 1}:
///     theta(x,t) = c_N (1 - x^2 - |t|)^4 (1 + x)    (default)
///     theta(x,t) = c_N (1 - x^2 - |t|)^4            (even variant)
/// The default carries a nonzero first spatial moment so the smoothing
/// defect S_eps(grad f) - grad f is genuinely first order in eps; the even
/// variant exists for the moment-cancellation property. Discrete weights
/// are normalized to unit mass, so S_eps preserves constants to round-off.
class SmoothingKernel {
public:
    /// d=1 kernel; nq midpoint quadrature cells per axis over the support box.
    explicit SmoothingKernel(double eps, int nq = 48, bool even = false)
        : eps_(eps), nq_(nq), even_(even) {
        if (eps <= 0.0) throw Error("SmoothingKernel: eps must be positive");
        if (nq < 8) throw Error("SmoothingKernel: quadrature too coarse");
        const double cell = 2.0 / nq;
        xi_.reserve(std::size_t(nq) * nq);
        tau_.reserve(std::size_t(nq) * nq);
        w_.reserve(std::size_t(nq) * nq);
        long double mass = 0.0L, grad_l1 = 0.0L, c_mass = 0.0L;
        for (int p = 0; p < nq; ++p)
            for (int q = 0; q < nq; ++q) {
                double xh = -1.0 + (p + 0.5) * cell;
                double th = -1.0 + (q + 0.5) * cell;
                double v = shape(xh, th);
                c_mass += v * cell * cell;
                grad_l1 += std::abs(shape_dx(xh, th)) * cell * cell;
                if (v <= 0.0) continue;
                xi_.push_back(eps * xh);
                tau_.push_back(eps * eps * th);
                w_.push_back(v);
                mass += v;
            }
        for (double& w : w_) w /= static_cast<double>(mass);
        c_norm_ = 1.0 / static_cast<double>(c_mass);
        // int |d_x theta_eps| dx dt = eps^{-1} c_N int |d_x theta|
        grad_l1_bound_ = c_norm_ * static_cast<double>(grad_l1) / eps;
    }

    double eps() const { return eps_; }
    bool even() const { return even_; }
    double continuous_normalizer() const { return c_norm_; }
    double grad_l1() const { return grad_l1_bound_; }

    /// S_eps of a closed-form integrand, evaluated at one point.
    template <typename Fn>
    double apply(Fn&& f, double x, double t) const {
        long double acc = 0.0L;
        for (std::size_t q = 0; q < w_.size(); ++q) acc += w_[q] * f(x - xi_[q], t - tau_[q]);
        return static_cast<double>(acc);
    }

    /// S_eps of a sampled field, lattice-aligned weights: the output is the
    /// maximal interior sub-lattice; the convolution never zero-pads, so
    /// insufficient padding is an error. Lattice-aligned discrete weights
    /// commute exactly with lattice difference operators.
    BoxLattice apply_sampled(const BoxLattice& f) const {
        if (f.hx > eps_ / 4.0 + 1e-15 || f.ht > eps_ * eps_ / 4.0 + 1e-15)
            throw Error("smooth: field resolution is coarser than eps/4 (space) or eps^2/4 (time)");
        const int px = static_cast<int>(std::floor(eps_ / f.hx));
        const int pt = static_cast<int>(std::floor(eps_ * eps_ / f.ht));
        if (2 * px + 1 >= static_cast<int>(f.nx) || 2 * pt + 1 >= static_cast<int>(f.nt))
            throw Error("smooth: insufficient padding for the mollifier support");

        // lattice-aligned weights, unit discrete mass
        std::vector<double> w((2 * px + 1) * std::size_t(2 * pt + 1), 0.0);
        long double mass = 0.0L;
        for (int p = -px; p <= px; ++p)
            for (int q = -pt; q <= pt; ++q) {
                double v = shape(p * f.hx / eps_, q * f.ht / (eps_ * eps_));
                w[(q + pt) * std::size_t(2 * px + 1) + (p + px)] = v;
                mass += v;
            }
        if (mass <= 0.0) throw Error("smooth: mollifier support resolves no lattice point");
        for (double& v : w) v /= static_cast<double>(mass);

        BoxLattice out = BoxLattice::make(f.x(px), f.t(pt), f.hx, f.ht, f.nx - 2 * px,
                                          f.nt - 2 * pt);
        for (std::size_t it = 0; it < out.nt; ++it)
            for (std::size_t ix = 0; ix < out.nx; ++ix) {
                long double acc = 0.0L;
                for (int q = -pt; q <= pt; ++q)
                    for (int p = -px; p <= px; ++p)
                        acc += w[(q + pt) * std::size_t(2 * px + 1) + (p + px)] *
                               f.at(ix + px - p, it + pt - q);
                out.at(ix, it) = static_cast<double>(acc);
            }
        return out;
    }

private:
    double shape(double xh, double th) const {
        double r = 1.0 - xh * xh - std::abs(th);
        if (r <= 0.0) return 0.0;
        double base = r * r * r * r;
        return even_ ? base : base * (1.0 + xh);
    }
    double shape_dx(double xh, double th) const {
        double r = 1.0 - xh * xh - std::abs(th);
        if (r <= 0.0) return 0.0;
        double base = r * r * r * r;
        double dbase = -8.0 * xh * r * r * r;
        return even_ ? dbase : dbase * (1.0 + xh) + base;
    }

    double eps_;
    int nq_;
    bool even_;
    std::vector<double> xi_, tau_, w_;
    double c_norm_ = 1.0;
    double grad_l1_bound_ = 0.0;
};

} // namespace homog
