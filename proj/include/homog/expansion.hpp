#pragma once

#include <array>
#include <memory>
#include <vector>

#include "homog/cell.hpp"
#include "homog/dual.hpp"
#include "homog/evaluator.hpp"
#include "homog/kernels.hpp"
#include "homog/smoothing.hpp"

namespace homog {

/// Smoothed derivatives of the homogenized kernel column u_0 on a lattice:
/// S(d_x u_0), S(d_x^2 u_0), S(d_t d_x u_0), S(d_x^3 u_0). All later
/// derivatives of the smoothed field reduce to these via the commutation of
/// S with derivatives (exact here: S is a fixed finite sum of translates of
/// closed forms).
struct SmoothedKernelDerivatives {
    BoxLattice s_dx, s_dxx, s_dtdx, s_dxxx;
};

inline SmoothedKernelDerivatives smooth_kernel_derivatives(const SmoothingKernel& S,
                                                           const HeatKernel& u0, double pole_y,
                                                           double pole_s,
                                                           const BoxLattice& geometry) {
    SmoothedKernelDerivatives out;
    auto run = [&](auto&& deriv) {
        BoxLattice b = geometry;
        b.fill([&](double x, double t) {
            return S.apply([&](double xx, double tt) { return deriv(xx, tt); }, x, t);
        });
        return b;
    };
    out.s_dx = run([&](double x, double t) { return u0.dx(x, t, pole_y, pole_s); });
    out.s_dxx = run([&](double x, double t) { return u0.dxx(x, t, pole_y, pole_s); });
    out.s_dtdx = run([&](double x, double t) { return u0.dt_dx(x, t, pole_y, pole_s); });
    out.s_dxxx = run([&](double x, double t) { return u0.dxxx(x, t, pole_y, pole_s); });
    return out;
}

/// Two-scale expansion assembly for d = 1: w_eps and the six-term forcing
/// F_eps with corrector factors evaluated at (x/eps, t/eps^2).
class TwoScaleAssembler {
public:
    TwoScaleAssembler(const CoefficientField& A, const CorrectorSet& correctors,
                      const DualCorrectorSet& duals, double eps,
                      EvalBackend backend = EvalBackend::spectral)
        : A_(&A),
          eps_(eps),
          a_hat_(correctors.a_hat.scalar()),
          chi_(correctors.chi, backend) {
        if (correctors.chi.grid.d != 1) throw Error("TwoScaleAssembler: d=1 only");
        if (eps <= 0.0) throw Error("TwoScaleAssembler: eps must be positive");
        // phi_{(d+1)11} = phi_211 and its spatial cell-gradient
        GridFunction time_row = GridFunction::zeros(correctors.chi.grid);
        auto src = duals.phi.comp(duals.phi_index(1, 0, 0));
        std::copy(src.begin(), src.end(), time_row.values.begin());
        phi_211_ = std::make_unique<PeriodicInterpolant>(time_row, backend);

        GridFunction grad_row = GridFunction::zeros(correctors.chi.grid);
        auto gsrc = duals.grad_phi_spatial.comp(0);
        std::copy(gsrc.begin(), gsrc.end(), grad_row.values.begin());
        grad_phi_211_ = std::make_unique<PeriodicInterpolant>(grad_row, backend);
    }

    double chi_at(double x, double t) const { return chi_(x / eps_, t / (eps_ * eps_))[0]; }
    double phi211_at(double x, double t) const {
        return (*phi_211_)(x / eps_, t / (eps_ * eps_))[0];
    }
    double grad_phi211_at(double x, double t) const {
        return (*grad_phi_211_)(x / eps_, t / (eps_ * eps_))[0];
    }
    double a_eps(double x, double t) const { return A_->scalar(x / eps_, t / (eps_ * eps_)); }

    /// w_eps = u_eps - u_0 - eps chi^eps S(d_x u_0) - eps^2 phi_211^eps d_x S(d_x u_0),
    /// assembled on the lattice carrying u_eps.
    BoxLattice build_w(const BoxLattice& u_eps, const HeatKernel& u0, double pole_y, double pole_s,
                       const SmoothedKernelDerivatives& sd) const {
        if (!u_eps.same_geometry(sd.s_dx)) throw Error("build_w: lattice mismatch");
        BoxLattice w = u_eps;
        for (std::size_t it = 0; it < w.nt; ++it)
            for (std::size_t ix = 0; ix < w.nx; ++ix) {
                double x = w.x(ix), t = w.t(it);
                double val = u_eps.at(ix, it) - u0.value(x, t, pole_y, pole_s) -
                             eps_ * chi_at(x, t) * sd.s_dx.at(ix, it) -
                             eps_ * eps_ * phi211_at(x, t) * sd.s_dxx.at(ix, it);
                w.at(ix, it) = val;
            }
        return w;
    }

    struct Forcing {
        BoxLattice total;
        std::array<BoxLattice, 6> terms;
    };

    /// The six-term forcing of the parabolic identity
    /// (d_t + L_eps) w_eps = eps div(F_eps), specialized to d = 1
    /// (the spatial phi row vanishes by antisymmetry, term 3 = 0).
    /// The signs of terms 5 and 6 follow from the convention
    /// b_{(d+1)j} = -chi_j fixed by the dual-corrector construction here;
    /// they make the strong-form identity hold pointwise to solver accuracy.
    Forcing build_F(const BoxLattice& geometry, const SmoothedKernelDerivatives& sd,
                    const HeatKernel& u0, double pole_y, double pole_s) const {
        Forcing f;
        f.total = geometry;
        for (auto& t : f.terms) t = geometry;
        for (std::size_t it = 0; it < geometry.nt; ++it)
            for (std::size_t ix = 0; ix < geometry.nx; ++ix) {
                double x = geometry.x(ix), t = geometry.t(it);
                double a = a_eps(x, t);
                double chi = chi_at(x, t);
                double phi = phi211_at(x, t);
                double dphi = grad_phi211_at(x, t);
                double dx_u0 = u0.dx(x, t, pole_y, pole_s);

                double t1 = (a - a_hat_) / eps_ * (dx_u0 - sd.s_dx.at(ix, it));
                double t2 = a * chi * sd.s_dxx.at(ix, it);
                double t3 = 0.0;  // phi_{111} = 0 by antisymmetry
                double t4 = eps_ * (-phi) * sd.s_dtdx.at(ix, it);  // phi_{121} = -phi_{211}
                double t5 = a * dphi * sd.s_dxx.at(ix, it);
                double t6 = eps_ * a * phi * sd.s_dxxx.at(ix, it);

                f.terms[0].at(ix, it) = t1;
                f.terms[1].at(ix, it) = t2;
                f.terms[2].at(ix, it) = t3;
                f.terms[3].at(ix, it) = t4;
                f.terms[4].at(ix, it) = t5;
                f.terms[5].at(ix, it) = t6;
                f.total.at(ix, it) = t1 + t2 + t3 + t4 + t5 + t6;
            }
        return f;
    }

private:
    const CoefficientField* A_;
    double eps_;
    double a_hat_;
    PeriodicInterpolant chi_;
    std::unique_ptr<PeriodicInterpolant> phi_211_;
    std::unique_ptr<PeriodicInterpolant> grad_phi_211_;
};

/// Smooth compactly supported space-time bump used as a weak-form test
/// function; closed-form derivatives.
struct BumpTestFunction {
    double cx = 0.0, ct = 0.0, rx = 1.0, rt = 1.0;

    static double p(double u) {
        double r = 1.0 - u * u;
        return r > 0.0 ? r * r * r : 0.0;
    }
    static double dp(double u) {
        double r = 1.0 - u * u;
        return r > 0.0 ? -6.0 * u * r * r : 0.0;
    }
    double v(double x, double t) const { return p((x - cx) / rx) * p((t - ct) / rt); }
    double vx(double x, double t) const { return dp((x - cx) / rx) / rx * p((t - ct) / rt); }
    double vt(double x, double t) const { return p((x - cx) / rx) * dp((t - ct) / rt) / rt; }
};

/// Deterministic family of test functions supported strictly inside the box.
inline std::vector<BumpTestFunction> make_test_functions(double x_lo, double x_hi, double t_lo,
                                                         double t_hi, int count = 10) {
    std::vector<BumpTestFunction> out;
    const double wx = x_hi - x_lo, wt = t_hi - t_lo;
    for (int q = 0; q < count; ++q) {
        BumpTestFunction b;
        int col = q % 5, row = q / 5;
        b.cx = x_lo + wx * (0.25 + 0.125 * col);
        b.ct = t_lo + wt * (0.35 + 0.3 * row);
        b.rx = wx * (0.18 + 0.02 * col);
        b.rt = wt * (0.25 + 0.03 * row);
        out.push_back(b);
    }
    return out;
}

/// max over test functions of |integral(-w dv/dt + a^eps Dw dv/dx + eps F dv/dx)|
/// normalized by ||v||_L2. Dw is the lattice central difference; the test
/// functions vanish near the boundary so no boundary terms arise.
inline double weak_residual(const CoefficientField& A, double eps, const BoxLattice& w,
                            const BoxLattice& F, const std::vector<BumpTestFunction>& tests) {
    if (!w.same_geometry(F)) throw Error("weak_residual: lattice mismatch");
    double worst = 0.0;
    for (const auto& test : tests) {
        long double acc = 0.0L, vnorm = 0.0L;
        for (std::size_t it = 0; it < w.nt; ++it)
            for (std::size_t ix = 1; ix + 1 < w.nx; ++ix) {
                double x = w.x(ix), t = w.t(it);
                double v_t = test.vt(x, t);
                double v_x = test.vx(x, t);
                double vv = test.v(x, t);
                vnorm += vv * vv;
                if (v_t == 0.0 && v_x == 0.0) continue;
                double dw = (w.at(ix + 1, it) - w.at(ix - 1, it)) / (2.0 * w.hx);
                double a = A.scalar(x / eps, t / (eps * eps));
                acc += -w.at(ix, it) * v_t + a * dw * v_x + eps * F.at(ix, it) * v_x;
            }
        double integral = static_cast<double>(acc) * w.hx * w.ht;
        double vn = std::sqrt(static_cast<double>(vnorm) * w.hx * w.ht);
        if (vn == 0.0) throw Error("weak_residual: test function vanishes on the lattice");
        worst = std::max(worst, std::abs(integral) / vn);
    }
    return worst;
}

/// Copies a single-time-block KernelSample onto its BoxLattice geometry.
/// Requires uniformly spaced times and lattice points.
inline BoxLattice from_kernel_sample(const KernelSample& sample) {
    if (sample.times.size() < 2 || sample.lattice.size() < 2)
        throw Error("from_kernel_sample: need at least a 2x2 lattice");
    const double ht = sample.times[1] - sample.times[0];
    const double hx = sample.lattice[1] - sample.lattice[0];
    for (std::size_t i = 1; i < sample.times.size(); ++i)
        if (std::abs(sample.times[i] - sample.times[i - 1] - ht) > 1e-9 * ht)
            throw Error("from_kernel_sample: non-uniform time spacing");
    for (std::size_t i = 1; i < sample.lattice.size(); ++i)
        if (std::abs(sample.lattice[i] - sample.lattice[i - 1] - hx) > 1e-9 * hx)
            throw Error("from_kernel_sample: non-uniform lattice spacing");
    BoxLattice b = BoxLattice::make(sample.lattice.front(), sample.times.front(), hx, ht,
                                    sample.lattice.size(), sample.times.size());
    b.values = sample.values;
    return b;
}

} // namespace homog
