#pragma once

#include <functional>
#include <vector>

#include "homog/common.hpp"

namespace homog {

/// Thomas algorithm for a strictly diagonally dominant tridiagonal system.
/// low[0] and up[n-1] are ignored. Overwrites `rhs` with the solution.
inline void tridiag_solve(std::vector<double>& low, std::vector<double>& diag,
                          std::vector<double>& up, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    c[0] = up[0] / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        double m = diag[i] - low[i] * c[i - 1];
        c[i] = up[i] / m;
        rhs[i] = (rhs[i] - low[i] * rhs[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

/// Periodic (cyclic) tridiagonal solve via the Sherman-Morrison correction.
/// low[i] couples to i-1, up[i] to i+1, low[0] and up[n-1] wrap around.
inline std::vector<double> cyclic_tridiag_solve(const std::vector<double>& low,
                                                const std::vector<double>& diag,
                                                const std::vector<double>& up,
                                                const std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (n < 3) throw Error("cyclic_tridiag_solve: system too small");
    const double alpha = low[0];     // coupling (0, n-1)
    const double beta = up[n - 1];   // coupling (n-1, 0)
    const double gamma = -diag[0];

    std::vector<double> d(diag), l(low), u(up);
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;

    std::vector<double> x(rhs);
    {
        std::vector<double> ll(l), dd(d), uu(u);
        tridiag_solve(ll, dd, uu, x);
    }
    std::vector<double> z(n, 0.0);
    z[0] = gamma;
    z[n - 1] = alpha;
    {
        std::vector<double> ll(l), dd(d), uu(u);
        tridiag_solve(ll, dd, uu, z);
    }
    const double vx = x[0] + beta / gamma * x[n - 1];
    const double vz = 1.0 + z[0] + beta / gamma * z[n - 1];
    const double factor = vx / vz;
    for (std::size_t i = 0; i < n; ++i) x[i] -= factor * z[i];
    return x;
}

/// Allocation-free cyclic tridiagonal solver for time-stepping loops: one
/// factorization shared by the Sherman-Morrison pair of back-substitutions.
class CyclicTridiagWorkspace {
public:
    void resize(std::size_t n) {
        c_.resize(n);
        z_.resize(n);
        m_.resize(n);
    }

    /// Solves in place: rhs becomes the solution. low/diag/up as in
    /// cyclic_tridiag_solve.
    void solve(const std::vector<double>& low, const std::vector<double>& diag,
               const std::vector<double>& up, std::vector<double>& rhs) {
        const std::size_t n = diag.size();
        const double alpha = low[0];
        const double beta = up[n - 1];
        const double gamma = -diag[0];

        // factorize the modified tridiagonal matrix once
        double d0 = diag[0] - gamma;
        m_[0] = d0;
        c_[0] = up[0] / d0;
        for (std::size_t i = 1; i < n; ++i) {
            double di = diag[i];
            if (i == n - 1) di -= alpha * beta / gamma;
            m_[i] = di - low[i] * c_[i - 1];
            c_[i] = up[i] / m_[i];
        }

        // back-substitute both right-hand sides
        rhs[0] /= m_[0];
        z_[0] = gamma / m_[0];
        for (std::size_t i = 1; i < n; ++i) {
            rhs[i] = (rhs[i] - low[i] * rhs[i - 1]) / m_[i];
            z_[i] = ((i == n - 1 ? alpha : 0.0) - low[i] * z_[i - 1]) / m_[i];
        }
        for (std::size_t i = n - 1; i-- > 0;) {
            rhs[i] -= c_[i] * rhs[i + 1];
            z_[i] -= c_[i] * z_[i + 1];
        }
        const double vx = rhs[0] + beta / gamma * rhs[n - 1];
        const double vz = 1.0 + z_[0] + beta / gamma * z_[n - 1];
        const double factor = vx / vz;
        for (std::size_t i = 0; i < n; ++i) rhs[i] -= factor * z_[i];
    }

private:
    std::vector<double> c_, z_, m_;
};

struct KrylovResult {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

/// Preconditioned BiCGStab for a general (non-symmetric) operator.
/// apply/precond map vectors to new vectors; solves A x = b in place of x.
inline KrylovResult bicgstab(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    const std::function<std::vector<double>(const std::vector<double>&)>& precond,
    const std::vector<double>& b, std::vector<double>& x, double tol, int max_iter) {
    const std::size_t n = b.size();
    const double bnorm = norm2(b);
    KrylovResult res;
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    auto ax = apply(x);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    std::vector<double> r_hat = r;
    std::vector<double> p(n, 0.0), v(n, 0.0);
    double rho = 1.0, alpha = 1.0, omega = 1.0;

    for (int it = 1; it <= max_iter; ++it) {
        double rho1 = dot(r_hat.data(), r.data(), n);
        if (rho1 == 0.0) break;
        if (it == 1) {
            p = r;
        } else {
            double beta = (rho1 / rho) * (alpha / omega);
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        auto p_hat = precond(p);
        v = apply(p_hat);
        alpha = rho1 / dot(r_hat.data(), v.data(), n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) / bnorm < tol) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p_hat[i];
            res.iterations = it;
            res.rel_residual = norm2(s) / bnorm;
            res.converged = true;
            return res;
        }
        auto s_hat = precond(s);
        auto t = apply(s_hat);
        omega = dot(t.data(), s.data(), n) / dot(t.data(), t.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho1;
        double rel = norm2(r) / bnorm;
        res.iterations = it;
        res.rel_residual = rel;
        if (rel < tol) {
            res.converged = true;
            return res;
        }
        if (omega == 0.0) break;
    }
    return res;
}

} // namespace homog
