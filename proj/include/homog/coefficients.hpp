#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "homog/common.hpp"

namespace homog {

/// d x d matrix value of the coefficient at one point (scalar case m = 1;
/// the equation index pair collapses, only the derivative indices remain).
struct CoeffMatrix {
    int d = 1;
    std::array<double, 4> a{1.0, 0.0, 0.0, 1.0};

    double operator()(int i, int j) const { return a[i * d + j]; }
    double& entry(int i, int j) { return a[i * d + j]; }

    static CoeffMatrix identity(int d, double scale = 1.0) {
        CoeffMatrix m;
        m.d = d;
        m.a = {scale, 0.0, 0.0, scale};
        if (d == 2) m.a = {scale, 0.0, 0.0, scale};
        return m;
    }
};

/// 1-periodic coefficient matrix A(y,s) given by a closed-form rule.
/// Coefficients are rules, not grids: the kernel solvers need values at
/// arbitrary rescaled points (x/eps, t/eps^2) and resampling would alias.
class CoefficientField {
public:
    using Rule = std::function<CoeffMatrix(double y1, double y2, double s)>;

    CoefficientField() = default;
    CoefficientField(int d, std::string family, std::map<std::string, double> params,
                     double declared_mu, bool time_dependent, Rule rule)
        : d_(d),
          family_(std::move(family)),
          params_(std::move(params)),
          declared_mu_(declared_mu),
          time_dependent_(time_dependent),
          rule_(std::move(rule)) {}

    int d() const { return d_; }
    int m() const { return 1; }
    const std::string& family() const { return family_; }
    const std::map<std::string, double>& params() const { return params_; }
    double declared_mu() const { return declared_mu_; }
    bool time_dependent() const { return time_dependent_; }

    /// Arguments are reduced mod 1 internally; exact under unit shifts.
    CoeffMatrix evaluate(double y1, double s) const {
        return rule_(frac(y1), 0.0, frac(s));
    }
    CoeffMatrix evaluate(double y1, double y2, double s) const {
        return rule_(frac(y1), frac(y2), frac(s));
    }

    /// Scalar convenience for d=1.
    double scalar(double y, double s) const { return evaluate(y, s)(0, 0); }

private:
    int d_ = 1;
    std::string family_;
    std::map<std::string, double> params_;
    double declared_mu_ = 1.0;
    bool time_dependent_ = false;
    Rule rule_;
};

inline double builtin_param(const std::map<std::string, double>& params, const std::string& key,
                            double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

/// Built-in test families used by the acceptance experiments.
///   constant               a(y,s) = value (d=1) or value*I (d=2)
///   separable_space        a(y)   = 1 + b sin(2 pi y),            d=1
///   space_time             a(y,s) = 1 + b sin(2 pi y) cos(2 pi s), d=1
///   checkerboard_smooth_2d a(y)   = (1 + b sin(2 pi y1) sin(2 pi y2)) I, d=2
///   nonsym_constant_2d     A      = [[1, c], [-c, 1]],             d=2
inline CoefficientField make_builtin(const std::string& family,
                                     const std::map<std::string, double>& params = {}) {
    if (family == "constant") {
        double value = builtin_param(params, "a", 1.0);
        int d = static_cast<int>(builtin_param(params, "d", 1.0));
        if (value <= 0.0) throw Error("make_builtin: ellipticity violated (a <= 0)");
        if (d != 1 && d != 2) throw Error("unsupported dimension");
        double mu = std::min(value, 1.0 / value);
        return CoefficientField(d, family, {{"a", value}, {"d", double(d)}}, mu, false,
                                [value, d](double, double, double) {
                                    return CoeffMatrix::identity(d, value);
                                });
    }
    if (family == "separable_space" || family == "space_time") {
        double b = builtin_param(params, "b", 0.5);
        if (std::abs(b) >= 1.0) throw Error("make_builtin: ellipticity violated (|b| >= 1)");
        double mu = 1.0 - std::abs(b);
        bool time_dep = family == "space_time";
        return CoefficientField(1, family, {{"b", b}}, mu, time_dep,
                                [b, time_dep](double y1, double, double s) {
                                    double osc = std::sin(two_pi * y1);
                                    if (time_dep) osc *= std::cos(two_pi * s);
                                    CoeffMatrix m = CoeffMatrix::identity(1, 1.0 + b * osc);
                                    return m;
                                });
    }
    if (family == "checkerboard_smooth_2d") {
        double b = builtin_param(params, "b", 0.5);
        if (std::abs(b) >= 1.0) throw Error("make_builtin: ellipticity violated (|b| >= 1)");
        return CoefficientField(2, family, {{"b", b}}, 1.0 - std::abs(b), false,
                                [b](double y1, double y2, double) {
                                    double v = 1.0 + b * std::sin(two_pi * y1) * std::sin(two_pi * y2);
                                    return CoeffMatrix::identity(2, v);
                                });
    }
    if (family == "nonsym_constant_2d") {
        double c = builtin_param(params, "c", 0.25);
        // antisymmetric part does not affect the quadratic form; mu limited by the sup norm
        double mu = 1.0 / std::sqrt(1.0 + c * c);
        return CoefficientField(2, family, {{"c", c}}, std::min(mu, 1.0), false,
                                [c](double, double, double) {
                                    CoeffMatrix m = CoeffMatrix::identity(2, 1.0);
                                    m.entry(0, 1) = c;
                                    m.entry(1, 0) = -c;
                                    return m;
                                });
    }
    throw Error("make_builtin: unknown family '" + family + "'");
}

/// Closed-form field with entries a~_ij(y,s) = a_ji(y,-s); applying twice
/// reproduces the original values.
inline CoefficientField adjoint_coefficient(const CoefficientField& A) {
    CoefficientField copy = A;
    return CoefficientField(
        A.d(), A.family() + "~", A.params(), A.declared_mu(), A.time_dependent(),
        [copy](double y1, double y2, double s) {
            CoeffMatrix m = copy.evaluate(y1, y2, -s);
            CoeffMatrix t = m;
            for (int i = 0; i < m.d; ++i)
                for (int j = 0; j < m.d; ++j) t.entry(i, j) = m(j, i);
            return t;
        });
}

/// Sampled regularity estimates: ellipticity lower bound, sup norm, the
/// spatial VMO modulus A#(r) of the parabolic triple mean, and a Holder
/// seminorm estimate for a given exponent. All sampling is deterministic
/// tensor-grid sampling; the values are lower bounds of the true sups and
/// are reported as estimates, never as certified moduli.
struct RegularityReport {
    double mu_estimate = 0.0;
    double sup_norm = 0.0;
    std::vector<double> radii;
    std::vector<double> vmo_values;
    double holder_lambda = 0.5;
    double holder_seminorm_estimate = 0.0;
};

namespace detail {

inline double matrix_max_abs(const CoeffMatrix& m) {
    double v = 0.0;
    for (int i = 0; i < m.d; ++i)
        for (int j = 0; j < m.d; ++j) v = std::max(v, std::abs(m(i, j)));
    return v;
}

inline double matrix_diff_max(const CoeffMatrix& a, const CoeffMatrix& b) {
    double v = 0.0;
    for (int i = 0; i < a.d; ++i)
        for (int j = 0; j < a.d; ++j) v = std::max(v, std::abs(a(i, j) - b(i, j)));
    return v;
}

inline double rayleigh_min(const CoeffMatrix& m, int n_dirs) {
    if (m.d == 1) return m(0, 0);
    double worst = std::numeric_limits<double>::max();
    for (int k = 0; k < n_dirs; ++k) {
        double ang = pi * k / n_dirs;
        double xi[2] = {std::cos(ang), std::sin(ang)};
        double q = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) q += m(i, j) * xi[i] * xi[j];
        worst = std::min(worst, q);
    }
    return worst;
}

} // namespace detail

inline RegularityReport regularity_report(const CoefficientField& A,
                                          std::vector<double> radii = {0.05, 0.1, 0.25, 0.5},
                                          double lambda = 0.5, int sample_density = 8) {
    for (double r : radii)
        if (r <= 0.0 || r > 1.0) throw Error("regularity_report: radii must lie in (0,1]");
    if (lambda <= 0.0 || lambda >= 1.0) throw Error("regularity_report: lambda must lie in (0,1)");

    RegularityReport rep;
    rep.radii = radii;
    rep.holder_lambda = lambda;

    const int nc = sample_density;     // centers per axis
    const int nq = sample_density;     // quadrature points per axis
    const int d = A.d();

    auto eval = [&](double y1, double y2, double s) {
        return d == 1 ? A.evaluate(y1, s) : A.evaluate(y1, y2, s);
    };

    // ellipticity / sup norm over a dense deterministic lattice
    const int ns = 4 * sample_density;
    double mu_min = std::numeric_limits<double>::max();
    double sup = 0.0;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < (d == 2 ? ns : 1); ++j)
            for (int k = 0; k < ns; ++k) {
                CoeffMatrix m = eval(i / double(ns), j / double(ns), k / double(ns));
                mu_min = std::min(mu_min, detail::rayleigh_min(m, 16));
                sup = std::max(sup, detail::matrix_max_abs(m));
            }
    rep.mu_estimate = mu_min;
    rep.sup_norm = sup;

    // A#(r): sup over rho < r and centers of the triple parabolic mean of
    // |A(y,s) - A(z,s)|. The sup over rho is realized by nesting: computed
    // values are accumulated so the report is non-decreasing in r.
    double running = 0.0;
    std::size_t ri = 0;
    std::vector<std::pair<double, double>> radius_to_value;
    std::vector<double> sorted = radii;
    std::sort(sorted.begin(), sorted.end());
    for (double r : sorted) {
        for (double rho : {0.25 * r, 0.5 * r, 0.75 * r, r}) {
            for (int ci = 0; ci < nc; ++ci)
                for (int cj = 0; cj < (d == 2 ? nc : 1); ++cj)
                    for (int ck = 0; ck < nc; ++ck) {
                        double cx1 = ci / double(nc), cx2 = cj / double(nc), ct = ck / double(nc);
                        // tensor midpoint rule over s in (t-rho^2,t), y,z in B(cx,rho)
                        double acc = 0.0;
                        int cnt = 0;
                        for (int si = 0; si < nq; ++si) {
                            double s = ct - rho * rho * (si + 0.5) / nq;
                            for (int yi = 0; yi < nq; ++yi)
                                for (int zi = 0; zi < nq; ++zi) {
                                    double y = cx1 - rho + 2 * rho * (yi + 0.5) / nq;
                                    double z = cx1 - rho + 2 * rho * (zi + 0.5) / nq;
                                    acc += detail::matrix_diff_max(eval(y, cx2, s), eval(z, cx2, s));
                                    ++cnt;
                                }
                        }
                        running = std::max(running, acc / cnt);
                    }
        }
        radius_to_value.emplace_back(r, running);
        (void)ri;
    }
    rep.vmo_values.resize(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        for (auto& [r, v] : radius_to_value)
            if (r == radii[i]) rep.vmo_values[i] = v;
    }

    // Holder seminorm: max over deterministic point pairs of
    // |A(p)-A(q)| / (|x_p-x_q| + |t_p-t_q|^{1/2})^lambda
    const int np = 12;
    double tau = 0.0;
    std::vector<std::array<double, 3>> pts;
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < (d == 2 ? np : 1); ++j)
            for (int k = 0; k < np; ++k)
                pts.push_back({i / double(np), j / double(np), k / double(np)});
    for (std::size_t p = 0; p < pts.size(); ++p)
        for (std::size_t q = p + 1; q < pts.size(); ++q) {
            double dx = std::abs(pts[p][0] - pts[q][0]);
            double dy = d == 2 ? std::abs(pts[p][1] - pts[q][1]) : 0.0;
            double dt = std::abs(pts[p][2] - pts[q][2]);
            double dist = std::hypot(dx, dy) + std::sqrt(dt);
            if (dist == 0.0) continue;
            double diff = detail::matrix_diff_max(eval(pts[p][0], pts[p][1], pts[p][2]),
                                                  eval(pts[q][0], pts[q][1], pts[q][2]));
            tau = std::max(tau, diff / std::pow(dist, lambda));
        }
    rep.holder_seminorm_estimate = tau;
    return rep;
}

} // namespace homog
