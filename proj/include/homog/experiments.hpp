#pragma once

#include <chrono>
#include <functional>
#include <mutex>
#include <thread>

#include "homog/dual.hpp"
#include "homog/evaluator.hpp"
#include "homog/expansion.hpp"
#include "homog/kernels.hpp"
#include "homog/oracle.hpp"
#include "homog/report.hpp"

namespace homog {

/// Configuration of one convergence experiment. Every experiment is a pure
/// function of its config; reruns produce identical reports.
struct ExperimentConfig {
    std::string id = "thm1";  // thm1 | thm2 | thm2-adj | thm3 | cor | tail
    CoefficientField A = make_builtin("space_time", {{"b", 0.5}});
    std::vector<double> ladder;  // eps ladder (thm*, tail) or t ladder (cor)
    double t_eval = 1.0;
    Scheme scheme = Scheme::spectral;
    int cell_n = 128;
    int cell_nt = 128;
    double cell_tol = 1e-10;
    int points_per_period = 16;
    int max_extra_refinements = 4;  // kernel-solve halvings beyond points_per_period
    double floor_fraction = 0.07;   // refine until gap <= fraction * current error
    int threads = 1;
    bool with_oracle_bound = true;  // thm1: certified discretization bound at the smallest eps

    std::vector<double> effective_ladder() const {
        if (!ladder.empty()) return ladder;
        if (id == "cor") return {1.0, 4.0, 16.0};
        if (id == "tail") return {0.25, 0.125};
        if (id == "thm3") return {0.25, 0.125, 0.0625};
        return {0.25, 0.125, 0.0625, 0.03125};
    }
};

namespace detail_exp {

inline std::vector<double> make_lattice(double lo, double hi, double step) {
    std::vector<double> xs;
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
    for (std::size_t i = 0; i <= n; ++i) xs.push_back(lo + static_cast<double>(i) * step);
    return xs;
}

/// Solve at points_per_period, then keep halving until the sup-norm change
/// of the reported values is below floor_fraction times the measured error
/// of interest (computed by `error_of`). Returns the final sample with
/// refine_gap fields describing the discretization floor.
template <typename SolveFn, typename ErrorFn>
KernelSample refine_to_floor(SolveFn&& solve, ErrorFn&& error_of, int pp0, int max_levels,
                             double fraction) {
    KernelSample prev = solve(pp0);
    for (int level = 1; level <= max_levels; ++level) {
        KernelSample cur = solve(pp0 << level);
        double gap = 0.0;
        for (std::size_t i = 0; i < cur.values.size(); ++i)
            gap = std::max(gap, std::abs(cur.values[i] - prev.values[i]));
        double ggap = 0.0;
        for (std::size_t i = 0; i < cur.grad_x.size(); ++i)
            ggap = std::max(ggap, std::abs(cur.grad_x[i] - prev.grad_x[i]));
        cur.refine_gap_values = gap;
        cur.refine_gap_grad = ggap;
        cur.refinements = level;
        prev = std::move(cur);
        const double err = error_of(prev);
        const double relevant = prev.grad_x.empty() ? gap : std::max(gap, ggap);
        if (relevant <= fraction * err || err == 0.0) break;
    }
    return prev;
}

inline void run_ladder(int threads, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex m;
    for (int t = 0; t < std::min<int>(threads, static_cast<int>(count)); ++t)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(m);
                    if (next >= count) return;
                    i = next++;
                }
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

struct FitWindow {
    double lo, hi, r2_min;
};

inline FitWindow window_for(const std::string& id) {
    if (id == "thm1") return {0.85, 1.30, 0.97};
    if (id == "thm2" || id == "thm2-adj") return {0.80, 1.30, 0.0};
    if (id == "thm3") return {0.75, 1.35, 0.0};
    return {0.0, 0.0, 0.0};
}

/// Applies the slope fit to the non-floored rows and fills the verdict.
inline void finish_rate_report(RateReport& rep, const std::string& id) {
    auto win = window_for(id);
    rep.window_lo = win.lo;
    rep.window_hi = win.hi;
    rep.r2_min = win.r2_min;
    std::vector<double> errs, scales;
    for (const auto& row : rep.rows)
        if (!row.floor_flag) {
            errs.push_back(rep.log_divided ? row.weighted_error : row.sup_error);
            scales.push_back(row.scale);
        }
    if (errs.size() < 3) {
        rep.fit_done = false;
        rep.fit_note = "degenerate: errors at floor";
        // all points at the numerical floor is the expected outcome for
        // constant coefficients; not a failure
        rep.pass = errs.empty();
        rep.details = rep.fit_note;
        return;
    }
    rep.fit = fit_rate(errs, scales);
    rep.fit_done = true;
    bool slope_ok = rep.fit.slope >= win.lo && rep.fit.slope <= win.hi;
    bool r2_ok = rep.fit.r2 >= win.r2_min;
    rep.pass = slope_ok && r2_ok;
    rep.details = "slope " + std::to_string(rep.fit.slope) + " in [" + std::to_string(win.lo) +
                  ", " + std::to_string(win.hi) + "]: " + (slope_ok ? "yes" : "NO") +
                  "; r2 " + std::to_string(rep.fit.r2) + " >= " + std::to_string(win.r2_min) +
                  ": " + (r2_ok ? "yes" : "NO");
}

} // namespace detail_exp

/// Gaussian-weighted sup error: sup |e(x)| * exp(kw |x|^2 / tau) with the
/// conservative weight kw = 1/(8 a^). Reported alongside the plain sup.
inline double gaussian_weighted_sup(const std::vector<double>& lattice,
                                    const std::vector<double>& err, double tau, double a_hat) {
    const double kw = 1.0 / (8.0 * a_hat);
    double sup = 0.0;
    for (std::size_t i = 0; i < lattice.size(); ++i)
        sup = std::max(sup, err[i] * std::exp(kw * lattice[i] * lattice[i] / tau));
    return sup;
}

inline RateReport run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    RateReport rep;
    rep.experiment = cfg.id;
    rep.family = cfg.A.family();
    rep.scheme = cfg.scheme == Scheme::spectral ? "spectral" : "fd";
    const auto ladder = cfg.effective_ladder();
    if (ladder.empty()) throw Error("run_experiment: empty ladder");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (!(ladder[i] < ladder[i - 1]) && cfg.id != "cor")
            throw Error("run_experiment: ladder must be strictly decreasing");

    const auto grid = build_grid(1, cfg.cell_n, cfg.cell_nt);
    CellSolveOptions copts;
    copts.tol = cfg.cell_tol;

    if (cfg.id == "thm1" || cfg.id == "thm2" || cfg.id == "thm2-adj" || cfg.id == "thm3") {
        auto set = solve_corrector(cfg.A, grid, cfg.scheme, copts);
        const double a_hat = set.a_hat.scalar();
        HeatKernel g0(a_hat);
        PeriodicInterpolant grad_chi(set.grad_chi, EvalBackend::spectral);

        // adjoint correctors for the pole-side factor (thm2-adj, thm3)
        std::unique_ptr<CorrectorSet> adj_set;
        std::unique_ptr<PeriodicInterpolant> grad_chi_adj;
        if (cfg.id == "thm2-adj" || cfg.id == "thm3") {
            adj_set = std::make_unique<CorrectorSet>(
                solve_corrector(adjoint_coefficient(cfg.A), grid, cfg.scheme, copts));
            grad_chi_adj =
                std::make_unique<PeriodicInterpolant>(adj_set->grad_chi, EvalBackend::spectral);
        }

        const double t = cfg.t_eval;
        rep.rows.assign(ladder.size(), {});
        std::vector<int> final_pp(ladder.size(), cfg.points_per_period);
        std::vector<double> gaussian_weighted(ladder.size(), 0.0);
        rep.log_divided = cfg.id != "thm1";

        detail_exp::run_ladder(cfg.threads, ladder.size(), [&](std::size_t li) {
            const double eps = ladder[li];
            const double log_div = std::log(2.0 + std::sqrt(t) / eps);
            // The lattice step must subsample the eps-oscillation: a step that
            // is a multiple of eps aliases the corrector factor and the sup
            // misses the leading-order error.
            const auto lattice = detail_exp::make_lattice(-3.0, 3.0, std::min(1.0 / 32, eps / 8));

            auto solve = [&](int pp) {
                KernelOptions o;
                o.points_per_period = pp;
                o.max_refinements = 0;
                o.want_gradient = cfg.id != "thm1";
                if (cfg.id == "thm2-adj")
                    return adjoint_column(cfg.A, eps, 0.0, t, {0.0}, lattice, o);
                if (cfg.id == "thm3")
                    return gamma_eps_dy_column(cfg.A, eps, 0.0, 0.0, {t}, lattice, o);
                return gamma_eps_column(cfg.A, eps, 0.0, 0.0, {t}, lattice, o);
            };

            // Gradient experiments: the measured expansion error at small eps
            // is comparable to the per-level discretization gap, so driving
            // plain refinement to a 7% floor is prohibitively deep. The gaps
            // decay at the clean second-order factor 4, so two successive
            // Richardson extrapolations give the production field and the
            // spread between them bounds its error.
            auto solve_extrapolated = [&]() {
                KernelSample s1 = solve(cfg.points_per_period);
                KernelSample s2 = solve(cfg.points_per_period * 2);
                KernelSample s4 = solve(cfg.points_per_period * 4);
                auto extrap = [](const KernelSample& coarse, const KernelSample& fine) {
                    KernelSample out = fine;
                    for (std::size_t i = 0; i < out.values.size(); ++i)
                        out.values[i] = (4.0 * fine.values[i] - coarse.values[i]) / 3.0;
                    for (std::size_t i = 0; i < out.grad_x.size(); ++i)
                        out.grad_x[i] = (4.0 * fine.grad_x[i] - coarse.grad_x[i]) / 3.0;
                    return out;
                };
                KernelSample ea = extrap(s1, s2);
                KernelSample eb = extrap(s2, s4);
                double floor = 0.0;
                for (std::size_t i = 0; i < eb.values.size(); ++i)
                    floor = std::max(floor, std::abs(eb.values[i] - ea.values[i]));
                for (std::size_t i = 0; i < eb.grad_x.size(); ++i)
                    floor = std::max(floor, std::abs(eb.grad_x[i] - ea.grad_x[i]));
                eb.refine_gap_values = floor;
                eb.refine_gap_grad = floor;
                eb.refinements = 2;
                return eb;
            };

            auto error_field = [&](const KernelSample& s) {
                std::vector<double> err(lattice.size());
                for (std::size_t j = 0; j < lattice.size(); ++j) {
                    const double x = lattice[j];
                    if (cfg.id == "thm1") {
                        err[j] = std::abs(s.value(0, j) - g0.value(x, t, 0.0, 0.0));
                    } else if (cfg.id == "thm2") {
                        double factor = 1.0 + grad_chi(x / eps, t / (eps * eps))[0];
                        err[j] = std::abs(s.grad(0, j) - factor * g0.dx(x, t, 0.0, 0.0));
                    } else if (cfg.id == "thm2-adj") {
                        double factor = 1.0 + (*grad_chi_adj)(x / eps, 0.0)[0];  // -s/eps^2 = 0
                        err[j] = std::abs(s.grad(0, j) - factor * g0.dy(0.0, t, x, 0.0));
                    } else {  // thm3: d_x of the d_y column vs the product form
                        double fx = 1.0 + grad_chi(x / eps, t / (eps * eps))[0];
                        double fy = 1.0 + (*grad_chi_adj)(0.0, 0.0)[0];  // pole (y0,s0) = (0,0)
                        err[j] = std::abs(s.grad(0, j) - fx * g0.dxy(x, t, 0.0, 0.0) * fy);
                    }
                }
                return err;
            };

            KernelSample sample =
                cfg.id == "thm1"
                    ? detail_exp::refine_to_floor(
                          solve,
                          [&](const KernelSample& s) { return max_abs(error_field(s)); },
                          cfg.points_per_period, cfg.max_extra_refinements, cfg.floor_fraction)
                    : solve_extrapolated();

            auto err = error_field(sample);
            final_pp[li] = static_cast<int>(std::llround(eps / sample.h));
            RateRow row;
            row.scale = eps;
            row.sup_error = max_abs(err);
            row.refine_gap =
                sample.grad_x.empty()
                    ? sample.refine_gap_values
                    : std::max(sample.refine_gap_values, sample.refine_gap_grad);
            row.floor_flag = row.sup_error < 10.0 * row.refine_gap;
            if (cfg.id == "thm1") {
                row.weighted_error = gaussian_weighted_sup(lattice, err, t, a_hat);
            } else {
                // the log factor is divided out before fitting, not fitted
                row.weighted_error = row.sup_error / log_div;
            }
            rep.rows[li] = row;
            gaussian_weighted[li] = gaussian_weighted_sup(lattice, err, t, a_hat);
        });
        if (cfg.id != "thm1")
            for (std::size_t li = 0; li < ladder.size(); ++li)
                rep.stats["gaussian_weighted_eps" + std::to_string(li)] = gaussian_weighted[li];

        detail_exp::finish_rate_report(rep, cfg.id);

        if (cfg.id == "thm1" && cfg.with_oracle_bound && !rep.rows.empty() &&
            !rep.rows.back().floor_flag) {
            // Discretization bound at the smallest eps: the refinement loop
            // already compared the production run against the over-resolved
            // run at 4x its space-time resolution (h and k both halved);
            // Richardson for the second-order scheme certifies
            // err <= (4/3) * gap.
            const double bound = (4.0 / 3.0) * rep.rows.back().refine_gap;
            rep.stats["oracle_disc_bound"] = bound;
            rep.stats["oracle_bound_fraction"] = bound / rep.rows.back().sup_error;
            rep.stats["final_points_per_period"] = final_pp.back();
            if (bound > 0.10 * rep.rows.back().sup_error) {
                rep.pass = false;
                rep.details += "; discretization bound exceeds 10% of the smallest-eps error";
            }
        }
        rep.stats["a_hat"] = a_hat;
    } else if (cfg.id == "cor") {
        auto set = solve_corrector(cfg.A, grid, cfg.scheme, copts);
        const double a_hat = set.a_hat.scalar();
        PeriodicInterpolant grad_chi(set.grad_chi, EvalBackend::spectral);

        // Bounded step-like data: the t^{-1/2} statistic saturates only for
        // profiles whose transition survives the diffusion scale (integrable
        // data decays faster and the statistic would drift downward). The
        // erf profile also evolves in closed form under the homogenized flow.
        const double sigma0 = 0.25;
        auto f = [sigma0](double x) { return std::erf(x / (2.0 * sigma0)); };
        const auto lattice = detail_exp::make_lattice(-6.0, 6.0, 1.0 / 16);

        KernelOptions o;
        // gradient statistics at late times need the accumulated CN phase
        // error well under the ~2e-4 remainder scale
        o.points_per_period = std::max(cfg.points_per_period, 256);
        o.max_refinements = 0;
        o.want_gradient = true;
        // the periodic wrap joins f(L) to f(-L); keep that second front far
        // from the observation window
        o.domain_L = 30.0;
        auto u1 = evolve_cauchy(cfg.A, 1.0, f, 6.0, ladder, lattice, o);

        auto u0_at = [&](double x, double tt, bool grad) {
            const double s2 = sigma0 * sigma0 + a_hat * tt;
            if (grad) return std::exp(-x * x / (4.0 * s2)) / std::sqrt(pi * s2);
            return std::erf(x / (2.0 * std::sqrt(s2)));
        };

        rep.rows.assign(ladder.size(), {});
        for (std::size_t q = 0; q < ladder.size(); ++q) {
            const double tt = ladder[q];
            double sup_u = 0.0, sup_g = 0.0;
            for (std::size_t j = 0; j < lattice.size(); ++j) {
                const double x = lattice[j];
                double u0v = u0_at(x, tt, false);
                double du0 = u0_at(x, tt, true);
                sup_u = std::max(sup_u, std::abs(u1.value(q, j) - u0v));
                double corr = grad_chi(x, tt)[0];  // eps = 1
                sup_g = std::max(sup_g, std::abs(u1.grad(q, j) - du0 - corr * du0));
            }
            RateRow row;
            row.scale = tt;
            row.sup_error = sup_u;
            row.weighted_error = sup_u * std::sqrt(tt);  // the equistabilization statistic
            rep.rows[q] = row;
            rep.stats["stat_u_t" + std::to_string(static_cast<int>(tt))] = row.weighted_error;
            rep.stats["stat_grad_t" + std::to_string(static_cast<int>(tt))] =
                sup_g * tt / std::log(2.0 + tt);
            rep.stats["stat_grad_nolog_t" + std::to_string(static_cast<int>(tt))] = sup_g * tt;
        }
        double u_min = 1e300, u_max = 0.0, g_min = 1e300, g_max = 0.0;
        double n_min = 1e300, n_max = 0.0;
        for (std::size_t q = 0; q < ladder.size(); ++q) {
            double su = rep.rows[q].weighted_error;
            double sg = rep.stats["stat_grad_t" + std::to_string(static_cast<int>(ladder[q]))];
            double sn = rep.stats["stat_grad_nolog_t" + std::to_string(static_cast<int>(ladder[q]))];
            u_min = std::min(u_min, su);
            u_max = std::max(u_max, su);
            g_min = std::min(g_min, sg);
            g_max = std::max(g_max, sg);
            n_min = std::min(n_min, sn);
            n_max = std::max(n_max, sn);
        }
        rep.stats["spread_u"] = u_max / u_min - 1.0;
        rep.stats["spread_grad"] = g_max / g_min - 1.0;
        // diagnostic: the same statistic without the log division; flatness
        // here means the measured remainder tracks t^{-1} exactly
        rep.stats["spread_grad_nolog"] = n_max / n_min - 1.0;
        const bool ok_u = rep.stats["spread_u"] <= 0.20;
        const bool ok_g = rep.stats["spread_grad"] <= 0.35;
        rep.pass = ok_u && ok_g;
        rep.details = "sup|u1-u0| sqrt(t) spread " + std::to_string(rep.stats["spread_u"]) +
                      " (<= 0.20: " + (ok_u ? "yes" : "NO") + "); gradient statistic spread " +
                      std::to_string(rep.stats["spread_grad"]) + " (<= 0.35: " +
                      (ok_g ? "yes" : "NO") + ")";
    } else if (cfg.id == "tail") {
        const double t = cfg.t_eval;
        const auto lattice = detail_exp::make_lattice(-5.0, 5.0, 1.0 / 16);
        rep.rows.assign(ladder.size(), {});
        bool all_ok = true;
        for (std::size_t li = 0; li < ladder.size(); ++li) {
            const double eps = ladder[li];
            KernelOptions o;
            o.points_per_period = cfg.points_per_period;
            o.refine_tol = 1e-5;
            o.max_refinements = cfg.max_extra_refinements;
            auto sample = gamma_eps_column(cfg.A, eps, 0.0, 0.0, {t}, lattice, o);
            std::vector<double> xs, ys;
            for (std::size_t j = 0; j < lattice.size(); ++j) {
                double v = sample.value(0, j);
                if (v >= 1e-8) {
                    xs.push_back(lattice[j] * lattice[j] / t);
                    ys.push_back(std::log(v));
                }
            }
            if (xs.size() < 10) throw Error("tail: too few points above the floor");
            // linear fit of log Gamma against |x|^2/(t-s)
            FitResult fit;
            {
                double mx = 0, my = 0;
                for (std::size_t i = 0; i < xs.size(); ++i) {
                    mx += xs[i];
                    my += ys[i];
                }
                mx /= xs.size();
                my /= ys.size();
                double sxx = 0, sxy = 0, syy = 0;
                for (std::size_t i = 0; i < xs.size(); ++i) {
                    sxx += (xs[i] - mx) * (xs[i] - mx);
                    sxy += (xs[i] - mx) * (ys[i] - my);
                    syy += (ys[i] - my) * (ys[i] - my);
                }
                fit.slope = sxy / sxx;
                fit.r2 = (sxy * sxy) / (sxx * syy);
            }
            RateRow row;
            row.scale = eps;
            row.sup_error = fit.slope;     // fitted decay rate (negative)
            row.weighted_error = fit.r2;   // fit quality
            rep.rows[li] = row;
            rep.stats["kappa_fit_eps" + std::to_string(li)] = -fit.slope;
            all_ok = all_ok && fit.slope < 0.0 && fit.r2 >= 0.99;
        }
        rep.pass = all_ok;
        rep.details = all_ok ? "log-linear Gaussian tails with R2 >= 0.99"
                             : "tail fit failed the R2 >= 0.99 / negative-slope check";
    } else {
        throw Error("run_experiment: unknown experiment id '" + cfg.id + "'");
    }

    rep.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

} // namespace homog
