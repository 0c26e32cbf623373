#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "homog/common.hpp"

namespace homog {

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least squares on (log scale, log error). Floor-contaminated points must
/// be excluded upstream; non-positive errors are rejected here.
inline FitResult fit_rate(const std::vector<double>& errors, const std::vector<double>& scales) {
    if (errors.size() != scales.size()) throw Error("fit_rate: size mismatch");
    if (errors.size() < 3) throw Error("fit_rate: insufficient points (need >= 3)");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i] <= 0.0) throw Error("fit_rate: non-positive error value");
        if (scales[i] <= 0.0) throw Error("fit_rate: non-positive scale value");
        xs.push_back(std::log(scales[i]));
        ys.push_back(std::log(errors[i]));
    }
    const std::size_t n = xs.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw Error("fit_rate: degenerate scales");
    FitResult f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

struct RateRow {
    double scale = 0.0;        // eps (thm*) or t (cor)
    double sup_error = 0.0;
    double weighted_error = 0.0;
    bool floor_flag = false;
    double refine_gap = 0.0;   // discretization-floor estimate for this point
};

/// Per-experiment report: raw per-point errors, the fitted slope with its
/// acceptance window, and auxiliary statistics. The CSV serialization is
/// byte-stable for a fixed configuration; wall-clock goes to JSON only.
struct RateReport {
    std::string experiment;
    std::string family;
    std::string scheme = "spectral";
    std::vector<RateRow> rows;
    bool fit_done = false;
    FitResult fit;
    std::string fit_note;
    double window_lo = 0.0, window_hi = 0.0;
    double r2_min = 0.0;
    bool log_divided = false;
    bool pass = false;
    std::string details;
    std::map<std::string, double> stats;
    double runtime_seconds = 0.0;
};

} // namespace homog
