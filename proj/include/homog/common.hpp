#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace homog {

inline constexpr std::string_view version = "0.1.0";

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

/// All contract violations and solver failures surface as Error.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Fractional part mapped to [0,1); exact under unit shifts of the argument.
inline double frac(double x) {
    double f = x - std::floor(x);
    return f < 1.0 ? f : 0.0;
}

inline double sqr(double x) { return x * x; }

/// Accumulates in extended precision; sums here feed means and norms where
/// round-off must stay below the mean-zero tolerances.
inline double sum(const double* p, std::size_t n) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < n; ++i) acc += p[i];
    return static_cast<double>(acc);
}

inline double dot(const double* a, const double* b, std::size_t n) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(acc);
}

inline double norm2(const double* p, std::size_t n) {
    return std::sqrt(dot(p, p, n));
}

inline double max_abs(const double* p, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(p[i]));
    return m;
}

inline double max_abs(const std::vector<double>& v) { return max_abs(v.data(), v.size()); }
inline double norm2(const std::vector<double>& v) { return norm2(v.data(), v.size()); }

inline bool all_finite(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

} // namespace homog
