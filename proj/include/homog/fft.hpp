#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "homog/common.hpp"

namespace homog::fft {

/// Multi-dimensional complex DFT on row-major data, in place.
/// Plans are cached per (dims, direction); FFTW planning is serialized
/// behind a mutex, execution via fftw_execute_dft is re-entrant.
class Transform {
public:
    static void forward(const std::vector<int>& dims, std::complex<double>* data) {
        run(dims, data, FFTW_FORWARD);
    }

    /// Unnormalized inverse; callers divide by the node count.
    static void backward(const std::vector<int>& dims, std::complex<double>* data) {
        run(dims, data, FFTW_BACKWARD);
    }

private:
    static void run(const std::vector<int>& dims, std::complex<double>* data, int sign) {
        fftw_plan plan = nullptr;
        {
            static std::mutex plan_mutex;
            static std::map<std::pair<std::vector<int>, int>, fftw_plan> cache;
            std::lock_guard<std::mutex> lock(plan_mutex);
            auto key = std::make_pair(dims, sign);
            auto it = cache.find(key);
            if (it == cache.end()) {
                std::size_t total = 1;
                for (int n : dims) total *= static_cast<std::size_t>(n);
                // Plan on a scratch buffer so FFTW_ESTIMATE never touches user data.
                std::vector<std::complex<double>> scratch(total);
                auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
                fftw_plan p = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(),
                                            buf, buf, sign, FFTW_ESTIMATE);
                if (!p) throw Error("fftw plan creation failed");
                it = cache.emplace(key, p).first;
            }
            plan = it->second;
        }
        auto* buf = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(plan, buf, buf);
    }
};

/// Signed integer frequency for index i on an axis of size n.
/// The Nyquist index (even n, i = n/2) maps to +n/2; odd-order derivative
/// symbols must zero it explicitly.
inline int freq(int i, int n) {
    return i <= n / 2 ? i : i - n;
}

inline bool is_nyquist(int i, int n) {
    return (n % 2 == 0) && i == n / 2;
}

} // namespace homog::fft
