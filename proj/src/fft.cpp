#include "etsf/fft.hpp"

#include "etsf/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>

namespace etsf::fft {

namespace {

// FFTW's planner is not thread-safe while fftw_execute_* on distinct buffers
// is, so plans are created once per length under a lock and then shared.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [n, p] : forward_) fftw_destroy_plan(p);
        for (auto& [n, p] : backward_) fftw_destroy_plan(p);
    }

    fftw_plan forward(std::size_t n) { return get(forward_, n, true); }
    fftw_plan backward(std::size_t n) { return get(backward_, n, false); }

private:
    fftw_plan get(std::map<std::size_t, fftw_plan>& cache, std::size_t n, bool fwd) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (auto it = cache.find(n); it != cache.end()) return it->second;
        std::vector<double> real(n);
        std::vector<Complex> cplx(n / 2 + 1);
        auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
        const auto len = static_cast<int>(n);
        fftw_plan p = fwd ? fftw_plan_dft_r2c_1d(len, real.data(), c, FFTW_ESTIMATE | FFTW_UNALIGNED)
                          : fftw_plan_dft_c2r_1d(len, c, real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (p == nullptr) throw Error("fftw: failed to plan transform of length " + std::to_string(n));
        cache.emplace(n, p);
        return p;
    }

    std::mutex mutex_;
    std::map<std::size_t, fftw_plan> forward_;
    std::map<std::size_t, fftw_plan> backward_;
};

PlanCache& plans() {
    static PlanCache cache;
    return cache;
}

}  // namespace

std::size_t next_fast_len(std::size_t n) {
    if (n <= 1) return 1;
    std::size_t best = 1;
    while (best < n) best <<= 1;
    for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
        for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
            std::size_t v = p35;
            while (v < n) v <<= 1;
            best = std::min(best, v);
        }
    }
    return best;
}

std::vector<Complex> rfft(std::span<const double> x, std::size_t n) {
    if (n == 0) throw DimensionError("rfft: zero transform length");
    std::vector<double> in(n, 0.0);
    std::copy_n(x.begin(), std::min(n, x.size()), in.begin());
    std::vector<Complex> out(n / 2 + 1);
    fftw_execute_dft_r2c(plans().forward(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
    if (spectrum.size() != n / 2 + 1) {
        throw DimensionError("irfft: " + std::to_string(spectrum.size()) + " bins for length " + std::to_string(n));
    }
    // c2r overwrites its input.
    std::vector<Complex> in(spectrum.begin(), spectrum.end());
    std::vector<double> out(n);
    fftw_execute_dft_c2r(plans().backward(n), reinterpret_cast<fftw_complex*>(in.data()), out.data());
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv;
    return out;
}

}  // namespace etsf::fft
