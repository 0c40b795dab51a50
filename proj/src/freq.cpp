#include "etsf/freq.hpp"

#include "etsf/error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>

namespace etsf::freq {

namespace {

void require_k(std::size_t K, std::size_t L) {
    const std::size_t available = L / 2;  // F - 1 non-DC bins
    if (K > available) {
        throw ConfigError("frequency attention: K = " + std::to_string(K) + " exceeds the " +
                          std::to_string(available) + " non-DC bins of a length-" + std::to_string(L) + " window");
    }
}

double bin_weight(std::size_t k, std::size_t L) { return (L % 2 == 0 && k == L / 2) ? 1.0 : 2.0; }

// k j reduced modulo L, so every evaluation is exactly periodic in j.
std::size_t phase_index(std::size_t k, long long j, std::size_t L) {
    const auto len = static_cast<long long>(L);
    long long r = (static_cast<long long>(k) * (j % len)) % len;
    if (r < 0) r += len;
    return static_cast<std::size_t>(r);
}

double angle(std::size_t k, long long j, std::size_t L) {
    return 2.0 * std::numbers::pi * static_cast<double>(phase_index(k, j, L)) / static_cast<double>(L);
}

// cos / sin of 2 pi r / L for r = 0 .. L-1.
struct UnitRoots {
    std::vector<double> cos;
    std::vector<double> sin;

    explicit UnitRoots(std::size_t L) : cos(L), sin(L) {
        for (std::size_t r = 0; r < L; ++r) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(L);
            cos[r] = std::cos(th);
            sin[r] = std::sin(th);
        }
    }
};

std::vector<std::vector<std::size_t>> selected_bins(const std::vector<std::vector<Complex>>& spectra, std::size_t K) {
    std::vector<std::vector<std::size_t>> bins(spectra.size());
    std::vector<double> amp;
    for (std::size_t c = 0; c < spectra.size(); ++c) {
        amp.resize(spectra[c].size());
        for (std::size_t k = 0; k < amp.size(); ++k) amp[k] = std::abs(spectra[c][k]);
        bins[c] = topk_select(amp, K);
    }
    return bins;
}

std::vector<std::vector<Complex>> column_dfts(std::span<const double> values, std::size_t L, std::size_t d) {
    std::vector<std::vector<Complex>> out(d);
    std::vector<double> col(L);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t t = 0; t < L; ++t) col[t] = values[t * d + c];
        out[c] = dft_real(col);
    }
    return out;
}

}  // namespace

std::vector<Complex> dft_real(std::span<const double> x) {
    if (x.empty()) throw DimensionError("dft_real: empty signal");
    return fft::rfft(x, x.size());
}

std::vector<std::size_t> topk_select(std::span<const double> amplitudes, std::size_t K) {
    if (amplitudes.empty()) throw DimensionError("topk_select: empty spectrum");
    const std::size_t F = amplitudes.size();
    if (K > F - 1) {
        throw ConfigError("topk_select: K = " + std::to_string(K) + " exceeds the " + std::to_string(F - 1) +
                          " non-DC bins");
    }
    std::vector<std::size_t> idx(F - 1);
    std::iota(idx.begin(), idx.end(), std::size_t{1});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return amplitudes[a] > amplitudes[b]; });
    idx.resize(K);
    return idx;
}

SpectrumSelection select_spectrum(const Matrix& residual, std::size_t K) {
    const std::size_t L = residual.rows;
    if (L == 0) throw DimensionError("select_spectrum: empty window");
    require_k(K, L);
    SpectrumSelection sel;
    sel.length = L;
    const auto spectra = column_dfts(residual.data, L, residual.cols);
    const auto bins = selected_bins(spectra, K);
    sel.channels.resize(residual.cols);
    for (std::size_t c = 0; c < residual.cols; ++c) {
        auto& ch = sel.channels[c];
        ch.bins = bins[c];
        for (std::size_t k : ch.bins) {
            ch.amplitudes.push_back(std::abs(spectra[c][k]));
            ch.phases.push_back(std::arg(spectra[c][k]));
        }
    }
    return sel;
}

Matrix extrapolate(const SpectrumSelection& selection, IndexRange range) {
    const std::size_t L = selection.length;
    const std::size_t d = selection.channels.size();
    Matrix out(range.size(), d);
    const double inv_l = 1.0 / static_cast<double>(L);
    for (std::size_t c = 0; c < d; ++c) {
        const auto& ch = selection.channels[c];
        for (std::size_t i = 0; i < ch.bins.size(); ++i) {
            const std::size_t k = ch.bins[i];
            const double a = bin_weight(k, L) * ch.amplitudes[i] * inv_l;
            for (std::size_t r = 0; r < out.rows; ++r) {
                const long long j = range.begin + static_cast<long long>(r);
                out(r, c) += a * std::cos(angle(k, j, L) + ch.phases[i]);
            }
        }
    }
    return out;
}

Matrix fa_extrapolate(const Matrix& residual, std::size_t K, IndexRange range) {
    return extrapolate(select_spectrum(residual, K), range);
}

Tensor fa(const Tensor& residual, std::size_t K, IndexRange range) {
    if (residual.rank() != 2 || residual.dim(0) == 0) {
        throw DimensionError("fa: expected non-empty [L, d] input, got " + shape_str(residual.shape()));
    }
    require_k(K, residual.dim(0));
    const auto spectra = column_dfts(residual.data(), residual.dim(0), residual.dim(1));
    return fa_with_bins(residual, selected_bins(spectra, K), range);
}

Tensor fa_with_bins(const Tensor& residual, const std::vector<std::vector<std::size_t>>& bins, IndexRange range) {
    if (residual.rank() != 2 || bins.size() != residual.dim(1)) {
        throw DimensionError("fa: input " + shape_str(residual.shape()) + " with " + std::to_string(bins.size()) +
                             " channel selections");
    }
    const std::size_t L = residual.dim(0);
    const std::size_t d = residual.dim(1);
    const std::size_t H = range.size();
    const double inv_l = 1.0 / static_cast<double>(L);
    for (const auto& ch : bins)
        for (std::size_t k : ch)
            if (k == 0 || k > L / 2) throw ConfigError("fa: bin " + std::to_string(k) + " outside 1 .. " + std::to_string(L / 2));

    auto roots = std::make_shared<const UnitRoots>(L);

    // Only the selected coefficients are needed: Re c_k = sum x cos, Im c_k = -sum x sin.
    std::vector<double> out(H * d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t k : bins[c]) {
            double re = 0.0;
            double im = 0.0;
            for (std::size_t n = 0; n < L; ++n) {
                const std::size_t p = phase_index(k, static_cast<long long>(n), L);
                re += residual[n * d + c] * roots->cos[p];
                im -= residual[n * d + c] * roots->sin[p];
            }
            const double w = bin_weight(k, L) * inv_l;
            for (std::size_t r = 0; r < H; ++r) {
                const std::size_t p = phase_index(k, range.begin + static_cast<long long>(r), L);
                out[r * d + c] += w * (re * roots->cos[p] - im * roots->sin[p]);
            }
        }
    }
    return Tensor::make_result(
        {H, d}, std::move(out), {residual}, [residual, bins, range, roots, L, d, H, inv_l](std::span<const double> g) {
            std::vector<double> gx(L * d, 0.0);
            for (std::size_t c = 0; c < d; ++c) {
                for (std::size_t k : bins[c]) {
                    const double w = bin_weight(k, L) * inv_l;
                    double g_re = 0.0;
                    double g_im = 0.0;
                    for (std::size_t r = 0; r < H; ++r) {
                        const std::size_t p = phase_index(k, range.begin + static_cast<long long>(r), L);
                        g_re += w * g[r * d + c] * roots->cos[p];
                        g_im -= w * g[r * d + c] * roots->sin[p];
                    }
                    for (std::size_t n = 0; n < L; ++n) {
                        const std::size_t p = phase_index(k, static_cast<long long>(n), L);
                        gx[n * d + c] += g_re * roots->cos[p] - g_im * roots->sin[p];
                    }
                }
            }
            residual.accumulate_grad(gx);
        });
}

}  // namespace etsf::freq
