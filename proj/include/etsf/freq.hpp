#pragma once

#include "etsf/fft.hpp"
#include "etsf/matrix.hpp"
#include "etsf/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Frequency attention: keep the K strongest non-DC Fourier bases of each
// channel and evaluate them at arbitrary time indices, which reconstructs the
// seasonal part over the lookback window and extrapolates it beyond.
namespace etsf::freq {

using fft::Complex;

/// c_k = sum_n x_n exp(-2 pi i k n / L) for k = 0 .. floor(L/2).
std::vector<Complex> dft_real(std::span<const double> x);

struct ChannelSelection {
    // 0-based frequency bins in 1 .. F-1; bin k has frequency k / L.
    std::vector<std::size_t> bins;
    std::vector<double> amplitudes;
    std::vector<double> phases;  // in (-pi, pi]
};

struct SpectrumSelection {
    std::size_t length = 0;  // L of the analysed window
    std::vector<ChannelSelection> channels;
};

/// Indices of the K largest amplitudes among bins 1 .. F-1 (DC excluded);
/// ties go to the smaller bin. Result is ordered by decreasing amplitude.
std::vector<std::size_t> topk_select(std::span<const double> amplitudes, std::size_t K);

/// Runs the DFT per column and selects the top K bins of each.
SpectrumSelection select_spectrum(const Matrix& residual, std::size_t K);

struct IndexRange {
    long long begin = 0;  // first time index (0 = first lookback step)
    long long end = 0;    // one past the last

    std::size_t size() const { return end > begin ? static_cast<std::size_t>(end - begin) : 0; }
    static IndexRange lookback(std::size_t L) { return {0, static_cast<long long>(L)}; }
    static IndexRange horizon(std::size_t L, std::size_t H) {
        return {static_cast<long long>(L), static_cast<long long>(L + H)};
    }
};

/// S_j = (1/L) sum_k w_k A_k cos(2 pi k j / L + phi_k), w_k = 2 except the
/// Nyquist bin (w = 1), over the bins in `selection`.
Matrix extrapolate(const SpectrumSelection& selection, IndexRange range);

Matrix fa_extrapolate(const Matrix& residual, std::size_t K, IndexRange range);

/// Differentiable frequency attention over `range`. The selected bins are
/// recomputed from the input on every call and held constant under
/// differentiation; gradients flow through the Fourier coefficients.
Tensor fa(const Tensor& residual, std::size_t K, IndexRange range);

/// Same map with a caller-supplied bin selection.
Tensor fa_with_bins(const Tensor& residual, const std::vector<std::vector<std::size_t>>& bins, IndexRange range);

}  // namespace etsf::freq
