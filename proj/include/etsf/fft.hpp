#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace etsf::fft {

using Complex = std::complex<double>;

// Smallest 2^a 3^b 5^c that is >= n (n >= 1).
std::size_t next_fast_len(std::size_t n);

// One-sided transform of x zero-padded (or truncated) to length n:
// n/2 + 1 coefficients, c_k = sum_j x_j exp(-2 pi i k j / n).
std::vector<Complex> rfft(std::span<const double> x, std::size_t n);

// Inverse of rfft including the 1/n factor; `spectrum` holds n/2 + 1 bins.
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

}  // namespace etsf::fft
