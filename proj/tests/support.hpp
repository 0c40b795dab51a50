#pragma once

#include "etsf/matrix.hpp"
#include "etsf/ops.hpp"
#include "etsf/tensor.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace etsf::test {

inline std::vector<double> normal_values(std::size_t n, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = true, double sd = 1.0) {
    return Tensor::from(shape, normal_values(shape_numel(shape), rng, sd), requires_grad);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
    return Matrix(rows, cols, normal_values(rows * cols, rng, sd));
}

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double max_abs(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Sum of w * x over all entries: a scalar loss with non-uniform adjoints.
inline Tensor weighted_sum(const Tensor& x, const Tensor& w) { return ops::sum(ops::mul(x, w)); }

}  // namespace etsf::test
