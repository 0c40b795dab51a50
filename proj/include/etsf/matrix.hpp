#pragma once

#include "etsf/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace etsf {

// Plain row-major matrix for kernels that do not take part in
// differentiation (oracles, classical methods, data handling).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::vector<double> col(std::size_t c) const;
    void set_col(std::size_t c, std::span<const double> values);

    Tensor to_tensor(bool requires_grad = false) const;
    static Matrix from_tensor(const Tensor& t);

    bool operator==(const Matrix&) const = default;
};

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace etsf
