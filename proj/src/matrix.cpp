#include "etsf/matrix.hpp"

#include "etsf/error.hpp"

#include <cmath>

namespace etsf {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
        throw DimensionError("matrix " + std::to_string(r) + "x" + std::to_string(c) + " cannot hold " +
                             std::to_string(data.size()) + " values");
    }
}

std::vector<double> Matrix::col(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = data[r * cols + c];
    return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> values) {
    for (std::size_t r = 0; r < rows; ++r) data[r * cols + c] = values[r];
}

Tensor Matrix::to_tensor(bool requires_grad) const { return Tensor::from({rows, cols}, data, requires_grad); }

Matrix Matrix::from_tensor(const Tensor& t) {
    if (t.rank() == 1) return Matrix(t.dim(0), 1, t.to_vector());
    if (t.rank() != 2) throw DimensionError("expected rank-2 tensor, got " + shape_str(t.shape()));
    return Matrix(t.dim(0), t.dim(1), t.to_vector());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw DimensionError("max_abs_diff: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                             std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

}  // namespace etsf
