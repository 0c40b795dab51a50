#pragma once

#include "etsf/tensor.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace etsf {

using Rng = std::mt19937_64;

enum class Padding { Zeros, Circular };

// Differentiable primitives. Tensors of rank >= 2 are treated as
// [positions..., features]; "rows" are all leading positions flattened.
namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// Adds a [features] vector to every row of `a`.
Tensor add_row(const Tensor& a, const Tensor& row);
// Multiplies every row of `a` elementwise by a [features] vector.
Tensor mul_row(const Tensor& a, const Tensor& row);

/// y = x W + b along the trailing axis. `b` may be undefined (no bias).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Length-preserving cross-correlation along time.
/// x: [L, m], kernel: [k, m, d] with k odd, no bias.
Tensor conv1d_temporal(const Tensor& x, const Tensor& kernel, Padding pad = Padding::Zeros);

/// Per-row normalization over the last axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor sigmoid(const Tensor& x);

/// Inverted dropout. Identity (same handle) when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Row-range view [begin, end) of a [rows, c] tensor, copied.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// [1, c] or [c] repeated into [count, c].
Tensor repeat_rows(const Tensor& x, std::size_t count);
// Column range [begin, end) of a [rows, c] tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// Horizontal concatenation of [rows, c_i] tensors.
Tensor concat_cols(const std::vector<Tensor>& parts);

}  // namespace ops

/**
 * Finite-difference check of reverse-mode gradients.
 *
 * `f` must rebuild its graph on every call and return a single-element
 * tensor. Each coordinate of every tensor in `wrt` is perturbed by +-eps;
 * the result is
 *   max |adjoint - central difference| / max(1, |central difference|).
 * Throws NumericError when f is not finite at the base point.
 */
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> wrt, double eps = 1e-5);
double grad_check(const std::function<Tensor()>& f, Tensor wrt, double eps = 1e-5);

}  // namespace etsf
