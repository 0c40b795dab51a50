#pragma once

#include "etsf/matrix.hpp"
#include "etsf/ops.hpp"
#include "etsf/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Exponential smoothing attention: attention weights that depend only on the
// time lag, alpha (1 - alpha)^lag, plus a decaying initial state.
//
// For V in R^{L x d}, rows 1-indexed,
//   A(V)_t = sum_{j=0}^{t-1} alpha (1 - alpha)^j V_{t-j} + (1 - alpha)^t v0.
// The naive path multiplies by the explicit L x (L+1) attention matrix; the
// fast path evaluates the lower-triangular part as an FFT cross-correlation.
namespace etsf::esa {

struct EsaParams {
    double alpha_raw = 0.0;   // alpha = sigmoid(alpha_raw)
    std::vector<double> v0;   // initial state, one entry per column

    double alpha() const;
};

struct EsWeights {
    std::vector<double> weight;       // weight[j] = alpha (1 - alpha)^(L-1-j)
    std::vector<double> init_weight;  // init_weight[j] = (1 - alpha)^(j+1)
};

EsWeights es_weights(double alpha, std::size_t L);

/// L x (L+1) attention matrix; column 0 multiplies v0.
class AttentionMatrix {
public:
    AttentionMatrix(double alpha, std::size_t L);

    std::size_t rows() const { return L_; }
    std::size_t cols() const { return L_ + 1; }
    // 0-indexed row t corresponds to time step t+1.
    double operator()(std::size_t t, std::size_t j) const { return values_[t * (L_ + 1) + j]; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t L_;
    std::vector<double> values_;
};

AttentionMatrix build_attention_matrix(double alpha, std::size_t L);

Matrix esa_naive(const Matrix& V, double alpha, std::span<const double> v0);
Matrix esa_naive(const Matrix& V, const EsaParams& params);

/// Causal cross-correlation per column:
///   out[t] = sum_{s <= t} weight[L-1-(t-s)] V[s].
/// Pad to next_fast_len(2L-1), multiply by the conjugate weight spectrum,
/// invert, roll by -1 and keep the last L samples.
Matrix conv1d_fft(const Matrix& V, std::span<const double> weight);
/// Grouped variant: `weights` is L x g, g divides V.cols, and column c of V
/// uses weight column c / (V.cols / g).
Matrix conv1d_fft(const Matrix& V, const Matrix& weights);

Matrix esa_fast(const Matrix& V, double alpha, std::span<const double> v0);
Matrix esa_fast(const Matrix& V, const EsaParams& params);

/// Level recurrence e_t = alpha (prev_t - S_t) + (1 - alpha)(e_{t-1} + B_{t-1})
/// with e_{-1} = init_level and B_{-1} = 0, evaluated as an ESA term over
/// (prev - S) plus the growth accumulation sum_{k>=1} (1 - alpha)^k B_{t-k}.
/// alpha has one entry per column.
Matrix level_smoothing(const Matrix& level_prev, const Matrix& season, const Matrix& growth,
                       std::span<const double> alpha, std::span<const double> init_level);

// Differentiable counterparts. `alpha` tensors have g entries with g dividing
// the column count; each group of consecutive columns shares one alpha.
namespace diff {

enum class WeightKind {
    Smoothing,  // alpha (1 - alpha)^(L-1-j)
    Initial,    // (1 - alpha)^(j+1)
    Decay,      // (1 - alpha)^(L-j)
};

/// [L, g] weight table as a function of alpha [g].
Tensor geometric_weights(const Tensor& alpha, std::size_t L, WeightKind kind);

/// Grouped causal cross-correlation, differentiable in both arguments.
Tensor causal_conv(const Tensor& values, const Tensor& weights);

/// out[t, c] = init_weights[t, group(c)] * v0[c].
Tensor initial_state_term(const Tensor& init_weights, const Tensor& v0, std::size_t cols);

Tensor esa(const Tensor& values, const Tensor& alpha, const Tensor& v0);

/// D_0 = X_0 - initial, D_t = X_t - X_{t-1}.
Tensor successive_difference(const Tensor& x, const Tensor& initial);

/// Row t of the result is row t-1 of x; row 0 is zero.
Tensor shift_down(const Tensor& x);

Tensor level_smoothing(const Tensor& level_prev, const Tensor& season, const Tensor& growth, const Tensor& alpha,
                       const Tensor& init_level);

}  // namespace diff

/// Parameters of one multi-head ESA block. Heads split the model dimension
/// evenly; each head owns alpha, the phantom predecessor used for the first
/// successive difference, and the ESA initial state.
struct MhEsaWeights {
    Tensor in_weight;   // [d, d]
    Tensor in_bias;     // [d]
    Tensor out_weight;  // [d, d]
    Tensor out_bias;    // [d]
    Tensor alpha_raw;   // [n_h]
    Tensor z0;          // [d] phantom predecessor, head-major
    Tensor v0;          // [d] initial state, head-major
};

/// B = Linear_out(MH-ESA(diff(Linear_in(Z)))).
Tensor mh_esa(const Tensor& z, const MhEsaWeights& w, std::size_t n_heads);

}  // namespace etsf::esa
