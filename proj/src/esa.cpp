#include "etsf/esa.hpp"

#include "etsf/error.hpp"
#include "etsf/fft.hpp"

#include <cmath>

namespace etsf::esa {

namespace {

using fft::Complex;
using Spectrum = std::vector<Complex>;

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("smoothing parameter must lie in (0, 1), got " + std::to_string(alpha));
    }
}

std::size_t group_width(std::size_t cols, std::size_t groups) {
    if (groups == 0 || cols % groups != 0) {
        throw ConfigError(std::to_string(cols) + " columns cannot be split into " + std::to_string(groups) +
                          " equal groups");
    }
    return cols / groups;
}

std::vector<double> column(std::span<const double> m, std::size_t rows, std::size_t cols, std::size_t c) {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = m[r * cols + c];
    return out;
}

std::vector<Spectrum> column_spectra(std::span<const double> m, std::size_t rows, std::size_t cols, std::size_t n) {
    std::vector<Spectrum> out(cols);
    for (std::size_t c = 0; c < cols; ++c) out[c] = fft::rfft(column(m, rows, cols, c), n);
    return out;
}

// Grouped causal cross-correlation of an [L, cols] buffer with [L, groups]
// weights. The spectra are returned so the backward pass can reuse them.
struct ConvSpectra {
    std::size_t n = 0;
    std::vector<Spectrum> values;
    std::vector<Spectrum> weights;
};

std::vector<double> causal_conv_raw(std::span<const double> v, std::span<const double> w, std::size_t L,
                                    std::size_t cols, std::size_t groups, ConvSpectra* keep = nullptr) {
    const std::size_t width = group_width(cols, groups);
    ConvSpectra spectra;
    spectra.n = fft::next_fast_len(2 * L - 1);
    const std::size_t n = spectra.n;
    spectra.weights = column_spectra(w, L, groups, n);
    spectra.values = column_spectra(v, L, cols, n);

    std::vector<double> out(L * cols);
    Spectrum prod(n / 2 + 1);
    for (std::size_t c = 0; c < cols; ++c) {
        const Spectrum& fv = spectra.values[c];
        const Spectrum& fw = spectra.weights[c / width];
        for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = fv[k] * std::conj(fw[k]);
        const std::vector<double> corr = fft::irfft(prod, n);
        // roll(-1) then keep indices n-L .. n-1
        for (std::size_t i = 0; i < L; ++i) out[i * cols + c] = corr[(n - L + i + 1) % n];
    }
    if (keep != nullptr) *keep = std::move(spectra);
    return out;
}

std::vector<double> geometric_table(std::span<const double> alpha, std::size_t L, diff::WeightKind kind,
                                    std::vector<double>* derivative) {
    const std::size_t g = alpha.size();
    std::vector<double> out(L * g);
    if (derivative != nullptr) derivative->assign(L * g, 0.0);
    for (std::size_t a = 0; a < g; ++a) {
        const double al = alpha[a];
        const double q = 1.0 - al;
        for (std::size_t j = 0; j < L; ++j) {
            double e = 0.0;
            switch (kind) {
                case diff::WeightKind::Smoothing: e = static_cast<double>(L - 1 - j); break;
                case diff::WeightKind::Initial: e = static_cast<double>(j + 1); break;
                case diff::WeightKind::Decay: e = static_cast<double>(L - j); break;
            }
            const double qe = std::pow(q, e);
            const double dqe = e == 0.0 ? 0.0 : -e * std::pow(q, e - 1.0);  // d/dalpha of q^e
            if (kind == diff::WeightKind::Smoothing) {
                out[j * g + a] = al * qe;
                if (derivative) (*derivative)[j * g + a] = qe + al * dqe;
            } else {
                out[j * g + a] = qe;
                if (derivative) (*derivative)[j * g + a] = dqe;
            }
        }
    }
    return out;
}

}  // namespace

double EsaParams::alpha() const {
    return alpha_raw >= 0.0 ? 1.0 / (1.0 + std::exp(-alpha_raw)) : std::exp(alpha_raw) / (1.0 + std::exp(alpha_raw));
}

EsWeights es_weights(double alpha, std::size_t L) {
    require_alpha(alpha);
    if (L == 0) throw DimensionError("es_weights: length must be positive");
    const double a[1] = {alpha};
    return {geometric_table(a, L, diff::WeightKind::Smoothing, nullptr),
            geometric_table(a, L, diff::WeightKind::Initial, nullptr)};
}

AttentionMatrix::AttentionMatrix(double alpha, std::size_t L) : L_(L), values_(L * (L + 1), 0.0) {
    const EsWeights w = es_weights(alpha, L);
    // Strided roll of the weight vector: row t holds weight[L-1-t .. L-1]
    // right-aligned at column t+1, then the causal mask zeroes the rest.
    for (std::size_t t = 0; t < L; ++t) {
        values_[t * (L + 1)] = w.init_weight[t];
        for (std::size_t j = 1; j <= t + 1; ++j) values_[t * (L + 1) + j] = w.weight[L - 1 - (t + 1 - j)];
    }
}

AttentionMatrix build_attention_matrix(double alpha, std::size_t L) { return AttentionMatrix(alpha, L); }

Matrix esa_naive(const Matrix& V, double alpha, std::span<const double> v0) {
    if (v0.size() != V.cols) {
        throw DimensionError("esa: v0 has " + std::to_string(v0.size()) + " entries for " + std::to_string(V.cols) +
                             " columns");
    }
    const std::size_t L = V.rows;
    const std::size_t d = V.cols;
    const AttentionMatrix A(alpha, L);
    Matrix out(L, d);
    const auto& a = A.values();
    for (std::size_t t = 0; t < L; ++t) {
        const double* arow = &a[t * (L + 1)];
        double* orow = &out.data[t * d];
        for (std::size_t c = 0; c < d; ++c) orow[c] = arow[0] * v0[c];
        for (std::size_t j = 1; j <= L; ++j) {
            const double w = arow[j];
            const double* vrow = &V.data[(j - 1) * d];
            for (std::size_t c = 0; c < d; ++c) orow[c] += w * vrow[c];
        }
    }
    return out;
}

Matrix esa_naive(const Matrix& V, const EsaParams& params) { return esa_naive(V, params.alpha(), params.v0); }

Matrix conv1d_fft(const Matrix& V, std::span<const double> weight) {
    if (weight.size() != V.rows) {
        throw DimensionError("conv1d_fft: weight length " + std::to_string(weight.size()) + " for " +
                             std::to_string(V.rows) + " rows");
    }
    if (V.rows == 0) return V;
    return Matrix(V.rows, V.cols, causal_conv_raw(V.data, weight, V.rows, V.cols, 1));
}

Matrix conv1d_fft(const Matrix& V, const Matrix& weights) {
    if (weights.rows != V.rows) {
        throw DimensionError("conv1d_fft: weight table has " + std::to_string(weights.rows) + " rows for " +
                             std::to_string(V.rows));
    }
    if (V.rows == 0) return V;
    return Matrix(V.rows, V.cols, causal_conv_raw(V.data, weights.data, V.rows, V.cols, weights.cols));
}

Matrix esa_fast(const Matrix& V, double alpha, std::span<const double> v0) {
    if (v0.size() != V.cols) {
        throw DimensionError("esa: v0 has " + std::to_string(v0.size()) + " entries for " + std::to_string(V.cols) +
                             " columns");
    }
    const EsWeights w = es_weights(alpha, V.rows);
    Matrix out = conv1d_fft(V, w.weight);
    for (std::size_t t = 0; t < V.rows; ++t)
        for (std::size_t c = 0; c < V.cols; ++c) out(t, c) += w.init_weight[t] * v0[c];
    return out;
}

Matrix esa_fast(const Matrix& V, const EsaParams& params) { return esa_fast(V, params.alpha(), params.v0); }

Matrix level_smoothing(const Matrix& level_prev, const Matrix& season, const Matrix& growth,
                       std::span<const double> alpha, std::span<const double> init_level) {
    const std::size_t L = level_prev.rows;
    const std::size_t m = level_prev.cols;
    if (season.rows != L || season.cols != m || growth.rows != L || growth.cols != m || alpha.size() != m ||
        init_level.size() != m) {
        throw DimensionError("level_smoothing: inputs must all be " + std::to_string(L) + "x" + std::to_string(m) +
                             " with " + std::to_string(m) + " smoothing parameters");
    }
    for (double a : alpha) require_alpha(a);
    Matrix u(L, m);
    for (std::size_t i = 0; i < u.data.size(); ++i) u.data[i] = level_prev.data[i] - season.data[i];

    const Matrix smooth_w(L, m, geometric_table(alpha, L, diff::WeightKind::Smoothing, nullptr));
    const Matrix init_w(L, m, geometric_table(alpha, L, diff::WeightKind::Initial, nullptr));
    const Matrix decay_w(L, m, geometric_table(alpha, L, diff::WeightKind::Decay, nullptr));

    Matrix shifted(L, m);
    for (std::size_t t = 1; t < L; ++t)
        for (std::size_t c = 0; c < m; ++c) shifted(t, c) = growth(t - 1, c);

    Matrix out = conv1d_fft(u, smooth_w);
    const Matrix aux = conv1d_fft(shifted, decay_w);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t c = 0; c < m; ++c) out(t, c) += init_w(t, c) * init_level[c] + aux(t, c);
    return out;
}

namespace diff {

Tensor geometric_weights(const Tensor& alpha, std::size_t L, WeightKind kind) {
    if (L == 0) throw DimensionError("geometric_weights: length must be positive");
    const std::size_t g = alpha.numel();
    std::vector<double> deriv;
    std::vector<double> table = geometric_table(alpha.data(), L, kind, &deriv);
    return Tensor::make_result({L, g}, std::move(table), {alpha},
                               [alpha, L, g, deriv = std::move(deriv)](std::span<const double> grad) {
                                   std::vector<double> ga(g, 0.0);
                                   for (std::size_t j = 0; j < L; ++j)
                                       for (std::size_t a = 0; a < g; ++a) ga[a] += grad[j * g + a] * deriv[j * g + a];
                                   alpha.accumulate_grad(ga);
                               });
}

Tensor causal_conv(const Tensor& values, const Tensor& weights) {
    if (values.rank() != 2 || weights.rank() != 2 || weights.dim(0) != values.dim(0)) {
        throw DimensionError("causal_conv: values " + shape_str(values.shape()) + " incompatible with weights " +
                             shape_str(weights.shape()));
    }
    const std::size_t L = values.dim(0);
    const std::size_t cols = values.dim(1);
    const std::size_t groups = weights.dim(1);
    const std::size_t width = group_width(cols, groups);
    auto spectra = std::make_shared<ConvSpectra>();
    std::vector<double> out = causal_conv_raw(values.data(), weights.data(), L, cols, groups, spectra.get());

    return Tensor::make_result(
        {L, cols}, std::move(out), {values, weights},
        [values, weights, spectra, L, cols, groups, width](std::span<const double> grad) {
            const std::size_t n = spectra->n;
            std::vector<double> gv(values.requires_grad() ? L * cols : 0);
            std::vector<double> gw(weights.requires_grad() ? L * groups : 0, 0.0);
            std::vector<Spectrum> gw_spec(weights.requires_grad() ? groups : 0, Spectrum(n / 2 + 1));
            Spectrum prod(n / 2 + 1);
            for (std::size_t c = 0; c < cols; ++c) {
                const Spectrum fg = fft::rfft(column(grad, L, cols, c), n);
                if (!gv.empty()) {
                    // dV[s] = sum_m W[m] dY[s + L - 1 - m]: a plain convolution.
                    const Spectrum& fw = spectra->weights[c / width];
                    for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = fw[k] * fg[k];
                    const std::vector<double> conv = fft::irfft(prod, n);
                    for (std::size_t s = 0; s < L; ++s) gv[s * cols + c] = conv[s + L - 1];
                }
                if (!gw.empty()) {
                    // dW[L-1-r] = sum_t dY[t] V[t-r]; summed over the group in frequency space.
                    const Spectrum& fv = spectra->values[c];
                    Spectrum& acc = gw_spec[c / width];
                    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += fg[k] * std::conj(fv[k]);
                }
            }
            if (!gv.empty()) values.accumulate_grad(gv);
            if (!gw.empty()) {
                for (std::size_t a = 0; a < groups; ++a) {
                    const std::vector<double> corr = fft::irfft(gw_spec[a], n);
                    for (std::size_t r = 0; r < L; ++r) gw[(L - 1 - r) * groups + a] = corr[r];
                }
                weights.accumulate_grad(gw);
            }
        });
}

Tensor initial_state_term(const Tensor& init_weights, const Tensor& v0, std::size_t cols) {
    if (init_weights.rank() != 2 || v0.numel() != cols) {
        throw DimensionError("initial_state_term: weights " + shape_str(init_weights.shape()) + ", v0 " +
                             shape_str(v0.shape()) + " for " + std::to_string(cols) + " columns");
    }
    const std::size_t L = init_weights.dim(0);
    const std::size_t groups = init_weights.dim(1);
    const std::size_t width = group_width(cols, groups);
    std::vector<double> out(L * cols);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t c = 0; c < cols; ++c) out[t * cols + c] = init_weights[t * groups + c / width] * v0[c];
    return Tensor::make_result(
        {L, cols}, std::move(out), {init_weights, v0},
        [init_weights, v0, L, cols, groups, width](std::span<const double> grad) {
            if (init_weights.requires_grad()) {
                std::vector<double> gi(L * groups, 0.0);
                for (std::size_t t = 0; t < L; ++t)
                    for (std::size_t c = 0; c < cols; ++c) gi[t * groups + c / width] += grad[t * cols + c] * v0[c];
                init_weights.accumulate_grad(gi);
            }
            if (v0.requires_grad()) {
                std::vector<double> gv(cols, 0.0);
                for (std::size_t t = 0; t < L; ++t)
                    for (std::size_t c = 0; c < cols; ++c)
                        gv[c] += grad[t * cols + c] * init_weights[t * groups + c / width];
                v0.accumulate_grad(gv);
            }
        });
}

Tensor esa(const Tensor& values, const Tensor& alpha, const Tensor& v0) {
    if (values.rank() != 2) throw DimensionError("esa: values must be rank 2, got " + shape_str(values.shape()));
    const std::size_t L = values.dim(0);
    const std::size_t cols = values.dim(1);
    const Tensor weight = geometric_weights(alpha, L, WeightKind::Smoothing);
    const Tensor init_weight = geometric_weights(alpha, L, WeightKind::Initial);
    return ops::add(causal_conv(values, weight), initial_state_term(init_weight, v0, cols));
}

Tensor successive_difference(const Tensor& x, const Tensor& initial) {
    if (x.rank() != 2 || initial.numel() != x.dim(1)) {
        throw DimensionError("successive_difference: input " + shape_str(x.shape()) + " with initial " +
                             shape_str(initial.shape()));
    }
    const std::size_t L = x.dim(0);
    const std::size_t c = x.dim(1);
    std::vector<double> out(L * c);
    for (std::size_t j = 0; j < c && L > 0; ++j) out[j] = x[j] - initial[j];
    for (std::size_t t = 1; t < L; ++t)
        for (std::size_t j = 0; j < c; ++j) out[t * c + j] = x[t * c + j] - x[(t - 1) * c + j];
    return Tensor::make_result({L, c}, std::move(out), {x, initial}, [x, initial, L, c](std::span<const double> g) {
        if (x.requires_grad()) {
            std::vector<double> gx(g.begin(), g.end());
            for (std::size_t t = 0; t + 1 < L; ++t)
                for (std::size_t j = 0; j < c; ++j) gx[t * c + j] -= g[(t + 1) * c + j];
            x.accumulate_grad(gx);
        }
        if (initial.requires_grad()) {
            std::vector<double> gi(c);
            for (std::size_t j = 0; j < c; ++j) gi[j] = -g[j];
            initial.accumulate_grad(gi);
        }
    });
}

Tensor shift_down(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("shift_down: expected rank 2, got " + shape_str(x.shape()));
    const std::size_t L = x.dim(0);
    const std::size_t c = x.dim(1);
    std::vector<double> out(L * c, 0.0);
    for (std::size_t i = c; i < L * c; ++i) out[i] = x[i - c];
    return Tensor::make_result({L, c}, std::move(out), {x}, [x, L, c](std::span<const double> g) {
        std::vector<double> gx(L * c, 0.0);
        for (std::size_t i = 0; i + c < L * c; ++i) gx[i] = g[i + c];
        x.accumulate_grad(gx);
    });
}

Tensor level_smoothing(const Tensor& level_prev, const Tensor& season, const Tensor& growth, const Tensor& alpha,
                       const Tensor& init_level) {
    if (level_prev.shape() != season.shape() || level_prev.shape() != growth.shape() || level_prev.rank() != 2 ||
        alpha.numel() != level_prev.dim(1)) {
        throw DimensionError("level_smoothing: level " + shape_str(level_prev.shape()) + ", season " +
                             shape_str(season.shape()) + ", growth " + shape_str(growth.shape()) + ", alpha " +
                             shape_str(alpha.shape()));
    }
    const std::size_t L = level_prev.dim(0);
    const Tensor smoothed = esa(ops::sub(level_prev, season), alpha, init_level);
    const Tensor accumulated = causal_conv(shift_down(growth), geometric_weights(alpha, L, WeightKind::Decay));
    return ops::add(smoothed, accumulated);
}

}  // namespace diff

Tensor mh_esa(const Tensor& z, const MhEsaWeights& w, std::size_t n_heads) {
    if (z.rank() != 2) throw DimensionError("mh_esa: expected [L, d] input, got " + shape_str(z.shape()));
    const std::size_t d = z.dim(1);
    if (n_heads == 0 || d % n_heads != 0) {
        throw ConfigError("mh_esa: model dimension " + std::to_string(d) + " is not divisible by " +
                          std::to_string(n_heads) + " heads");
    }
    if (w.alpha_raw.numel() != n_heads) {
        throw DimensionError("mh_esa: " + std::to_string(w.alpha_raw.numel()) + " smoothing parameters for " +
                             std::to_string(n_heads) + " heads");
    }
    const Tensor projected = ops::linear(z, w.in_weight, w.in_bias);
    const Tensor differences = diff::successive_difference(projected, w.z0);
    const Tensor smoothed = diff::esa(differences, ops::sigmoid(w.alpha_raw), w.v0);
    return ops::linear(smoothed, w.out_weight, w.out_bias);
}

}  // namespace etsf::esa
