#include "etsf/ops.hpp"

#include "etsf/error.hpp"

#include <Eigen/Core>

#include <cmath>

namespace etsf {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

std::size_t last_dim(const Tensor& x) { return x.shape().empty() ? 1 : x.shape().back(); }

std::size_t leading_rows(const Tensor& x) {
    const std::size_t d = last_dim(x);
    return d == 0 ? 0 : x.numel() / d;
}

void require_matrix(const Tensor& x, const char* op) {
    if (x.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(x.shape()));
}

}  // namespace

namespace ops {

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
        a.accumulate_grad(g);
        b.accumulate_grad(g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
        a.accumulate_grad(g);
        if (b.requires_grad()) {
            std::vector<double> neg(g.begin(), g.end());
            for (double& v : neg) v = -v;
            b.accumulate_grad(neg);
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
        std::vector<double> ga(g.size());
        if (a.requires_grad()) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * b[i];
            a.accumulate_grad(ga);
        }
        if (b.requires_grad()) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * a[i];
            b.accumulate_grad(ga);
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    return Tensor::make_result(a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) {
        std::vector<double> ga(g.begin(), g.end());
        for (double& v : ga) v *= factor;
        a.accumulate_grad(ga);
    });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    const std::size_t d = last_dim(a);
    if (row.numel() != d) {
        throw DimensionError("add_row: row " + shape_str(row.shape()) + " vs tensor " + shape_str(a.shape()));
    }
    const std::size_t n = leading_rows(a);
    std::vector<double> out(a.numel());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] = a[r * d + c] + row[c];
    return Tensor::make_result(a.shape(), std::move(out), {a, row}, [a, row, n, d](std::span<const double> g) {
        a.accumulate_grad(g);
        if (row.requires_grad()) {
            std::vector<double> gr(d, 0.0);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) gr[c] += g[r * d + c];
            row.accumulate_grad(gr);
        }
    });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
    const std::size_t d = last_dim(a);
    if (row.numel() != d) {
        throw DimensionError("mul_row: row " + shape_str(row.shape()) + " vs tensor " + shape_str(a.shape()));
    }
    const std::size_t n = leading_rows(a);
    std::vector<double> out(a.numel());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] = a[r * d + c] * row[c];
    return Tensor::make_result(a.shape(), std::move(out), {a, row}, [a, row, n, d](std::span<const double> g) {
        if (a.requires_grad()) {
            std::vector<double> ga(g.size());
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) ga[r * d + c] = g[r * d + c] * row[c];
            a.accumulate_grad(ga);
        }
        if (row.requires_grad()) {
            std::vector<double> gr(d, 0.0);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < d; ++c) gr[c] += g[r * d + c] * a[r * d + c];
            row.accumulate_grad(gr);
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2 || x.rank() == 0 || last_dim(x) != weight.dim(0)) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(weight.shape()));
    }
    const std::size_t din = weight.dim(0);
    const std::size_t dout = weight.dim(1);
    if (bias.defined() && bias.numel() != dout) {
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                             shape_str(weight.shape()));
    }
    const std::size_t n = leading_rows(x);
    Shape out_shape = x.shape();
    out_shape.back() = dout;

    std::vector<double> out(n * dout);
    {
        ConstMap X(x.data().data(), n, din);
        ConstMap W(weight.data().data(), din, dout);
        MutMap Y(out.data(), n, dout);
        Y.noalias() = X * W;
        if (bias.defined()) {
            Eigen::Map<const Eigen::RowVectorXd> b(bias.data().data(), dout);
            Y.rowwise() += b;
        }
    }
    std::vector<Tensor> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return Tensor::make_result(
        std::move(out_shape), std::move(out), parents, [x, weight, bias, n, din, dout](std::span<const double> g) {
            ConstMap G(g.data(), n, dout);
            if (x.requires_grad()) {
                std::vector<double> gx(n * din);
                MutMap GX(gx.data(), n, din);
                GX.noalias() = G * ConstMap(weight.data().data(), din, dout).transpose();
                x.accumulate_grad(gx);
            }
            if (weight.requires_grad()) {
                std::vector<double> gw(din * dout);
                MutMap GW(gw.data(), din, dout);
                GW.noalias() = ConstMap(x.data().data(), n, din).transpose() * G;
                weight.accumulate_grad(gw);
            }
            if (bias.defined() && bias.requires_grad()) {
                std::vector<double> gb(dout);
                Eigen::Map<Eigen::RowVectorXd>(gb.data(), dout) = G.colwise().sum();
                bias.accumulate_grad(gb);
            }
        });
}

Tensor conv1d_temporal(const Tensor& x, const Tensor& kernel, Padding pad) {
    require_matrix(x, "conv1d_temporal");
    if (kernel.rank() != 3 || kernel.dim(1) != x.dim(1)) {
        throw DimensionError("conv1d_temporal: input " + shape_str(x.shape()) + " incompatible with kernel " +
                             shape_str(kernel.shape()));
    }
    const std::size_t k = kernel.dim(0);
    if (k % 2 == 0) throw ConfigError("conv1d_temporal: kernel size must be odd, got " + std::to_string(k));
    const std::size_t L = x.dim(0);
    const std::size_t m = x.dim(1);
    const std::size_t d = kernel.dim(2);
    const auto half = static_cast<std::ptrdiff_t>(k / 2);

    // Source row for output t and tap j, or -1 when it falls into zero padding.
    auto source = [L, half, pad](std::size_t t, std::size_t j) -> std::ptrdiff_t {
        std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - half;
        const auto len = static_cast<std::ptrdiff_t>(L);
        if (pad == Padding::Circular) return ((s % len) + len) % len;
        return (s < 0 || s >= len) ? -1 : s;
    };

    std::vector<double> out(L * d, 0.0);
    const auto xd = x.data();
    const auto kd = kernel.data();
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t s = source(t, j);
            if (s < 0) continue;
            for (std::size_t i = 0; i < m; ++i) {
                const double xv = xd[static_cast<std::size_t>(s) * m + i];
                const double* krow = &kd[(j * m + i) * d];
                for (std::size_t o = 0; o < d; ++o) out[t * d + o] += xv * krow[o];
            }
        }
    }
    return Tensor::make_result({L, d}, std::move(out), {x, kernel},
                               [x, kernel, L, m, d, k, source](std::span<const double> g) {
                                   std::vector<double> gx(x.requires_grad() ? L * m : 0, 0.0);
                                   std::vector<double> gk(kernel.requires_grad() ? k * m * d : 0, 0.0);
                                   const auto xd = x.data();
                                   const auto kd = kernel.data();
                                   for (std::size_t t = 0; t < L; ++t) {
                                       for (std::size_t j = 0; j < k; ++j) {
                                           const std::ptrdiff_t s = source(t, j);
                                           if (s < 0) continue;
                                           const auto su = static_cast<std::size_t>(s);
                                           for (std::size_t i = 0; i < m; ++i) {
                                               const std::size_t kbase = (j * m + i) * d;
                                               double acc = 0.0;
                                               for (std::size_t o = 0; o < d; ++o) {
                                                   acc += g[t * d + o] * kd[kbase + o];
                                                   if (!gk.empty()) gk[kbase + o] += g[t * d + o] * xd[su * m + i];
                                               }
                                               if (!gx.empty()) gx[su * m + i] += acc;
                                           }
                                       }
                                   }
                                   if (!gx.empty()) x.accumulate_grad(gx);
                                   if (!gk.empty()) kernel.accumulate_grad(gk);
                               });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t d = last_dim(x);
    if (d == 0 || x.rank() == 0) throw DimensionError("layer_norm: empty feature axis in " + shape_str(x.shape()));
    if (gamma.numel() != d || beta.numel() != d) {
        throw DimensionError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()) +
                             " vs input " + shape_str(x.shape()));
    }
    if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
    const std::size_t n = leading_rows(x);
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(n);
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = &x.data()[r * d];
        double mu = 0.0;
        for (std::size_t c = 0; c < d; ++c) mu += row[c];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            xhat[r * d + c] = (row[c] - mu) * inv_std[r];
            out[r * d + c] = xhat[r * d + c] * gamma[c] + beta[c];
        }
    }
    return Tensor::make_result(
        x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](std::span<const double> g) {
            if (x.requires_grad()) {
                std::vector<double> gx(n * d);
                for (std::size_t r = 0; r < n; ++r) {
                    double mean_g = 0.0;
                    double mean_gx = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        const double gh = g[r * d + c] * gamma[c];
                        mean_g += gh;
                        mean_gx += gh * xhat[r * d + c];
                    }
                    mean_g /= static_cast<double>(d);
                    mean_gx /= static_cast<double>(d);
                    for (std::size_t c = 0; c < d; ++c) {
                        const double gh = g[r * d + c] * gamma[c];
                        gx[r * d + c] = inv_std[r] * (gh - mean_g - xhat[r * d + c] * mean_gx);
                    }
                }
                x.accumulate_grad(gx);
            }
            if (gamma.requires_grad() || beta.requires_grad()) {
                std::vector<double> gg(d, 0.0);
                std::vector<double> gb(d, 0.0);
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < d; ++c) {
                        gg[c] += g[r * d + c] * xhat[r * d + c];
                        gb[c] += g[r * d + c];
                    }
                gamma.accumulate_grad(gg);
                beta.accumulate_grad(gb);
            }
        });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    std::vector<double> y = out;
    return Tensor::make_result(x.shape(), std::move(out), {x}, [x, y = std::move(y)](std::span<const double> g) {
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * y[i] * (1.0 - y[i]);
        x.accumulate_grad(gx);
    });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: probability must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const double inv = 1.0 / (1.0 - p);
    std::vector<double> mask(x.numel());
    for (double& v : mask) v = keep(rng) ? inv : 0.0;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
    return Tensor::make_result(x.shape(), std::move(out), {x}, [x, mask = std::move(mask)](std::span<const double> g) {
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * mask[i];
        x.accumulate_grad(gx);
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return Tensor::make_result({1}, {s}, {x}, [x](std::span<const double> g) {
        x.accumulate_grad(std::vector<double>(x.numel(), g[0]));
    });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    const Tensor diff = sub(pred, target);
    return mean(mul(diff, diff));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    require_matrix(x, "slice_rows");
    if (begin > end || end > x.dim(0)) {
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") outside " + shape_str(x.shape()));
    }
    const std::size_t c = x.dim(1);
    const std::size_t rows = x.dim(0);
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                            x.data().begin() + static_cast<std::ptrdiff_t>(end * c));
    return Tensor::make_result({end - begin, c}, std::move(out), {x},
                               [x, begin, rows, c](std::span<const double> g) {
                                   std::vector<double> gx(rows * c, 0.0);
                                   std::copy(g.begin(), g.end(), gx.begin() + static_cast<std::ptrdiff_t>(begin * c));
                                   x.accumulate_grad(gx);
                               });
}

Tensor repeat_rows(const Tensor& x, std::size_t count) {
    const std::size_t c = x.rank() == 2 ? x.dim(1) : x.numel();
    if (x.rank() == 2 && x.dim(0) != 1) throw DimensionError("repeat_rows: expected one row, got " + shape_str(x.shape()));
    std::vector<double> out(count * c);
    for (std::size_t r = 0; r < count; ++r) std::copy(x.data().begin(), x.data().end(), out.begin() + static_cast<std::ptrdiff_t>(r * c));
    return Tensor::make_result({count, c}, std::move(out), {x}, [x, count, c](std::span<const double> g) {
        std::vector<double> gx(c, 0.0);
        for (std::size_t r = 0; r < count; ++r)
            for (std::size_t j = 0; j < c; ++j) gx[j] += g[r * c + j];
        x.accumulate_grad(gx);
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    require_matrix(x, "slice_cols");
    const std::size_t rows = x.dim(0);
    const std::size_t c = x.dim(1);
    if (begin > end || end > c) {
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") outside " + shape_str(x.shape()));
    }
    const std::size_t w = end - begin;
    std::vector<double> out(rows * w);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) out[r * w + j] = x[r * c + begin + j];
    return Tensor::make_result({rows, w}, std::move(out), {x}, [x, rows, c, begin, w](std::span<const double> g) {
        std::vector<double> gx(rows * c, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) gx[r * c + begin + j] = g[r * w + j];
        x.accumulate_grad(gx);
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t rows = parts.front().dim(0);
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.dim(0) != rows) {
            throw DimensionError("concat_cols: row mismatch " + shape_str(parts.front().shape()) + " vs " +
                                 shape_str(p.shape()));
        }
        total += p.dim(1);
    }
    std::vector<double> out(rows * total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) out[r * total + offset + j] = p[r * w + j];
        offset += w;
    }
    return Tensor::make_result({rows, total}, std::move(out), parts, [parts, rows, total](std::span<const double> g) {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const std::size_t w = p.dim(1);
            if (p.requires_grad()) {
                std::vector<double> gp(rows * w);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < w; ++j) gp[r * w + j] = g[r * total + offset + j];
                p.accumulate_grad(gp);
            }
            offset += w;
        }
    });
}

}  // namespace ops

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> wrt, double eps) {
    for (auto& t : wrt) t.zero_grad();
    const Tensor base = f();
    if (!std::isfinite(base.item())) throw NumericError("grad_check: objective is not finite at the base point");
    base.backward();

    double worst = 0.0;
    for (auto& t : wrt) {
        const std::vector<double> adjoint =
            t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end()) : std::vector<double>(t.numel(), 0.0);
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double orig = values[i];
            values[i] = orig + eps;
            const double up = f().item();
            values[i] = orig - eps;
            const double down = f().item();
            values[i] = orig;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: objective is not finite near coordinate " + std::to_string(i));
            }
            const double fd = (up - down) / (2.0 * eps);
            worst = std::max(worst, std::abs(adjoint[i] - fd) / std::max(1.0, std::abs(fd)));
        }
    }
    return worst;
}

double grad_check(const std::function<Tensor()>& f, Tensor wrt, double eps) {
    return grad_check(f, std::span<Tensor>(&wrt, 1), eps);
}

}  // namespace etsf
