#pragma once

#include "etsf/esa.hpp"
#include "etsf/matrix.hpp"
#include "etsf/ops.hpp"
#include "etsf/tensor.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace etsf::model {

struct ModelConfig {
    std::size_t lookback = 192;
    std::size_t horizon = 48;
    std::size_t channels = 1;  // m
    std::size_t d_model = 32;
    std::size_t d_ff = 128;
    std::size_t layers = 2;  // encoder layers == decoder stacks
    std::size_t heads = 4;
    std::size_t top_k = 2;
    double dropout = 0.2;
    std::size_t kernel_size = 3;
    Padding padding = Padding::Zeros;

    // Throws ConfigError naming the first violated constraint.
    void validate() const;
};

/**
 * Named parameters of the network, ordered by name.
 *
 *   embed.kernel                          [k, m, d]
 *   encoder.<n>.esa.{in,out}_weight       [d, d]     .{in,out}_bias [d]
 *   encoder.<n>.esa.alpha_raw             [heads]
 *   encoder.<n>.esa.{z0,v0}               [d]
 *   encoder.<n>.norm{1,2}.{gamma,beta}    [d]
 *   encoder.<n>.ff.w1 [d, d_ff]  .b1 [d_ff]  .w2 [d_ff, d]  .b2 [d]
 *   level.<n>.alpha_raw                   [m]
 *   level.<n>.{growth,season}_proj.weight [d, m]  .bias [m]
 *   decoder.<n>.damping.gamma_raw         [heads]
 *   decoder.output.weight                 [d, m]   (no bias)
 */
class ModelState {
public:
    ModelState() = default;

    static ModelState initialize(const ModelConfig& cfg, Rng& rng);
    // Expected shape of every parameter for `cfg`.
    static std::map<std::string, Shape> layout(const ModelConfig& cfg);

    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    void set(const std::string& name, Tensor value);

    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }

    void zero_grad();
    // Deep copy; the clone shares no storage with this state.
    ModelState clone() const;
    // Throws ConfigError if names or shapes deviate from layout(cfg).
    void check_layout(const ModelConfig& cfg) const;

private:
    std::map<std::string, Tensor> params_;
};

// Smoothing and damping parameters (the group trained without schedule).
bool is_smoothing_parameter(const std::string& name);

struct ForwardMode {
    bool training = false;
    Rng* rng = nullptr;  // required when training with dropout > 0
};

struct EncoderOutput {
    Tensor residual;  // [L, d]
    Tensor growth;    // B, [L, d]
    Tensor season;    // S, [L, d]
};

/// Temporal convolution embedding X [L, m] -> [L, d]; rejects non-finite input.
Tensor input_embed(const Tensor& x, const ModelState& state, const ModelConfig& cfg);

/// One encoder layer: S = FA(res); res -= S; B = MH-ESA(res);
/// res = LN(res - B); res = LN(res + FF(res)).
EncoderOutput encoder_layer(const Tensor& residual, std::size_t layer, const ModelState& state,
                            const ModelConfig& cfg, const ForwardMode& mode);

/// Level module of one layer, in observation space.
Tensor level_layer(const Tensor& level_prev, const Tensor& season_latent, const Tensor& growth_latent,
                   std::size_t layer, const ModelState& state);

struct LevelOutput {
    Tensor series;  // level^(N), [L, m]
    Tensor last;    // e_t, [1, m]
};

/// Iterates the level module over the layers starting from level^(0) = X.
LevelOutput level_pipeline(const Tensor& x, const std::vector<EncoderOutput>& layers, const ModelState& state);

/// Row j (1-indexed) = (gamma + ... + gamma^j) * b on each head's channels.
/// b_last: [1, d] or [d]; gammas: [heads] values in (0, 1).
Tensor growth_damping(const Tensor& b_last, std::size_t horizon, const Tensor& gammas);
Matrix growth_damping(std::span<const double> b_last, std::size_t horizon, std::span<const double> gammas);

struct ForwardResult {
    Tensor level;     // E, [H, m]
    Tensor growth;    // [H, m]
    Tensor seasonal;  // [H, m]
    Tensor total;     // [H, m]
    // Intermediates for decomposition.
    Tensor level_series;                 // [L, m]
    std::vector<Tensor> growth_horizon;  // per stack, latent [H, d]
    std::vector<Tensor> season_horizon;  // per stack, latent [H, d]
    std::vector<EncoderOutput> encoder;  // per layer
};

ForwardResult forward(const Tensor& x, const ModelState& state, const ModelConfig& cfg, const ForwardMode& mode = {});

struct DecomposedForecast {
    Matrix level;     // H x m
    Matrix growth;    // H x m
    Matrix seasonal;  // H x m
    Matrix total;     // H x m, equals level + growth + seasonal
};

DecomposedForecast forecast(const Matrix& x, const ModelState& state, const ModelConfig& cfg);

struct Decomposition {
    DecomposedForecast forecast;
    std::vector<Matrix> growth_stacks;     // per stack, projected, H x m
    std::vector<Matrix> seasonal_stacks;   // per stack, projected, H x m
    // Per layer, S and B over the lookback through the same output map.
    std::vector<Matrix> lookback_seasonal; // L x m
    std::vector<Matrix> lookback_growth;   // L x m
    Matrix level_series;                   // L x m
};

Decomposition decompose(const Matrix& x, const ModelState& state, const ModelConfig& cfg);

}  // namespace etsf::model
