#include "etsf/model.hpp"

#include "etsf/error.hpp"
#include "etsf/freq.hpp"

#include <cmath>

namespace etsf::model {

namespace {

std::string enc(std::size_t n, const std::string& leaf) { return "encoder." + std::to_string(n) + "." + leaf; }
std::string lvl(std::size_t n, const std::string& leaf) { return "level." + std::to_string(n) + "." + leaf; }
std::string dec(std::size_t n, const std::string& leaf) { return "decoder." + std::to_string(n) + "." + leaf; }

Tensor uniform(const Shape& shape, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(shape_numel(shape));
    // Drawn at single precision so an untrained state survives a checkpoint exactly.
    for (double& x : v) x = static_cast<float>(dist(rng));
    return Tensor::from(shape, std::move(v), true);
}

Tensor last_row(const Tensor& x) { return ops::slice_rows(x, x.dim(0) - 1, x.dim(0)); }

Tensor dropout(const Tensor& x, const ModelConfig& cfg, const ForwardMode& mode) {
    if (!mode.training || cfg.dropout == 0.0) return x;
    if (mode.rng == nullptr) throw ConfigError("training forward pass with dropout needs a random generator");
    return ops::dropout(x, cfg.dropout, true, *mode.rng);
}

Matrix to_matrix(const Tensor& t) { return Matrix::from_tensor(t); }

}  // namespace

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
    };
    positive(lookback, "lookback");
    positive(horizon, "horizon");
    positive(channels, "channels");
    positive(d_model, "d_model");
    positive(d_ff, "d_ff");
    positive(layers, "layers");
    positive(heads, "heads");
    positive(kernel_size, "kernel_size");
    if (d_model % heads != 0) {
        throw ConfigError("model config: d_model " + std::to_string(d_model) + " is not divisible by heads " +
                          std::to_string(heads));
    }
    if (top_k > lookback / 2) {
        throw ConfigError("model config: top_k " + std::to_string(top_k) + " exceeds floor(lookback / 2) = " +
                          std::to_string(lookback / 2));
    }
    if (kernel_size % 2 == 0) throw ConfigError("model config: kernel_size must be odd");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model config: dropout must be in [0, 1)");
}

std::map<std::string, Shape> ModelState::layout(const ModelConfig& cfg) {
    const std::size_t d = cfg.d_model;
    const std::size_t m = cfg.channels;
    std::map<std::string, Shape> out;
    out["embed.kernel"] = {cfg.kernel_size, m, d};
    for (std::size_t n = 0; n < cfg.layers; ++n) {
        out[enc(n, "esa.in_weight")] = {d, d};
        out[enc(n, "esa.in_bias")] = {d};
        out[enc(n, "esa.out_weight")] = {d, d};
        out[enc(n, "esa.out_bias")] = {d};
        out[enc(n, "esa.alpha_raw")] = {cfg.heads};
        out[enc(n, "esa.z0")] = {d};
        out[enc(n, "esa.v0")] = {d};
        out[enc(n, "norm1.gamma")] = {d};
        out[enc(n, "norm1.beta")] = {d};
        out[enc(n, "norm2.gamma")] = {d};
        out[enc(n, "norm2.beta")] = {d};
        out[enc(n, "ff.w1")] = {d, cfg.d_ff};
        out[enc(n, "ff.b1")] = {cfg.d_ff};
        out[enc(n, "ff.w2")] = {cfg.d_ff, d};
        out[enc(n, "ff.b2")] = {d};
        out[lvl(n, "alpha_raw")] = {m};
        out[lvl(n, "growth_proj.weight")] = {d, m};
        out[lvl(n, "growth_proj.bias")] = {m};
        out[lvl(n, "season_proj.weight")] = {d, m};
        out[lvl(n, "season_proj.bias")] = {m};
        out[dec(n, "damping.gamma_raw")] = {cfg.heads};
    }
    out["decoder.output.weight"] = {d, m};
    return out;
}

ModelState ModelState::initialize(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelState s;
    // Iterating the ordered layout keeps the random draws reproducible.
    for (const auto& [name, shape] : layout(cfg)) {
        const auto ends_with = [&](const std::string& suffix) {
            return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        Tensor t;
        if (name == "embed.kernel") {
            t = uniform(shape, 1.0 / std::sqrt(static_cast<double>(cfg.kernel_size * cfg.channels)), rng);
        } else if (ends_with("gamma") ) {
            t = Tensor::full(shape, 1.0, true);
        } else if (ends_with("alpha_raw") || ends_with("gamma_raw") || ends_with("beta") || ends_with("z0") ||
                   ends_with("v0")) {
            t = Tensor::zeros(shape, true);  // alpha = gamma = 0.5, zero states
        } else {
            // Linear maps: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
            std::size_t fan_in = cfg.d_model;
            if (ends_with("ff.w2") || ends_with("ff.b2")) fan_in = cfg.d_ff;
            t = uniform(shape, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
        }
        s.params_.emplace(name, std::move(t));
    }
    return s;
}

const Tensor& ModelState::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("model state has no parameter '" + name + "'");
    return it->second;
}

Tensor& ModelState::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("model state has no parameter '" + name + "'");
    return it->second;
}

void ModelState::set(const std::string& name, Tensor value) { params_[name] = std::move(value); }

void ModelState::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

ModelState ModelState::clone() const {
    ModelState out;
    for (const auto& [name, t] : params_) {
        Tensor copy = t.detach();
        copy.set_requires_grad(t.requires_grad());
        out.params_.emplace(name, std::move(copy));
    }
    return out;
}

void ModelState::check_layout(const ModelConfig& cfg) const {
    const auto expected = layout(cfg);
    for (const auto& [name, shape] : expected) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("model state is missing parameter '" + name + "'");
        if (it->second.shape() != shape) {
            throw ConfigError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                              shape_str(shape));
        }
    }
    for (const auto& [name, t] : params_) {
        if (expected.count(name) == 0) throw ConfigError("unexpected parameter '" + name + "'");
    }
}

bool is_smoothing_parameter(const std::string& name) {
    const auto ends_with = [&](const std::string& suffix) {
        return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends_with("alpha_raw") || ends_with("gamma_raw");
}

Tensor input_embed(const Tensor& x, const ModelState& state, const ModelConfig& cfg) {
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw DataError("input window contains non-finite values");
    }
    return ops::conv1d_temporal(x, state.at("embed.kernel"), cfg.padding);
}

EncoderOutput encoder_layer(const Tensor& residual, std::size_t n, const ModelState& state, const ModelConfig& cfg,
                            const ForwardMode& mode) {
    const std::size_t L = residual.dim(0);
    EncoderOutput out;
    out.season = dropout(freq::fa(residual, cfg.top_k, freq::IndexRange::lookback(L)), cfg, mode);
    Tensor res = ops::sub(residual, out.season);

    const esa::MhEsaWeights w{state.at(enc(n, "esa.in_weight")), state.at(enc(n, "esa.in_bias")),
                              state.at(enc(n, "esa.out_weight")), state.at(enc(n, "esa.out_bias")),
                              state.at(enc(n, "esa.alpha_raw")),  state.at(enc(n, "esa.z0")),
                              state.at(enc(n, "esa.v0"))};
    out.growth = dropout(esa::mh_esa(res, w, cfg.heads), cfg, mode);
    res = ops::layer_norm(ops::sub(res, out.growth), state.at(enc(n, "norm1.gamma")), state.at(enc(n, "norm1.beta")));

    Tensor hidden = dropout(ops::sigmoid(ops::linear(res, state.at(enc(n, "ff.w1")), state.at(enc(n, "ff.b1")))), cfg, mode);
    Tensor ff = dropout(ops::linear(hidden, state.at(enc(n, "ff.w2")), state.at(enc(n, "ff.b2"))), cfg, mode);
    out.residual = ops::layer_norm(ops::add(res, ff), state.at(enc(n, "norm2.gamma")), state.at(enc(n, "norm2.beta")));
    return out;
}

Tensor level_layer(const Tensor& level_prev, const Tensor& season_latent, const Tensor& growth_latent, std::size_t n,
                   const ModelState& state) {
    const Tensor season = ops::linear(season_latent, state.at(lvl(n, "season_proj.weight")), state.at(lvl(n, "season_proj.bias")));
    const Tensor growth = ops::linear(growth_latent, state.at(lvl(n, "growth_proj.weight")), state.at(lvl(n, "growth_proj.bias")));
    const Tensor alpha = ops::sigmoid(state.at(lvl(n, "alpha_raw")));
    // e_{-1} := first de-seasonalized entry, so e_0 = level_prev_0 - S_0.
    const Tensor init = ops::slice_rows(ops::sub(level_prev, season), 0, 1);
    return esa::diff::level_smoothing(level_prev, season, growth, alpha, init);
}

LevelOutput level_pipeline(const Tensor& x, const std::vector<EncoderOutput>& layers, const ModelState& state) {
    if (layers.empty()) throw ConfigError("level pipeline needs at least one layer");
    Tensor level = x;
    for (std::size_t n = 0; n < layers.size(); ++n) level = level_layer(level, layers[n].season, layers[n].growth, n, state);
    return {level, last_row(level)};
}

Tensor growth_damping(const Tensor& b_last, std::size_t horizon, const Tensor& gammas) {
    const std::size_t d = b_last.numel();
    const std::size_t heads = gammas.numel();
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("growth_damping: " + std::to_string(d) + " channels cannot be split across " +
                          std::to_string(heads) + " heads");
    }
    const std::size_t width = d / heads;
    // cum[j, h] = sum_{i=1}^{j+1} gamma_h^i and its derivative in gamma_h.
    std::vector<double> cum(horizon * heads);
    std::vector<double> dcum(horizon * heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const double g = gammas[h];
        double power = 1.0;   // gamma^(i-1)
        double s = 0.0;
        double ds = 0.0;
        for (std::size_t j = 0; j < horizon; ++j) {
            const double i = static_cast<double>(j + 1);
            ds += i * power;
            power *= g;
            s += power;
            cum[j * heads + h] = s;
            dcum[j * heads + h] = ds;
        }
    }
    std::vector<double> out(horizon * d);
    for (std::size_t j = 0; j < horizon; ++j)
        for (std::size_t c = 0; c < d; ++c) out[j * d + c] = cum[j * heads + c / width] * b_last[c];
    return Tensor::make_result(
        {horizon, d}, std::move(out), {b_last, gammas},
        [b_last, gammas, horizon, d, heads, width, cum = std::move(cum), dcum = std::move(dcum)](std::span<const double> g) {
            if (b_last.requires_grad()) {
                std::vector<double> gb(d, 0.0);
                for (std::size_t j = 0; j < horizon; ++j)
                    for (std::size_t c = 0; c < d; ++c) gb[c] += g[j * d + c] * cum[j * heads + c / width];
                b_last.accumulate_grad(gb);
            }
            if (gammas.requires_grad()) {
                std::vector<double> gg(heads, 0.0);
                for (std::size_t j = 0; j < horizon; ++j)
                    for (std::size_t c = 0; c < d; ++c) gg[c / width] += g[j * d + c] * b_last[c] * dcum[j * heads + c / width];
                gammas.accumulate_grad(gg);
            }
        });
}

Matrix growth_damping(std::span<const double> b_last, std::size_t horizon, std::span<const double> gammas) {
    for (double g : gammas) {
        if (!(g > 0.0 && g < 1.0)) throw DomainError("damping parameter must lie in (0, 1), got " + std::to_string(g));
    }
    const Tensor b = Tensor::from({b_last.size()}, std::vector<double>(b_last.begin(), b_last.end()));
    const Tensor gm = Tensor::from({gammas.size()}, std::vector<double>(gammas.begin(), gammas.end()));
    return Matrix::from_tensor(growth_damping(b, horizon, gm));
}

ForwardResult forward(const Tensor& x, const ModelState& state, const ModelConfig& cfg, const ForwardMode& mode) {
    if (x.rank() != 2 || x.dim(0) != cfg.lookback || x.dim(1) != cfg.channels) {
        throw DataError("input window " + shape_str(x.shape()) + " does not match lookback x channels [" +
                        std::to_string(cfg.lookback) + ", " + std::to_string(cfg.channels) + "]");
    }
    const std::size_t L = cfg.lookback;
    const std::size_t H = cfg.horizon;
    ForwardResult r;

    Tensor residual = dropout(input_embed(x, state, cfg), cfg, mode);
    for (std::size_t n = 0; n < cfg.layers; ++n) {
        r.encoder.push_back(encoder_layer(residual, n, state, cfg, mode));
        residual = r.encoder.back().residual;
    }

    const LevelOutput level = level_pipeline(x, r.encoder, state);
    r.level_series = level.series;
    r.level = ops::repeat_rows(level.last, H);

    Tensor growth_sum;
    Tensor season_sum;
    for (std::size_t n = 0; n < cfg.layers; ++n) {
        const auto& layer = r.encoder[n];
        const Tensor gamma = ops::sigmoid(state.at(dec(n, "damping.gamma_raw")));
        Tensor g = dropout(growth_damping(last_row(layer.growth), H, gamma), cfg, mode);
        Tensor s = freq::fa(layer.season, cfg.top_k, freq::IndexRange::horizon(L, H));
        r.growth_horizon.push_back(g);
        r.season_horizon.push_back(s);
        growth_sum = growth_sum.defined() ? ops::add(growth_sum, g) : g;
        season_sum = season_sum.defined() ? ops::add(season_sum, s) : s;
    }
    const Tensor& out_w = state.at("decoder.output.weight");
    r.growth = ops::linear(growth_sum, out_w, Tensor());
    r.seasonal = ops::linear(season_sum, out_w, Tensor());
    r.total = ops::add(ops::add(r.level, r.growth), r.seasonal);
    return r;
}

DecomposedForecast forecast(const Matrix& x, const ModelState& state, const ModelConfig& cfg) {
    const NoGradGuard no_grad;
    const ForwardResult r = forward(x.to_tensor(), state, cfg);
    return {to_matrix(r.level), to_matrix(r.growth), to_matrix(r.seasonal), to_matrix(r.total)};
}

Decomposition decompose(const Matrix& x, const ModelState& state, const ModelConfig& cfg) {
    const NoGradGuard no_grad;
    const ForwardResult r = forward(x.to_tensor(), state, cfg);
    Decomposition out;
    out.forecast = {to_matrix(r.level), to_matrix(r.growth), to_matrix(r.seasonal), to_matrix(r.total)};
    const Tensor& out_w = state.at("decoder.output.weight");
    for (std::size_t n = 0; n < cfg.layers; ++n) {
        out.growth_stacks.push_back(to_matrix(ops::linear(r.growth_horizon[n], out_w, Tensor())));
        out.seasonal_stacks.push_back(to_matrix(ops::linear(r.season_horizon[n], out_w, Tensor())));
        out.lookback_seasonal.push_back(to_matrix(ops::linear(r.encoder[n].season, out_w, Tensor())));
        out.lookback_growth.push_back(to_matrix(ops::linear(r.encoder[n].growth, out_w, Tensor())));
    }
    out.level_series = to_matrix(r.level_series);
    return out;
}

}  // namespace etsf::model
