#include "etsf/trainer.hpp"

#include "etsf/config.hpp"
#include "etsf/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace etsf::trainer {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train config: batch_size must be at least 1");
    if (epochs > 0 && warmup_epochs >= epochs) {
        throw ConfigError("train config: warmup_epochs (" + std::to_string(warmup_epochs) + ") must be below epochs (" +
                          std::to_string(epochs) + ")");
    }
    if (!(base_lr > 0.0)) throw ConfigError("train config: lr must be positive");
    if (!(min_lr >= 0.0 && min_lr <= base_lr)) throw ConfigError("train config: min_lr must lie in [0, lr]");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("train config: Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("train config: eps must be positive");
    if (!(special_lr_multiplier > 0.0)) throw ConfigError("train config: special_lr_multiplier must be positive");
    if (!(grad_clip >= 0.0)) throw ConfigError("train config: grad_clip must be non-negative");
    if (!(augment.probability >= 0.0 && augment.probability <= 1.0)) {
        throw ConfigError("train config: augment.probability must lie in [0, 1]");
    }
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::size_t t, double lr, const AdamHyper& hyper) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
        throw DimensionError("adam_update: parameter, gradient and moment sizes differ");
    }
    if (t == 0) throw ConfigError("adam_update: step count starts at 1");
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grad[i];
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

void adam_step(model::ModelState& state, AdamState& adam, double lr_main, double lr_special, const AdamHyper& hyper) {
    std::vector<double> zeros;
    for (auto& [name, p] : state.params()) {
        std::span<const double> g;
        if (p.has_grad()) {
            g = p.grad();
            for (double x : g) {
                if (!std::isfinite(x)) throw NumericError("non-finite gradient for parameter '" + name + "'");
            }
        } else {
            zeros.assign(p.numel(), 0.0);
            g = zeros;
        }
        auto& m = adam.m[name];
        auto& v = adam.v[name];
        m.resize(p.numel(), 0.0);
        v.resize(p.numel(), 0.0);
        const double lr = model::is_smoothing_parameter(name) ? lr_special : lr_main;
        adam_update(p.mutable_data(), g, m, v, adam.step + 1, lr, hyper);
    }
    ++adam.step;
}

std::size_t warmup_steps_for(std::size_t total_steps, const TrainConfig& cfg) {
    if (cfg.epochs == 0) return 0;
    return total_steps * cfg.warmup_epochs / cfg.epochs;
}

LearningRates lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, const TrainConfig& cfg) {
    LearningRates r;
    r.special = cfg.special_lr_multiplier * cfg.base_lr;
    if (step < warmup_steps) {
        r.main = cfg.base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
        return r;
    }
    // Progress runs from 0 at the warmup endpoint to 1 at the final step.
    const double start = static_cast<double>(warmup_steps) - 1.0;
    const double span = static_cast<double>(total_steps) - 1.0 - start;
    double progress = span > 0.0 ? (static_cast<double>(step) - start) / span : 1.0;
    progress = std::clamp(progress, 0.0, 1.0);
    r.main = cfg.min_lr + (cfg.base_lr - cfg.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return r;
}

LearningRates lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
    return lr_at(step, total_steps, warmup_steps_for(total_steps, cfg), cfg);
}

double batch_loss_backward(const model::ModelState& state, const model::ModelConfig& cfg,
                           std::span<const data::WindowPair> batch, bool training, Rng* rng) {
    if (batch.empty()) throw DataError("empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& w : batch) {
        const model::ForwardMode mode{training, rng};
        const auto r = model::forward(w.lookback.to_tensor(), state, cfg, mode);
        const Tensor loss = ops::mse_loss(r.total, w.target.to_tensor());
        total += loss.item();
        ops::scale(loss, inv_b).backward();
    }
    return total * inv_b;
}

namespace {

double global_grad_norm(const model::ModelState& state) {
    double sq = 0.0;
    for (const auto& [name, p] : state.params())
        if (p.has_grad())
            for (double g : p.grad()) sq += g * g;
    return std::sqrt(sq);
}

void clip_gradients(model::ModelState& state, double bound) {
    const double norm = global_grad_norm(state);
    if (!(norm > bound)) return;
    const double factor = bound / norm;
    for (auto& [name, p] : state.params()) {
        if (!p.has_grad()) continue;
        std::vector<double> g(p.grad().begin(), p.grad().end());
        for (double& x : g) x *= factor - 1.0;
        p.accumulate_grad(g);  // g + (factor - 1) g
    }
}

std::string rng_text(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

double mse_over(const model::ModelState& state, const model::ModelConfig& cfg,
                std::span<const data::WindowPair> windows) {
    if (windows.empty()) return 0.0;
    const NoGradGuard no_grad;
    double total = 0.0;
    for (const auto& w : windows) {
        const auto r = model::forward(w.lookback.to_tensor(), state, cfg);
        total += data::metrics(Matrix::from_tensor(r.total), w.target).mse;
    }
    return total / static_cast<double>(windows.size());
}

}  // namespace

void round_to_stored_precision(model::ModelState& state) {
    for (auto& [name, p] : state.params())
        for (double& x : p.mutable_data()) x = static_cast<float>(x);
}

TrainResult train(const model::ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& dataset,
                  const EpochCallback& on_epoch) {
    model_cfg.validate();
    cfg.validate();
    if (cfg.epochs > 0 && dataset.train.empty()) throw DataError("training split yields no windows");
    for (const auto* split : {&dataset.train, &dataset.val}) {
        for (const auto& w : *split) {
            if (w.lookback.rows != model_cfg.lookback || w.lookback.cols != model_cfg.channels ||
                w.target.rows != model_cfg.horizon || w.target.cols != model_cfg.channels) {
                throw ConfigError("window shapes do not match the model configuration (lookback " +
                                  std::to_string(model_cfg.lookback) + ", horizon " + std::to_string(model_cfg.horizon) +
                                  ", channels " + std::to_string(model_cfg.channels) + ")");
            }
        }
    }

    Rng rng(cfg.seed);
    model::ModelState state = model::ModelState::initialize(model_cfg, rng);
    AdamState adam;
    const AdamHyper hyper{cfg.beta1, cfg.beta2, cfg.eps};

    TrainResult result;
    Checkpoint& best = result.checkpoint;
    best.model = model_cfg;
    best.train = cfg;
    best.norm = dataset.norm;
    best.state = state.clone();
    best.rng_state = rng_text(rng);
    best.epoch = 0;
    best.best_val_mse = std::numeric_limits<double>::infinity();
    if (cfg.epochs == 0) return result;

    const std::size_t n = dataset.train.size();
    const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = batches * cfg.epochs;
    const std::size_t warmup = warmup_steps_for(total_steps, cfg);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<data::WindowPair> batch;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        LearningRates lr;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * cfg.batch_size;
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) {
                batch.push_back(dataset.train[order[i]]);
                data::augment(batch.back(), cfg.augment, rng);
            }
            state.zero_grad();
            const double loss = batch_loss_backward(state, model_cfg, batch, true, &rng);
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b + 1));
            }
            if (cfg.grad_clip > 0.0) clip_gradients(state, cfg.grad_clip);
            lr = lr_at(adam.step, total_steps, warmup, cfg);
            adam_step(state, adam, lr.main, lr.special, hyper);
            epoch_loss += loss * static_cast<double>(end - begin);
        }
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_mse = epoch_loss / static_cast<double>(n);
        entry.val_mse = dataset.val.empty() ? entry.train_mse : mse_over(state, model_cfg, dataset.val);
        entry.lr = lr.main;
        if (!std::isfinite(entry.val_mse)) {
            throw NumericError("non-finite validation loss after epoch " + std::to_string(epoch));
        }
        result.log.push_back(entry);
        result.final_train_mse = entry.train_mse;
        if (on_epoch) on_epoch(entry);
        if (entry.val_mse < best.best_val_mse) {
            best.state = state.clone();
            best.adam = adam;
            best.epoch = epoch;
            best.best_val_mse = entry.val_mse;
            best.rng_state = rng_text(rng);
        }
    }
    round_to_stored_precision(best.state);
    for (auto* moments : {&best.adam.m, &best.adam.v})
        for (auto& [name, values] : *moments)
            for (double& x : values) x = static_cast<float>(x);
    return result;
}

EvalResult evaluate(const model::ModelState& state, const model::ModelConfig& cfg,
                    std::span<const data::WindowPair> windows, const data::NormStats& norm) {
    if (windows.empty()) throw DataError("evaluation split has no windows");
    state.check_layout(cfg);
    const NoGradGuard no_grad;
    EvalResult out;
    out.windows = windows.size();
    for (const auto& w : windows) {
        if (w.lookback.rows != cfg.lookback || w.lookback.cols != cfg.channels || w.target.rows != cfg.horizon ||
            w.target.cols != cfg.channels) {
            throw ConfigError("evaluation window does not match the model configuration");
        }
        const Matrix pred = model::forecast(w.lookback, state, cfg).total;
        const auto a = data::metrics(pred, w.target);
        const auto b = data::metrics(norm.invert(pred), norm.invert(w.target));
        out.normalized.mse += a.mse;
        out.normalized.mae += a.mae;
        out.original.mse += b.mse;
        out.original.mae += b.mae;
    }
    const double k = static_cast<double>(windows.size());
    out.normalized.mse /= k;
    out.normalized.mae /= k;
    out.original.mse /= k;
    out.original.mae /= k;
    return out;
}

EvalResult evaluate(const Checkpoint& ckpt, std::span<const data::WindowPair> windows) {
    return evaluate(ckpt.state, ckpt.model, windows, ckpt.norm);
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', 'T', 'S', 'F'};

template <class T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T take(std::istream& in, const std::string& source) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError(source + ": truncated checkpoint");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

struct Record {
    std::string name;
    std::uint8_t dtype = 0;  // 0 f32, 1 f64
    Shape shape;
    std::vector<double> values;
};

void put_record(std::ostream& out, const Record& r) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(out, r.dtype);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.shape.size()));
    for (std::size_t d : r.shape) put<std::uint64_t>(out, d);
    for (double v : r.values) {
        if (r.dtype == 0) put<float>(out, static_cast<float>(v));
        else put<double>(out, v);
    }
}

Record take_record(std::istream& in, const std::string& source) {
    Record r;
    const auto len = take<std::uint32_t>(in, source);
    if (len > (1u << 16)) throw ParseError(source + ": implausible tensor name length");
    r.name.resize(len);
    if (!in.read(r.name.data(), len)) throw ParseError(source + ": truncated checkpoint");
    r.dtype = take<std::uint8_t>(in, source);
    if (r.dtype > 1) throw ParseError(source + ": unknown dtype code " + std::to_string(r.dtype) + " for '" + r.name + "'");
    const auto rank = take<std::uint8_t>(in, source);
    for (std::uint8_t i = 0; i < rank; ++i) r.shape.push_back(static_cast<std::size_t>(take<std::uint64_t>(in, source)));
    const std::size_t n = shape_numel(r.shape);
    if (n > (std::size_t{1} << 32)) throw ParseError(source + ": implausible tensor size for '" + r.name + "'");
    r.values.resize(n);
    for (double& v : r.values) v = r.dtype == 0 ? static_cast<double>(take<float>(in, source)) : take<double>(in, source);
    return r;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
    config::Json meta{{"model", config::to_json(ckpt.model)},
                      {"train", config::to_json(ckpt.train)},
                      {"rng_state", ckpt.rng_state},
                      {"adam_step", ckpt.adam.step},
                      {"epoch", ckpt.epoch},
                      {"best_val_mse", std::isfinite(ckpt.best_val_mse) ? config::Json(ckpt.best_val_mse) : config::Json()},
                      {"meta", ckpt.meta.empty() ? config::Json::object() : config::Json::parse(ckpt.meta)}};
    const std::string text = meta.dump();

    std::vector<Record> records;
    for (const auto& [name, t] : ckpt.state.params()) records.push_back({"param." + name, 0, t.shape(), t.to_vector()});
    for (const auto& [name, m] : ckpt.adam.m) records.push_back({"adam.m." + name, 0, {m.size()}, m});
    for (const auto& [name, v] : ckpt.adam.v) records.push_back({"adam.v." + name, 0, {v.size()}, v});
    records.push_back({"norm.mean", 1, {ckpt.norm.mean.size()}, ckpt.norm.mean});
    records.push_back({"norm.std", 1, {ckpt.norm.std.size()}, ckpt.norm.std});

    out.write(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint64_t>(out, records.size());
    for (const auto& r : records) put_record(out, r);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    save_checkpoint(ckpt, out);
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(std::istream& in, const std::string& source) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(source + ": not a checkpoint file");
    const auto version = take<std::uint32_t>(in, source);
    if (version != kCheckpointVersion) {
        throw ParseError(source + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto meta_len = take<std::uint64_t>(in, source);
    if (meta_len > (std::uint64_t{1} << 30)) throw ParseError(source + ": implausible metadata length");
    std::string text(static_cast<std::size_t>(meta_len), '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(meta_len))) throw ParseError(source + ": truncated checkpoint");

    Checkpoint ckpt;
    try {
        const auto meta = config::Json::parse(text);
        ckpt.model = config::model_from_json(meta.at("model"));
        ckpt.train = config::train_from_json(meta.at("train"));
        ckpt.rng_state = meta.at("rng_state").get<std::string>();
        ckpt.adam.step = meta.at("adam_step").get<std::size_t>();
        ckpt.epoch = meta.at("epoch").get<std::size_t>();
        const auto& bv = meta.at("best_val_mse");
        ckpt.best_val_mse = bv.is_null() ? std::numeric_limits<double>::infinity() : bv.get<double>();
        ckpt.meta = meta.at("meta").dump();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(source + ": bad checkpoint metadata: " + e.what());
    }

    const auto count = take<std::uint64_t>(in, source);
    const auto starts = [](const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; };
    for (std::uint64_t i = 0; i < count; ++i) {
        Record r = take_record(in, source);
        if (starts(r.name, "param.")) {
            ckpt.state.set(r.name.substr(6), Tensor::from(r.shape, std::move(r.values), true));
        } else if (starts(r.name, "adam.m.")) {
            ckpt.adam.m[r.name.substr(7)] = std::move(r.values);
        } else if (starts(r.name, "adam.v.")) {
            ckpt.adam.v[r.name.substr(7)] = std::move(r.values);
        } else if (r.name == "norm.mean") {
            ckpt.norm.mean = std::move(r.values);
        } else if (r.name == "norm.std") {
            ckpt.norm.std = std::move(r.values);
        } else {
            throw ParseError(source + ": unexpected tensor '" + r.name + "'");
        }
    }
    ckpt.state.check_layout(ckpt.model);
    if (ckpt.norm.mean.size() != ckpt.model.channels || ckpt.norm.std.size() != ckpt.model.channels) {
        throw ParseError(source + ": normalization statistics do not match the channel count");
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    return load_checkpoint(in, path);
}

}  // namespace etsf::trainer
