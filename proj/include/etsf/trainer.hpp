#pragma once

#include "etsf/data.hpp"
#include "etsf/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace etsf::trainer {

struct TrainConfig {
    double base_lr = 1e-3;
    std::size_t epochs = 15;
    std::size_t warmup_epochs = 3;
    double min_lr = 1e-30;
    std::size_t batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    double special_lr_multiplier = 100.0;
    double grad_clip = 0.0;  // global L2 norm bound; 0 disables
    data::AugmentConfig augment;

    void validate() const;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of a flat parameter; `t` counts from 1.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::size_t t, double lr, const AdamHyper& hyper);

struct AdamState {
    std::size_t step = 0;  // completed updates
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
};

/// Updates every parameter from its accumulated gradient (zero if none).
/// Smoothing/damping parameters use lr_special. Throws NumericError naming
/// the first parameter whose gradient is not finite.
void adam_step(model::ModelState& state, AdamState& adam, double lr_main, double lr_special, const AdamHyper& hyper);

struct LearningRates {
    double main = 0.0;
    double special = 0.0;
};

/// Linear warmup to base_lr at step warmup_steps - 1, cosine decay to min_lr
/// at step total_steps - 1; the special group stays at multiplier * base_lr.
LearningRates lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, const TrainConfig& cfg);
/// Warmup steps derived as warmup_epochs / epochs of total_steps.
LearningRates lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);
std::size_t warmup_steps_for(std::size_t total_steps, const TrainConfig& cfg);

// Normalized windows for each split plus the statistics used.
struct Dataset {
    std::vector<data::WindowPair> train;
    std::vector<data::WindowPair> val;
    std::vector<data::WindowPair> test;
    data::NormStats norm;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;  // main-group rate of the last step in the epoch
};

struct Checkpoint {
    model::ModelConfig model;
    TrainConfig train;
    data::NormStats norm;
    model::ModelState state;
    AdamState adam;
    std::string rng_state;
    std::size_t epoch = 0;  // epoch the parameters come from (0 = initial)
    double best_val_mse = 0.0;
    std::string meta;  // JSON object text owned by the caller
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
    double final_train_mse = 0.0;  // last epoch
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on the MSE of normalized targets. Each batch accumulates per-window
/// gradients of loss / batch size. The parameters with the lowest validation
/// MSE (training MSE if there is no validation split) are kept and rounded
/// to single precision, the stored checkpoint precision.
TrainResult train(const model::ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset& dataset,
                  const EpochCallback& on_epoch = {});

/// Mean MSE over `batch`; the gradient of that mean is accumulated into the
/// parameters. Augmentation is the caller's business.
double batch_loss_backward(const model::ModelState& state, const model::ModelConfig& cfg,
                           std::span<const data::WindowPair> batch, bool training, Rng* rng);

struct EvalResult {
    data::Metrics normalized;
    data::Metrics original;  // de-normalized scale
    std::size_t windows = 0;
};

/// Inference-mode metrics averaged over all windows.
EvalResult evaluate(const model::ModelState& state, const model::ModelConfig& cfg,
                    std::span<const data::WindowPair> windows, const data::NormStats& norm);
EvalResult evaluate(const Checkpoint& ckpt, std::span<const data::WindowPair> windows);

// Binary checkpoint: "ETSF", u32 version, u64 length + JSON metadata,
// u64 tensor count, then per tensor u32 name length + name, u8 dtype
// (0 f32, 1 f64), u8 rank, u64 dims, little-endian payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint load_checkpoint(std::istream& in, const std::string& source = "<stream>");

// Rounds every parameter to the nearest float.
void round_to_stored_precision(model::ModelState& state);

}  // namespace etsf::trainer
