#pragma once

#include "etsf/config.hpp"
#include "etsf/data.hpp"
#include "etsf/trainer.hpp"

#include <optional>
#include <string>

// Turns an input file into normalized train / validation / test windows.
// Two layouts are understood: a time-series CSV (rows are time steps, split
// chronologically) and a synthetic instance file (rows are instances, split
// by instance index).
namespace etsf::pipeline {

struct Source {
    bool synthetic = false;
    data::Series series;           // time-series layout
    data::synth::SynthFile synth;  // instance layout

    std::size_t channels() const { return synthetic ? 1 : series.channels(); }
};

Source load_source(const std::string& path);

/// Sets model.channels from the data (ConfigError if the config named a
/// different count) and checks lookback / horizon against the layout.
void bind_model(model::ModelConfig& model, const Source& source);

struct Prepared {
    trainer::Dataset dataset;
    // Row ranges of each split in the source (time steps or instances).
    std::size_t train_end = 0;
    std::size_t val_end = 0;
};

/// With `norm` set, those statistics are used instead of fitting the
/// training split.
Prepared prepare(const Source& source, const model::ModelConfig& model, const config::DataConfig& cfg,
                 const data::NormStats* norm = nullptr);

const std::vector<data::WindowPair>& split_windows(const trainer::Dataset& ds, const std::string& split);

// Raw (un-normalized) window starting at `at`: lookback rows
// [at, at + L) of a series, or instance `at` of a synthetic file.
struct RawWindow {
    Matrix lookback;
    std::optional<Matrix> target;  // present when the full horizon is in the data
    std::size_t first_target_index = 0;  // time index of the first horizon step
};

RawWindow window_at(const Source& source, const model::ModelConfig& model, std::size_t at);

}  // namespace etsf::pipeline
