#include "etsf/pipeline.hpp"

#include "etsf/error.hpp"

#include <cmath>

namespace etsf::pipeline {

namespace {

std::vector<data::WindowPair> normalized_windows(const data::Series& part, const data::NormStats& norm,
                                                 std::size_t L, std::size_t H, std::size_t stride) {
    data::Series s = part;
    s.values = norm.apply(part.values);
    return data::window_dataset(s, L, H, stride);
}

std::vector<data::WindowPair> instance_windows(const Matrix& rows, const data::NormStats& norm, std::size_t lookback) {
    // Instances are univariate: normalize every value of the row.
    Matrix flat(rows.data.size(), 1, rows.data);
    const Matrix z = norm.apply(flat);
    return data::synth::to_windows(Matrix(rows.rows, rows.cols, z.data), lookback);
}

Matrix instance_rows(const Matrix& all, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, all.cols);
    std::copy(all.data.begin() + static_cast<std::ptrdiff_t>(begin * all.cols),
              all.data.begin() + static_cast<std::ptrdiff_t>(end * all.cols), out.data.begin());
    return out;
}

}  // namespace

Source load_source(const std::string& path) {
    Source s;
    s.synthetic = data::synth::is_synth_csv(path);
    if (s.synthetic) {
        s.synth = data::synth::read_csv(path);
        if (s.synth.instances.rows == 0) throw DataError(path + ": no instances");
    } else {
        s.series = data::load_csv(path);
    }
    return s;
}

void bind_model(model::ModelConfig& model, const Source& source) {
    const std::size_t m = source.channels();
    // A config that leaves channels at its default of 1 adopts the data's count.
    if (model.channels != m) {
        if (model.channels != 1) {
            throw ConfigError("model.channels is " + std::to_string(model.channels) + " but the data has " +
                              std::to_string(m) + " channels");
        }
        model.channels = m;
    }
    if (source.synthetic && (model.lookback != source.synth.lookback || model.horizon != source.synth.horizon)) {
        throw ConfigError("model lookback/horizon " + std::to_string(model.lookback) + "/" +
                          std::to_string(model.horizon) + " do not match the synthetic file's " +
                          std::to_string(source.synth.lookback) + "/" + std::to_string(source.synth.horizon));
    }
    model.validate();
}

Prepared prepare(const Source& source, const model::ModelConfig& model, const config::DataConfig& cfg,
                 const data::NormStats* norm) {
    cfg.split.validate();
    Prepared out;
    const std::size_t L = model.lookback;
    const std::size_t H = model.horizon;
    if (source.synthetic) {
        const Matrix& rows = source.synth.instances;
        const std::size_t n = rows.rows;
        out.train_end = data::split_boundary(cfg.split.train, n);
        out.val_end = data::split_boundary(cfg.split.train + cfg.split.val, n);
        if (out.train_end == 0 || out.val_end == out.train_end || out.val_end == n) {
            throw DataError("synthetic file with " + std::to_string(n) + " instances is too small for the split");
        }
        const Matrix train_rows = instance_rows(rows, 0, out.train_end);
        Matrix val_rows = instance_rows(rows, out.train_end, out.val_end);
        Matrix test_rows = instance_rows(rows, out.val_end, n);
        if (cfg.noiseless_eval) {
            const std::size_t first = source.synth.first_instance;
            val_rows = data::synth::generate(val_rows.rows, 0.0, 0, first + out.train_end);
            test_rows = data::synth::generate(test_rows.rows, 0.0, 0, first + out.val_end);
        }
        out.dataset.norm = norm ? *norm : data::NormStats::fit(Matrix(train_rows.data.size(), 1, train_rows.data));
        out.dataset.train = instance_windows(train_rows, out.dataset.norm, L);
        out.dataset.val = instance_windows(val_rows, out.dataset.norm, L);
        out.dataset.test = instance_windows(test_rows, out.dataset.norm, L);
        if (cfg.stride > 1) {
            std::vector<data::WindowPair> kept;
            for (std::size_t i = 0; i < out.dataset.train.size(); i += cfg.stride) kept.push_back(out.dataset.train[i]);
            out.dataset.train = std::move(kept);
        }
        return out;
    }
    const auto splits = data::split_chronological(source.series, cfg.split, L + H);
    out.train_end = splits.train.length();
    out.val_end = out.train_end + splits.val.length();
    out.dataset.norm = norm ? *norm : data::NormStats::fit(splits.train.values);
    out.dataset.train = normalized_windows(splits.train, out.dataset.norm, L, H, cfg.stride);
    out.dataset.val = normalized_windows(splits.val, out.dataset.norm, L, H, cfg.eval_stride);
    out.dataset.test = normalized_windows(splits.test, out.dataset.norm, L, H, cfg.eval_stride);
    return out;
}

const std::vector<data::WindowPair>& split_windows(const trainer::Dataset& ds, const std::string& split) {
    if (split == "train") return ds.train;
    if (split == "val") return ds.val;
    if (split == "test") return ds.test;
    throw ConfigError("split must be train, val or test, got '" + split + "'");
}

RawWindow window_at(const Source& source, const model::ModelConfig& model, std::size_t at) {
    const std::size_t L = model.lookback;
    const std::size_t H = model.horizon;
    RawWindow w;
    if (source.synthetic) {
        const Matrix& rows = source.synth.instances;
        if (at >= rows.rows) {
            throw DataError("window index " + std::to_string(at) + " out of range: the file holds " +
                            std::to_string(rows.rows) + " instances");
        }
        const auto win = data::synth::to_windows(instance_rows(rows, at, at + 1), L);
        w.lookback = win[0].lookback;
        w.target = win[0].target;
        w.first_target_index = L + 1;  // generator time runs from 1
        return w;
    }
    const std::size_t T = source.series.length();
    if (at + L > T) {
        throw DataError("window index " + std::to_string(at) + " out of range: a lookback of " + std::to_string(L) +
                        " needs at <= " + std::to_string(T >= L ? T - L : 0) + " for a series of length " +
                        std::to_string(T));
    }
    w.lookback = source.series.slice(at, at + L).values;
    if (at + L + H <= T) w.target = source.series.slice(at + L, at + L + H).values;
    w.first_target_index = at + L;
    return w;
}

}  // namespace etsf::pipeline
