// Command-line front end: synth, train, evaluate, forecast, decompose,
// baseline and bench-esa. Machine-readable output goes to stdout,
// diagnostics to stderr.
#include "etsf/classical.hpp"
#include "etsf/config.hpp"
#include "etsf/error.hpp"
#include "etsf/esa.hpp"
#include "etsf/pipeline.hpp"
#include "etsf/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

namespace {

using etsf::Matrix;
using Json = nlohmann::json;
namespace data = etsf::data;
namespace model = etsf::model;
namespace trainer = etsf::trainer;
namespace pipeline = etsf::pipeline;
namespace config = etsf::config;

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void require_readable(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw etsf::IoError("cannot read '" + path + "'");
}

void require_writable(const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw etsf::IoError("cannot write '" + path + "'");
}

std::uint64_t seed_override(std::uint64_t seed) {
    if (const char* env = std::getenv("ETSFORE_SEED"); env != nullptr && *env != '\0') {
        std::uint64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto res = std::from_chars(env, end, v);
        if (res.ec != std::errc() || res.ptr != end) {
            throw etsf::ConfigError(std::string("ETSFORE_SEED is not an unsigned integer: '") + env + "'");
        }
        return v;
    }
    return seed;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t n = 2000;
    double noise = 0.05;
    std::uint64_t seed = 0;
    std::size_t first = 0;
};

int run_synth(const SynthArgs& a) {
    data::synth::SynthFile f;
    f.noise = a.noise;
    f.seed = a.seed;
    f.first_instance = a.first;
    f.instances = data::synth::generate(a.n, a.noise, a.seed, a.first);
    require_writable(a.out);
    data::synth::write_csv(f, a.out);
    double lo = 0.0, hi = 0.0, mean = 0.0;
    if (!f.instances.data.empty()) {
        const auto [mn, mx] = std::minmax_element(f.instances.data.begin(), f.instances.data.end());
        lo = *mn;
        hi = *mx;
        for (double v : f.instances.data) mean += v;
        mean /= static_cast<double>(f.instances.data.size());
    }
    std::cout << Json{{"instances", a.n},          {"lookback", f.lookback}, {"horizon", f.horizon},
                      {"noise", a.noise},          {"seed", a.seed},         {"min", lo},
                      {"max", hi},                 {"mean", mean},           {"out", a.out}}
                     .dump()
              << '\n';
    return 0;
}

// ---- train / evaluate -----------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
};

int run_train(const TrainArgs& a) {
    require_readable(a.config);
    require_readable(a.data);
    config::RunConfig run = config::load_run_config(a.config);
    run.train.seed = seed_override(run.train.seed);
    const pipeline::Source source = pipeline::load_source(a.data);
    pipeline::bind_model(run.model, source);
    const pipeline::Prepared prepared = pipeline::prepare(source, run.model, run.data);
    if (prepared.dataset.train.empty()) throw etsf::DataError("training split yields no windows");
    require_writable(a.out);
    std::cerr << "training on " << prepared.dataset.train.size() << " windows, validating on "
              << prepared.dataset.val.size() << '\n';

    const auto result = trainer::train(run.model, run.train, prepared.dataset, [](const trainer::EpochLog& e) {
        std::cout << Json{{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}, {"lr", e.lr}}.dump()
                  << std::endl;
    });
    trainer::Checkpoint ckpt = result.checkpoint;
    ckpt.meta = Json{{"data", config::to_json(run.data)}}.dump();
    trainer::save_checkpoint(ckpt, a.out);
    std::cerr << "saved checkpoint from epoch " << ckpt.epoch << " to " << a.out << '\n';
    return 0;
}

config::DataConfig data_config_of(const trainer::Checkpoint& ckpt) {
    const Json meta = Json::parse(ckpt.meta.empty() ? "{}" : ckpt.meta);
    if (!meta.contains("data")) return {};
    return config::data_from_json(meta.at("data"));
}

struct LoadedRun {
    trainer::Checkpoint ckpt;
    pipeline::Source source;
};

LoadedRun load_run(const std::string& model_path, const std::string& data_path) {
    require_readable(model_path);
    require_readable(data_path);
    LoadedRun r{trainer::load_checkpoint(model_path), pipeline::load_source(data_path)};
    model::ModelConfig bound = r.ckpt.model;
    pipeline::bind_model(bound, r.source);
    if (bound.channels != r.ckpt.model.channels) {
        throw etsf::ConfigError("checkpoint expects " + std::to_string(r.ckpt.model.channels) +
                                " channels, data has " + std::to_string(r.source.channels()));
    }
    return r;
}

struct EvalArgs {
    std::string model;
    std::string data;
    std::string split = "test";
};

int run_evaluate(const EvalArgs& a) {
    const LoadedRun r = load_run(a.model, a.data);
    const auto prepared = pipeline::prepare(r.source, r.ckpt.model, data_config_of(r.ckpt), &r.ckpt.norm);
    const auto& windows = pipeline::split_windows(prepared.dataset, a.split);
    const auto res = trainer::evaluate(r.ckpt, windows);
    std::cout << Json{{"split", a.split},
                      {"mse", res.normalized.mse},
                      {"mae", res.normalized.mae},
                      {"mse_original", res.original.mse},
                      {"mae_original", res.original.mae},
                      {"windows", res.windows}}
                     .dump()
              << '\n';
    return 0;
}

// ---- forecast / decompose -------------------------------------------------

struct ForecastArgs {
    std::string model;
    std::string data;
    std::size_t at = 0;
    std::string format = "json";
};

int run_forecast(const ForecastArgs& a, bool stacks) {
    const LoadedRun r = load_run(a.model, a.data);
    const model::ModelConfig& cfg = r.ckpt.model;
    const auto raw = pipeline::window_at(r.source, cfg, a.at);
    const auto& norm = r.ckpt.norm;
    const auto dec = model::decompose(norm.apply(raw.lookback), r.ckpt.state, cfg);

    // Level and total carry the mean; additive components only the scale.
    auto scaled = [&](const Matrix& m) {
        Matrix out = m;
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t c = 0; c < out.cols; ++c) out(i, c) *= norm.std[c];
        return out;
    };
    const Matrix level = norm.invert(dec.forecast.level);
    const Matrix growth = scaled(dec.forecast.growth);
    const Matrix seasonal = scaled(dec.forecast.seasonal);
    const Matrix total = norm.invert(dec.forecast.total);
    std::vector<Matrix> g_stacks;
    std::vector<Matrix> s_stacks;
    if (stacks) {
        for (const auto& m : dec.growth_stacks) g_stacks.push_back(scaled(m));
        for (const auto& m : dec.seasonal_stacks) s_stacks.push_back(scaled(m));
    }

    std::vector<std::string> columns{"t", "channel", "level", "growth", "seasonal", "total"};
    for (std::size_t n = 0; n < g_stacks.size(); ++n) columns.push_back("growth_" + std::to_string(n + 1));
    for (std::size_t n = 0; n < s_stacks.size(); ++n) columns.push_back("seasonal_" + std::to_string(n + 1));
    if (raw.target) columns.push_back("target");

    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t h = 0; h < cfg.horizon; ++h) {
            std::vector<double> row{static_cast<double>(raw.first_target_index + h), static_cast<double>(c),
                                    level(h, c),  growth(h, c), seasonal(h, c), total(h, c)};
            for (const auto& m : g_stacks) row.push_back(m(h, c));
            for (const auto& m : s_stacks) row.push_back(m(h, c));
            if (raw.target) row.push_back((*raw.target)(h, c));
            rows.push_back(std::move(row));
        }
    }

    if (a.format == "csv") {
        for (std::size_t i = 0; i < columns.size(); ++i) std::cout << (i ? "," : "") << columns[i];
        std::cout << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << num(row[i]);
            std::cout << '\n';
        }
        return 0;
    }
    Json out_rows = Json::array();
    for (const auto& row : rows) {
        Json o = Json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i < 2) o[columns[i]] = static_cast<std::size_t>(row[i]);
            else o[columns[i]] = row[i];
        }
        out_rows.push_back(std::move(o));
    }
    std::cout << Json{{"at", a.at}, {"horizon", cfg.horizon}, {"channels", cfg.channels}, {"rows", out_rows}}.dump()
              << '\n';
    return 0;
}

// ---- baseline -------------------------------------------------------------

struct BaselineArgs {
    std::string data;
    std::size_t period = 1;
    std::size_t grid = 5;
    std::size_t horizon = 0;  // 0: one fifth of the series
};

struct BaselineScore {
    etsf::classical::HwFit fit;
    data::Metrics metrics;
};

// Grid-fits on `history` (validation = its last h points), smooths all of
// it with the winner and forecasts h steps against `future`.
BaselineScore score_hw(std::span<const double> history, std::span<const double> future, std::size_t period,
                       const etsf::classical::HwGrid& grid) {
    namespace hw = etsf::classical;
    BaselineScore s;
    s.fit = hw::hw_fit_grid(history, period, grid, future.size());
    const auto state = hw::hw_smooth(history, s.fit.params);
    const auto pred = hw::hw_forecast(state, s.fit.params, future.size());
    s.metrics = data::metrics(Matrix(pred.size(), 1, pred),
                              Matrix(future.size(), 1, std::vector<double>(future.begin(), future.end())));
    return s;
}

Json params_json(const etsf::classical::HwFit& f) {
    return Json{{"alpha", f.params.alpha}, {"beta", f.params.beta},         {"gamma", f.params.gamma},
                {"phi", f.params.phi},     {"validation_mse", f.validation_mse}, {"degenerate", f.degenerate}};
}

int run_baseline(const BaselineArgs& a) {
    require_readable(a.data);
    if (a.grid == 0) throw etsf::ConfigError("--grid must be at least 1");
    const auto grid = etsf::classical::HwGrid::uniform(a.grid);
    const auto source = pipeline::load_source(a.data);
    Json channels = Json::array();
    double mse = 0.0, mae = 0.0;
    std::size_t count = 0;
    if (source.synthetic) {
        const auto& rows = source.synth.instances;
        const std::size_t L = source.synth.lookback;
        for (std::size_t r = 0; r < rows.rows; ++r) {
            const auto row = rows.row(r);
            const auto s = score_hw(row.first(L), row.subspan(L), a.period, grid);
            mse += s.metrics.mse;
            mae += s.metrics.mae;
            ++count;
        }
    } else {
        const auto& series = source.series;
        const std::size_t T = series.length();
        const std::size_t h = a.horizon > 0 ? a.horizon : std::max<std::size_t>(1, T / 5);
        if (h >= T) throw etsf::DataError("baseline horizon " + std::to_string(h) + " leaves no history");
        for (std::size_t c = 0; c < series.channels(); ++c) {
            const auto col = series.values.col(c);
            const std::span<const double> all(col);
            const auto s = score_hw(all.first(T - h), all.subspan(T - h), a.period, grid);
            Json j = params_json(s.fit);
            j["name"] = c < series.names.size() ? series.names[c] : "x" + std::to_string(c);
            j["mse"] = s.metrics.mse;
            j["mae"] = s.metrics.mae;
            channels.push_back(std::move(j));
            mse += s.metrics.mse;
            mae += s.metrics.mae;
            ++count;
        }
    }
    Json out{{"period", a.period}, {"grid", a.grid}, {"mse", mse / static_cast<double>(count)},
             {"mae", mae / static_cast<double>(count)}, {"series", count}};
    if (!channels.empty()) out["channels"] = channels;
    std::cout << out.dump() << '\n';
    return 0;
}

// ---- bench-esa ------------------------------------------------------------

struct BenchArgs {
    std::vector<std::size_t> lengths{256, 1024, 4096};
    std::size_t d = 16;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
    if (a.lengths.empty()) throw etsf::ConfigError("--lengths needs at least one value");
    for (std::size_t i = 0; i < a.lengths.size(); ++i) {
        if (a.lengths[i] == 0 || (i > 0 && a.lengths[i] <= a.lengths[i - 1])) {
            throw etsf::ConfigError("--lengths must be positive and strictly ascending");
        }
    }
    if (a.d == 0 || a.repeats == 0) throw etsf::ConfigError("--d and --repeats must be positive");
    etsf::Rng rng(a.seed);
    std::normal_distribution<double> normal;
    Json out = Json::array();
    for (std::size_t L : a.lengths) {
        Matrix V(L, a.d);
        for (double& v : V.data) v = normal(rng);
        const std::vector<double> v0(a.d, 0.1);
        const double alpha = 0.3;
        auto time_ms = [&](auto&& fn) {
            fn();  // warm-up (plans, caches)
            double total = 0.0;
            for (std::size_t r = 0; r < a.repeats; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                fn();
                const auto t1 = std::chrono::steady_clock::now();
                total += std::chrono::duration<double, std::milli>(t1 - t0).count();
            }
            return total / static_cast<double>(a.repeats);
        };
        double sink = 0.0;
        const double naive = time_ms([&] { sink += etsf::esa::esa_naive(V, alpha, v0).data.back(); });
        const double fast = time_ms([&] { sink += etsf::esa::esa_fast(V, alpha, v0).data.back(); });
        if (!std::isfinite(sink)) throw etsf::NumericError("benchmark produced non-finite output");
        out.push_back(Json{{"L", L}, {"naive_ms", naive}, {"fast_ms", fast}});
    }
    std::cout << out.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exponential smoothing transformer toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "write synthetic trend + seasonality instances as CSV");
    c_synth->add_option("--out", synth.out, "output CSV path")->required();
    c_synth->add_option("--n", synth.n, "number of instances");
    c_synth->add_option("--noise", synth.noise, "noise standard deviation")->check(CLI::NonNegativeNumber);
    c_synth->add_option("--seed", synth.seed, "noise seed");
    c_synth->add_option("--first", synth.first, "index of the first instance");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "train a model and write a checkpoint");
    c_train->add_option("--config", tr.config, "JSON run configuration")->required();
    c_train->add_option("--data", tr.data, "CSV data file")->required();
    c_train->add_option("--out", tr.out, "checkpoint path")->required();

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "MSE / MAE of a checkpoint on one split");
    c_eval->add_option("--model", ev.model, "checkpoint path")->required();
    c_eval->add_option("--data", ev.data, "CSV data file")->required();
    c_eval->add_option("--split", ev.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

    ForecastArgs fc;
    auto* c_fc = app.add_subcommand("forecast", "forecast one window");
    ForecastArgs dc;
    auto* c_dc = app.add_subcommand("decompose", "forecast one window with per-stack components");
    for (auto [cmd, args] : {std::pair{c_fc, &fc}, std::pair{c_dc, &dc}}) {
        cmd->add_option("--model", args->model, "checkpoint path")->required();
        cmd->add_option("--data", args->data, "CSV data file")->required();
        cmd->add_option("--at", args->at, "window start row (series) or instance index")->required();
        cmd->add_option("--format", args->format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    }

    BaselineArgs bl;
    auto* c_bl = app.add_subcommand("baseline", "Holt-Winters grid-search baseline");
    c_bl->add_option("--data", bl.data, "CSV data file")->required();
    c_bl->add_option("--period", bl.period, "seasonal period")->check(CLI::PositiveNumber);
    c_bl->add_option("--grid", bl.grid, "grid resolution per parameter");
    c_bl->add_option("--horizon", bl.horizon, "held-out steps (series files)");

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench-esa", "time naive vs FFT exponential smoothing attention");
    c_bench->add_option("--lengths", bench.lengths, "ascending sequence lengths")->delimiter(',');
    c_bench->add_option("--d", bench.d, "columns");
    c_bench->add_option("--repeats", bench.repeats, "timed repetitions per length");
    c_bench->add_option("--seed", bench.seed, "input seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_train) return run_train(tr);
        if (*c_eval) return run_evaluate(ev);
        if (*c_fc) return run_forecast(fc, false);
        if (*c_dc) return run_forecast(dc, true);
        if (*c_bl) return run_baseline(bl);
        if (*c_bench) return run_bench(bench);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return etsf::exit_code(e);
    }
    return 1;
}
