// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Usage: acceptance [criterion ...]   (default: all)

#include "etsf/classical.hpp"
#include "etsf/config.hpp"
#include "etsf/data.hpp"
#include "etsf/esa.hpp"
#include "etsf/freq.hpp"
#include "etsf/model.hpp"
#include "etsf/pipeline.hpp"
#include "etsf/trainer.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <optional>
#include <set>
#include <sstream>
#include <string>

using namespace etsf;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (double& v : m.data) v = n(rng);
    return m;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// A_t = alpha V_t + (1 - alpha) A_{t-1}, A_0 = v0.
Matrix esa_recurrence(const Matrix& V, double alpha, std::span<const double> v0) {
    Matrix out(V.rows, V.cols);
    std::vector<double> prev(v0.begin(), v0.end());
    for (std::size_t t = 0; t < V.rows; ++t)
        for (std::size_t c = 0; c < V.cols; ++c) out(t, c) = prev[c] = alpha * V(t, c) + (1.0 - alpha) * prev[c];
    return out;
}

Verdict esa_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0, worst_recurrence = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double alpha = uniform_real(rng, 0.01, 0.99);
        const std::size_t L = uniform_int(rng, 1, 512);
        const std::size_t d = uniform_int(rng, 1, 16);
        const Matrix V = random_matrix(L, d, rng);
        const auto v0 = random_vector(d, rng);
        const Matrix fast = esa::esa_fast(V, alpha, v0);
        worst = std::max(worst, max_abs_diff(fast, esa::esa_naive(V, alpha, v0)));
        worst_recurrence = std::max(worst_recurrence, max_abs_diff(fast, esa_recurrence(V, alpha, v0)));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-9 && worst_recurrence < 1e-9 && secs < 30.0,
            "fast vs naive max diff " + fmt(worst) + ", vs recurrence " + fmt(worst_recurrence) + ", " + fmt(secs) +
                " s"};
}

Verdict attention_invariants() {
    Rng rng(102);
    double worst_sum = 0.0;
    bool recency = true, shifted = true, causal = true;
    for (int i = 0; i < 50; ++i) {
        const double alpha = uniform_real(rng, 0.01, 0.99);
        const std::size_t L = uniform_int(rng, 1, 128);
        const auto A = esa::build_attention_matrix(alpha, L);
        for (std::size_t t = 0; t < L; ++t) {
            double sum = 0.0;
            for (std::size_t j = 0; j <= L; ++j) sum += A(t, j);
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            // Column j >= 1 holds time step j; row t is time step t + 1.
            for (std::size_t j = 2; j <= t + 1; ++j) recency = recency && A(t, j) > A(t, j - 1);
            for (std::size_t j = t + 2; j <= L; ++j) causal = causal && A(t, j) == 0.0;
            if (t > 0) {
                for (std::size_t j = 2; j <= t + 1; ++j) shifted = shifted && A(t, j) == A(t - 1, j - 1);
                shifted = shifted && std::abs(A(t, 0) - (1.0 - alpha) * A(t - 1, 0)) < 1e-15;
            }
        }
    }
    return {worst_sum < 1e-12 && recency && shifted && causal,
            "row-sum error " + fmt(worst_sum) + ", recency " + (recency ? "ok" : "violated") + ", shift " +
                (shifted ? "ok" : "violated") + ", causal " + (causal ? "ok" : "violated")};
}

Verdict level_smoothing_equivalence() {
    Rng rng(103);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t L = uniform_int(rng, 1, 256);
        const std::size_t m = uniform_int(rng, 1, 8);
        const Matrix prev = random_matrix(L, m, rng), S = random_matrix(L, m, rng), B = random_matrix(L, m, rng);
        std::vector<double> alpha(m), init = random_vector(m, rng);
        for (double& a : alpha) a = uniform_real(rng, 0.01, 0.99);
        const Matrix fast = esa::level_smoothing(prev, S, B, alpha, init);
        for (std::size_t c = 0; c < m; ++c) {
            double e = init[c], b = 0.0;
            for (std::size_t t = 0; t < L; ++t) {
                e = alpha[c] * (prev(t, c) - S(t, c)) + (1.0 - alpha[c]) * (e + b);
                b = B(t, c);
                worst = std::max(worst, std::abs(fast(t, c) - e));
            }
        }
    }
    return {worst < 1e-9, "max diff " + fmt(worst)};
}

Verdict fa_correctness() {
    Rng rng(104);
    // (a) constant input
    double a_err = 0.0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t L = uniform_int(rng, 4, 100), d = uniform_int(rng, 1, 6);
        Matrix X(L, d);
        const auto level = random_vector(d, rng);
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < d; ++c) X(t, c) = level[c];
        const Matrix S = freq::fa_extrapolate(X, 2, {0, static_cast<long long>(L + 30)});
        for (double v : S.data) a_err = std::max(a_err, std::abs(v));
    }
    // (b) single tone, K = 1
    double b_err = 0.0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t L = uniform_int(rng, 8, 200);
        const std::size_t k = uniform_int(rng, 1, (L - 1) / 2);
        const double amp = uniform_real(rng, 0.1, 3.0), phase = uniform_real(rng, -3.0, 3.0);
        const std::size_t H = uniform_int(rng, 1, 100);
        auto tone = [&](double t) { return amp * std::cos(2.0 * std::numbers::pi * k * t / L + phase); };
        Matrix X(L, 1);
        for (std::size_t t = 0; t < L; ++t) X(t, 0) = tone(t);
        const Matrix S = freq::fa_extrapolate(X, 1, {0, static_cast<long long>(L + H)});
        for (std::size_t t = 0; t < L + H; ++t) b_err = std::max(b_err, std::abs(S(t, 0) - tone(t)));
    }
    // (c) odd L, every non-DC bin
    double c_err = 0.0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t L = 2 * uniform_int(rng, 1, 60) + 1, d = uniform_int(rng, 1, 4);
        const Matrix X = random_matrix(L, d, rng);
        const Matrix S = freq::fa_extrapolate(X, L / 2, freq::IndexRange::lookback(L));
        for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0;
            for (std::size_t t = 0; t < L; ++t) mean += X(t, c);
            mean /= static_cast<double>(L);
            for (std::size_t t = 0; t < L; ++t) c_err = std::max(c_err, std::abs(S(t, c) - (X(t, c) - mean)));
        }
    }
    // (d) DFT against the direct sum
    double d_err = 0.0;
    for (std::size_t L = 1; L <= 64; ++L) {
        const auto x = random_vector(L, rng);
        const auto X = freq::dft_real(x);
        for (std::size_t k = 0; k <= L / 2; ++k) {
            std::complex<double> direct = 0.0;
            for (std::size_t n = 0; n < L; ++n)
                direct += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n % L) / double(L));
            d_err = std::max(d_err, std::abs(direct - X[k]));
        }
    }
    return {a_err < 1e-9 && b_err < 1e-9 && c_err < 1e-9 && d_err < 1e-10,
            "(a) " + fmt(a_err) + " (b) " + fmt(b_err) + " (c) " + fmt(c_err) + " (d) " + fmt(d_err)};
}

Verdict gradient_integrity() {
    model::ModelConfig c;
    c.lookback = 16;
    c.horizon = 4;
    c.channels = 2;
    c.d_model = 8;
    c.d_ff = 16;
    c.layers = 1;
    c.heads = 2;
    c.top_k = 2;
    c.dropout = 0.0;
    Rng rng(105);
    model::ModelState s = model::ModelState::initialize(c, rng);
    std::normal_distribution<double> n(0.0, 0.5);
    for (auto& [name, t] : s.params())
        if (model::is_smoothing_parameter(name) || name.ends_with("z0") || name.ends_with("v0"))
            for (double& v : t.mutable_data()) v = n(rng);
    const Tensor x = Tensor::from({16, 2}, random_vector(32, rng));
    const Tensor y = Tensor::from({4, 2}, random_vector(8, rng));
    auto f = [&] { return ops::mse_loss(model::forward(x, s, c).total, y); };
    std::vector<Tensor> main, special;
    for (auto& [name, t] : s.params()) (model::is_smoothing_parameter(name) ? special : main).push_back(t);
    const double e_main = grad_check(f, main);
    const double e_special = grad_check(f, special);
    return {e_main < 1e-4 && e_special < 1e-4, std::to_string(main.size() + special.size()) +
                                                    " parameters, max rel err main " + fmt(e_main) +
                                                    ", smoothing/damping " + fmt(e_special)};
}

std::string cli_output(const std::string& args, int& code) {
    const std::string cmd = std::string(ETSF_CLI) + " " + args;
    std::string out;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        code = -1;
        return out;
    }
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = ::pclose(pipe);
    code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

Verdict complexity_scaling() {
    int code = 0;
    const std::string out = cli_output("bench-esa --lengths 1024,4096 --d 16 --repeats 5 --seed 1", code);
    if (code != 0) return {false, "bench-esa exited with " + std::to_string(code)};
    const auto j = nlohmann::json::parse(out);
    const double naive = j.at(1).at("naive_ms").get<double>() / j.at(0).at("naive_ms").get<double>();
    const double fast = j.at(1).at("fast_ms").get<double>() / j.at(0).at("fast_ms").get<double>();
    return {fast < 6.0 && naive >= 12.0, "fast ratio " + fmt(fast) + " (< 6), naive ratio " + fmt(naive) + " (>= 12)"};
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

double read_reference(const std::string& path) {
    std::ifstream in(path);
    double v = std::nan("");
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream(line) >> v;
        break;
    }
    return v;
}

// Shared by the end-to-end and persistence criteria.
struct SyntheticRun {
    config::RunConfig cfg;
    pipeline::Prepared prepared;
    std::size_t test_first_instance = 0;
    trainer::TrainResult result;
    double seconds = 0.0;
};

SyntheticRun& synthetic_run() {
    static std::optional<SyntheticRun> run;
    if (run) return *run;
    run.emplace();
    const auto t0 = Clock::now();
    const char* override_path = std::getenv("ETSF_ACCEPTANCE_CONFIG");
    run->cfg = config::load_run_config(override_path ? override_path : ETSF_SOURCE_DIR "/configs/synthetic.json");
    pipeline::Source source;
    source.synthetic = true;
    source.synth.instances = data::synth::generate(2000, 0.05, 2024);
    source.synth.noise = 0.05;
    source.synth.seed = 2024;
    pipeline::bind_model(run->cfg.model, source);
    run->prepared = pipeline::prepare(source, run->cfg.model, run->cfg.data);
    run->test_first_instance = run->prepared.val_end;
    std::cerr << "synthetic: " << run->prepared.dataset.train.size() << " train / "
              << run->prepared.dataset.val.size() << " val / " << run->prepared.dataset.test.size()
              << " test windows\n";
    run->result = trainer::train(run->cfg.model, run->cfg.train, run->prepared.dataset, [](const trainer::EpochLog& e) {
        std::cerr << "  epoch " << e.epoch << " train " << e.train_mse << " val " << e.val_mse << "\n";
    });
    run->seconds = seconds_since(t0);
    return *run;
}

Verdict synthetic_end_to_end() {
    SyntheticRun& run = synthetic_run();
    const auto& ckpt = run.result.checkpoint;
    const auto& test = run.prepared.dataset.test;
    const auto ev = trainer::evaluate(ckpt, test);
    std::cerr << std::setprecision(17) << "  test mse " << ev.normalized.mse << "\n";
    double corr_sum = 0.0;
    std::vector<double> pooled_pred, pooled_truth;
    for (const auto& w : test) {
        const auto fc = model::forecast(w.lookback, ckpt.state, ckpt.model);
        std::vector<double> truth(fc.seasonal.rows);
        const double i = static_cast<double>(run.test_first_instance + w.origin);
        for (std::size_t h = 0; h < truth.size(); ++h) {
            truth[h] = data::synth::season(static_cast<double>(ckpt.model.lookback + 1 + h) + i);
        }
        corr_sum += pearson(fc.seasonal.data, truth);
        pooled_pred.insert(pooled_pred.end(), fc.seasonal.data.begin(), fc.seasonal.data.end());
        pooled_truth.insert(pooled_truth.end(), truth.begin(), truth.end());
    }
    const double corr = corr_sum / static_cast<double>(test.size());
    const double pooled = pearson(pooled_pred, pooled_truth);
    const double reference = read_reference(ETSF_SOURCE_DIR "/tests/acceptance/reference_mse.txt");
    const bool mse_ok = std::isfinite(reference) && ev.normalized.mse < 2.0 * reference;
    return {mse_ok && corr >= 0.8 && run.seconds < 900.0,
            "test mse " + fmt(ev.normalized.mse) + " (reference " + fmt(reference) + ", bound " +
                fmt(2.0 * reference) + "), mae " + fmt(ev.normalized.mae) + ", seasonal corr " + fmt(corr) +
                " (pooled " + fmt(pooled) + "), best epoch " + std::to_string(ckpt.epoch) + ", " +
                fmt(run.seconds) + " s"};
}

Verdict classical_oracle() {
    classical::HwState st;
    st.period = 1;
    st.level = {0.0};
    st.growth = {1.0};
    st.season = {0.0};
    const auto damped = classical::hw_forecast(st, classical::HwParams{0.5, 0.5, 0.5, 0.5, 1}, 60);
    const double asym_err = std::abs(damped[59] - 0.5 * 1.0 / (1.0 - 0.5));

    Rng rng(108);
    bool vanilla = true;
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = uniform_int(rng, 1, 12);
        const auto x = random_vector(p * 5, rng);
        const classical::HwParams hp{uniform_real(rng, 0.05, 1), uniform_real(rng, 0.05, 1), uniform_real(rng, 0.05, 1),
                                     1.0, p};
        const auto s = classical::hw_smooth(x, hp);
        const auto f = classical::hw_forecast(s, hp, 3 * p);
        const double e = s.level.back(), b = s.growth.back();
        for (std::size_t h = 1; h <= 3 * p; ++h) {
            const double expect = e + static_cast<double>(h) * b + s.season[s.season.size() - p + (h - 1) % p];
            vanilla = vanilla && f[h - 1] == expect;
        }
    }
    return {asym_err < 1e-9 && vanilla,
            "asymptote error at h=60 " + fmt(asym_err) + ", phi=1 vanilla " + (vanilla ? "exact" : "mismatch")};
}

Verdict determinism_and_persistence() {
    // Same-seed training with dropout and augmentation active.
    config::RunConfig small;
    small.model.lookback = 192;
    small.model.horizon = 48;
    small.model.d_model = 8;
    small.model.d_ff = 16;
    small.model.heads = 2;
    small.model.dropout = 0.2;
    small.train.epochs = 2;
    small.train.warmup_epochs = 1;
    small.train.seed = 11;
    small.train.augment.enabled = true;
    small.data.noiseless_eval = true;
    pipeline::Source source;
    source.synthetic = true;
    source.synth.instances = data::synth::generate(120, 0.05, 9);
    pipeline::bind_model(small.model, source);
    const auto prep = pipeline::prepare(source, small.model, small.data);
    const auto a = trainer::train(small.model, small.train, prep.dataset);
    const auto b = trainer::train(small.model, small.train, prep.dataset);
    bool same = a.log.size() == b.log.size();
    for (std::size_t i = 0; same && i < a.log.size(); ++i)
        same = a.log[i].train_mse == b.log[i].train_mse && a.log[i].val_mse == b.log[i].val_mse;
    for (const auto& [name, t] : a.checkpoint.state.params())
        same = same && t.to_vector() == b.checkpoint.state.at(name).to_vector();

    // Save / load / evaluate on the end-to-end model.
    SyntheticRun& run = synthetic_run();
    const auto path = std::filesystem::temp_directory_path() / "etsf_acceptance.ckpt";
    trainer::save_checkpoint(run.result.checkpoint, path.string());
    const auto loaded = trainer::load_checkpoint(path.string());
    std::filesystem::remove(path);
    const auto& test = run.prepared.dataset.test;
    const auto e1 = trainer::evaluate(run.result.checkpoint, test);
    const auto e2 = trainer::evaluate(loaded, test);
    const bool persisted = e1.normalized.mse == e2.normalized.mse && e1.normalized.mae == e2.normalized.mae &&
                           e1.original.mse == e2.original.mse && e1.original.mae == e2.original.mae;
    return {same && persisted, std::string("same-seed runs ") + (same ? "bit-identical" : "differ") +
                                   ", reloaded checkpoint metrics " + (persisted ? "bit-identical" : "differ")};
}

Verdict schedule_contract() {
    trainer::TrainConfig cfg;  // 15 epochs, 3 warmup
    bool ok = true;
    std::string detail;
    for (std::size_t per_epoch : {1u, 7u, 44u}) {
        const std::size_t total = cfg.epochs * per_epoch;
        const std::size_t warm = trainer::warmup_steps_for(total, cfg);
        const auto at_warm = trainer::lr_at(warm - 1, total, cfg);
        const auto at_end = trainer::lr_at(total - 1, total, cfg);
        bool special = true;
        for (std::size_t s = 0; s < total; ++s) special = special && trainer::lr_at(s, total, cfg).special == 100.0 * cfg.base_lr;
        ok = ok && at_warm.main == cfg.base_lr && at_end.main == 1e-30 && special;
        if (per_epoch == 44u) {
            detail = "warmup end " + fmt(at_warm.main) + ", final " + fmt(at_end.main) + ", special " +
                     fmt(at_end.special) + (special ? " constant" : " varies");
        }
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"esa fast path equals naive attention", esa_equivalence},
        {"attention matrix invariants", attention_invariants},
        {"level smoothing fast path equals recurrence", level_smoothing_equivalence},
        {"frequency attention correctness", fa_correctness},
        {"full-model gradient check", gradient_integrity},
        {"esa complexity scaling", complexity_scaling},
        {"synthetic end-to-end", synthetic_end_to_end},
        {"holt-winters damped forecast", classical_oracle},
        {"determinism and checkpoint persistence", determinism_and_persistence},
        {"learning-rate schedule contract", schedule_contract},
    };
    std::set<std::size_t> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::strtoul(argv[i], nullptr, 10));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!wanted.empty() && !wanted.count(i + 1)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << v.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
