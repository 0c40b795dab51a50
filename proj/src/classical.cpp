#include "etsf/classical.hpp"

#include "etsf/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace etsf::classical {

namespace {

void check_unit(double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) {
        throw ConfigError(std::string("holt-winters: ") + name + " = " + std::to_string(v) + " outside (0, 1]");
    }
}

}  // namespace

void HwParams::validate() const {
    // The smoothing parameters may reach 1 (full update); 0 freezes a component.
    check_unit(alpha, "alpha");
    check_unit(beta, "beta");
    check_unit(gamma, "gamma");
    check_unit(phi, "phi");
    if (period == 0) throw ConfigError("holt-winters: period must be at least 1");
}

HwState hw_initial_state(std::span<const double> x, std::size_t period) {
    if (period == 0) throw ConfigError("holt-winters: period must be at least 1");
    if (x.size() < period) {
        throw DataError("holt-winters: initialization needs " + std::to_string(period) + " points, got " +
                        std::to_string(x.size()));
    }
    HwState s;
    s.period = period;
    double e0 = 0.0;
    for (std::size_t j = 0; j < period; ++j) e0 += x[j];
    e0 /= static_cast<double>(period);
    s.level = {e0};
    s.growth = {0.0};
    s.season.resize(period);
    for (std::size_t j = 0; j < period; ++j) s.season[j] = x[j] - e0;
    return s;
}

HwState hw_smooth(std::span<const double> x, const HwParams& params, const HwState& init) {
    params.validate();
    const std::size_t p = params.period;
    const std::size_t T = x.size();
    if (T <= p) {
        throw DataError("holt-winters: series of length " + std::to_string(T) + " must be longer than the period " +
                        std::to_string(p));
    }
    if (init.level.empty() || init.growth.empty() || init.season.size() < p) {
        throw DataError("holt-winters: seed state needs a level, a growth and " + std::to_string(p) +
                        " seasonal values");
    }
    HwState out;
    out.period = p;
    out.level.resize(T);
    out.growth.resize(T);
    out.season.assign(init.season.end() - static_cast<std::ptrdiff_t>(p), init.season.end());
    out.season.resize(p + T);

    double e_prev = init.last_level();
    double b_prev = init.last_growth();
    const double a = params.alpha;
    const double b = params.beta;
    const double g = params.gamma;
    for (std::size_t t = 0; t < T; ++t) {
        const double s_back = out.season[t];  // s_{t-p}
        const double e = a * (x[t] - s_back) + (1.0 - a) * (e_prev + b_prev);
        const double gr = b * (e - e_prev) + (1.0 - b) * b_prev;
        out.season[t + p] = g * (x[t] - e) + (1.0 - g) * s_back;
        out.level[t] = e;
        out.growth[t] = gr;
        e_prev = e;
        b_prev = gr;
    }
    return out;
}

HwState hw_smooth(std::span<const double> x, const HwParams& params) {
    return hw_smooth(x, params, hw_initial_state(x, params.period));
}

double damped_sum(double phi, std::size_t h) {
    double sum = 0.0;
    double term = 1.0;
    for (std::size_t i = 0; i < h; ++i) {
        term *= phi;
        sum += term;
    }
    return sum;
}

std::vector<double> hw_forecast(const HwState& state, const HwParams& params, std::size_t steps) {
    const std::size_t p = params.period;
    if (state.level.empty() || state.growth.empty() || state.season.size() < p || p == 0) {
        throw DataError("holt-winters: forecast needs a smoothed state with at least one full period");
    }
    const double e = state.last_level();
    const double b = state.last_growth();
    const std::size_t base = state.season.size() - p;  // s_{t-p+1} .. s_t
    std::vector<double> out(steps);
    double damp = 0.0;
    double term = 1.0;
    for (std::size_t h = 1; h <= steps; ++h) {
        term *= params.phi;
        damp += term;
        out[h - 1] = e + damp * b + state.season[base + (h - 1) % p];
    }
    return out;
}

HwGrid HwGrid::uniform(std::size_t resolution) {
    if (resolution == 0) throw ConfigError("holt-winters grid: resolution must be positive");
    HwGrid g;
    const double r = static_cast<double>(resolution);
    for (std::size_t i = 0; i < resolution; ++i) {
        const double v = static_cast<double>(i + 1) / (r + 1.0);
        g.alpha.push_back(v);
        g.beta.push_back(v);
        g.gamma.push_back(v);
        g.phi.push_back(static_cast<double>(i + 1) / r);
    }
    return g;
}

HwFit hw_fit_grid(std::span<const double> x, std::size_t period, const HwGrid& grid, std::size_t holdout) {
    if (grid.alpha.empty() || grid.beta.empty() || grid.gamma.empty() || grid.phi.empty()) {
        throw ConfigError("holt-winters grid: every parameter needs at least one candidate");
    }
    if (holdout == 0 || holdout >= x.size()) {
        throw DataError("holt-winters fit: holdout of " + std::to_string(holdout) + " for a series of length " +
                        std::to_string(x.size()));
    }
    const auto fit_part = x.first(x.size() - holdout);
    const auto target = x.last(holdout);
    if (fit_part.size() <= period) {
        throw DataError("holt-winters fit: " + std::to_string(fit_part.size()) +
                        " fitting points do not exceed the period " + std::to_string(period) + "; need at least " +
                        std::to_string(period + 1 + holdout) + " points");
    }
    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto alphas = sorted(grid.alpha);
    const auto betas = sorted(grid.beta);
    const auto gammas = sorted(grid.gamma);
    const auto phis = sorted(grid.phi);

    const HwState seed = hw_initial_state(fit_part, period);
    HwFit best;
    best.validation_mse = std::numeric_limits<double>::infinity();
    for (double a : alphas) {
        for (double b : betas) {
            for (double g : gammas) {
                const HwParams base{a, b, g, 1.0, period};
                const HwState state = hw_smooth(fit_part, base, seed);
                for (double phi : phis) {
                    HwParams cand = base;
                    cand.phi = phi;
                    cand.validate();
                    const auto pred = hw_forecast(state, cand, holdout);
                    double mse = 0.0;
                    for (std::size_t i = 0; i < holdout; ++i) mse += (pred[i] - target[i]) * (pred[i] - target[i]);
                    mse /= static_cast<double>(holdout);
                    ++best.candidates;
                    if (mse < best.validation_mse) {
                        best.validation_mse = mse;
                        best.params = cand;
                    }
                }
            }
        }
    }
    if (!std::isfinite(best.validation_mse)) throw NumericError("holt-winters fit: no candidate gave a finite error");
    best.degenerate = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    return best;
}

}  // namespace etsf::classical
