#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Additive Holt-Winters smoothing with a damped-trend forecast.
namespace etsf::classical {

struct HwParams {
    double alpha = 0.5;
    double beta = 0.1;
    double gamma = 0.1;
    double phi = 1.0;  // trend damping, (0, 1]
    std::size_t period = 1;

    // Throws ConfigError when a field is outside its range.
    void validate() const;
    bool operator==(const HwParams&) const = default;
};

// level[t], growth[t] follow x[t]; season has p leading entries
// (the seeds s_{-p} .. s_{-1}) followed by one entry per step.
struct HwState {
    std::size_t period = 1;
    std::vector<double> level;
    std::vector<double> growth;
    std::vector<double> season;

    // Prior state before x[0] when level/growth are empty.
    double last_level() const { return level.back(); }
    double last_growth() const { return growth.back(); }
};

/// Seed: e = mean of x[0 .. p), b = 0, s_j = x_j - e.
HwState hw_initial_state(std::span<const double> x, std::size_t period);

/// Runs the level, growth and seasonal recurrences over every x[t] starting
/// from `init` (its last level/growth and last p seasonal values).
HwState hw_smooth(std::span<const double> x, const HwParams& params, const HwState& init);
/// hw_smooth from hw_initial_state.
HwState hw_smooth(std::span<const double> x, const HwParams& params);

/// xhat_{t+h} = e_t + (phi + ... + phi^h) b_t + s_{t+h-p}, h = 1 .. steps,
/// with the seasonal index wrapping over the last period.
std::vector<double> hw_forecast(const HwState& state, const HwParams& params, std::size_t steps);

/// phi + phi^2 + ... + phi^h.
double damped_sum(double phi, std::size_t h);

struct HwGrid {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> gamma;
    std::vector<double> phi;

    // alpha, beta, gamma in {1/(r+1), ..., r/(r+1)}; phi in {1/r, ..., 1}.
    static HwGrid uniform(std::size_t resolution);
};

struct HwFit {
    HwParams params;
    double validation_mse = 0.0;
    // Constant series: every candidate fits equally well.
    bool degenerate = false;
    std::size_t candidates = 0;
};

/// Exhaustive search. Fits on x[0 .. T-holdout) and scores the forecast of
/// the last `holdout` points. Candidates are visited in ascending order and
/// only a strictly smaller error replaces the incumbent, so ties resolve
/// toward smaller parameters.
HwFit hw_fit_grid(std::span<const double> x, std::size_t period, const HwGrid& grid, std::size_t holdout);

}  // namespace etsf::classical
