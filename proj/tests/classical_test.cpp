#include "etsf/classical.hpp"
#include "etsf/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace etsf;
using namespace etsf::classical;

TEST(HwSmooth, ConstantSeriesIsAFixedPoint) {
    const std::vector<double> x(40, 3.5);
    HwState init;
    init.period = 4;
    init.level = {3.5};
    init.growth = {0.0};
    init.season.assign(4, 0.0);
    const HwState s = hw_smooth(x, HwParams{0.3, 0.2, 0.4, 1.0, 4}, init);
    for (double e : s.level) EXPECT_EQ(e, 3.5);
    for (double b : s.growth) EXPECT_EQ(b, 0.0);
    for (double v : s.season) EXPECT_EQ(v, 0.0);
}

TEST(HwSmooth, FullUpdateDropsPriorState) {
    Rng rng(1);
    const auto x = test::normal_values(30, rng);
    const HwParams p{1.0, 1.0, 1.0, 1.0, 3};
    const HwState init = hw_initial_state(x, 3);
    const HwState s = hw_smooth(x, p, init);
    double e_prev = init.level[0];
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double s_back = s.season[t];
        EXPECT_DOUBLE_EQ(s.level[t], x[t] - s_back);
        EXPECT_DOUBLE_EQ(s.growth[t], s.level[t] - e_prev);
        EXPECT_DOUBLE_EQ(s.season[t + 3], x[t] - s.level[t]);
        e_prev = s.level[t];
    }
}

TEST(HwSmooth, MatchesHandRecurrence) {
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = test::uniform_int(rng, 1, 7);
        const std::size_t T = p + test::uniform_int(rng, 1, 60);
        const auto x = test::normal_values(T, rng);
        const HwParams hp{test::uniform_real(rng, 0.01, 1.0), test::uniform_real(rng, 0.01, 1.0),
                          test::uniform_real(rng, 0.01, 1.0), 1.0, p};
        const HwState s = hw_smooth(x, hp);

        double mean = 0.0;
        for (std::size_t j = 0; j < p; ++j) mean += x[j];
        mean /= static_cast<double>(p);
        std::vector<double> season;
        for (std::size_t j = 0; j < p; ++j) season.push_back(x[j] - mean);
        double e = mean, b = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double e_new = hp.alpha * (x[t] - season[t]) + (1 - hp.alpha) * (e + b);
            const double b_new = hp.beta * (e_new - e) + (1 - hp.beta) * b;
            season.push_back(hp.gamma * (x[t] - e_new) + (1 - hp.gamma) * season[t]);
            e = e_new;
            b = b_new;
            ASSERT_EQ(s.level[t], e);
            ASSERT_EQ(s.growth[t], b);
        }
        EXPECT_EQ(s.season, season);
        EXPECT_EQ(hw_smooth(x, hp).level, s.level);
    }
}

TEST(HwSmooth, ShortSeriesAndBadParams) {
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_THROW(hw_smooth(x, HwParams{0.5, 0.5, 0.5, 1.0, 4}), DataError);
    EXPECT_THROW(hw_smooth(x, HwParams{0.0, 0.5, 0.5, 1.0, 2}), ConfigError);
    EXPECT_THROW(hw_smooth(x, HwParams{0.5, 0.5, 0.5, 1.2, 2}), ConfigError);
}

namespace {

HwState flat_state(double e, double b, std::size_t p, double s = 0.0) {
    HwState st;
    st.period = p;
    st.level = {e};
    st.growth = {b};
    st.season.assign(p, s);
    return st;
}

}  // namespace

TEST(HwForecast, DampedExample) {
    const auto f = hw_forecast(flat_state(10, 1, 1), HwParams{0.5, 0.5, 0.5, 0.9, 1}, 2);
    EXPECT_NEAR(f[1], 11.71, 1e-12);
    EXPECT_NEAR(f[0], 10.9, 1e-12);
}

TEST(HwForecast, UndampedIsVanilla) {
    HwState st = flat_state(2.0, 0.5, 3);
    st.season = {0.1, -0.2, 0.3};
    const auto f = hw_forecast(st, HwParams{0.5, 0.5, 0.5, 1.0, 3}, 7);
    for (std::size_t h = 1; h <= 7; ++h) {
        EXPECT_EQ(f[h - 1], 2.0 + static_cast<double>(h) * 0.5 + st.season[(h - 1) % 3]);
    }
}

TEST(HwForecast, AsymptoteAndMonotoneBound) {
    const auto f = hw_forecast(flat_state(0, 1, 1), HwParams{0.5, 0.5, 0.5, 0.5, 1}, 60);
    EXPECT_LT(std::abs(f[59] - 1.0), 1e-9);
    Rng rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        const double phi = test::uniform_real(rng, 0.05, 0.99);
        const double b = test::uniform_real(rng, -3, 3);
        const auto g = hw_forecast(flat_state(0, b, 1), HwParams{0.5, 0.5, 0.5, phi, 1}, 80);
        const double bound = phi * std::abs(b) / (1 - phi);
        for (std::size_t h = 0; h < g.size(); ++h) {
            EXPECT_LE(std::abs(g[h]), bound + 1e-12);
            if (h) EXPECT_GE(std::abs(g[h]), std::abs(g[h - 1]));
        }
    }
    const auto flat = hw_forecast(flat_state(4.25, 0, 5), HwParams{0.5, 0.5, 0.5, 0.7, 5}, 12);
    for (double v : flat) EXPECT_EQ(v, 4.25);
}

TEST(DampedSum, ClosedForm) {
    for (double phi : {0.3, 0.8, 0.95}) {
        for (std::size_t h : {1u, 5u, 40u}) {
            EXPECT_NEAR(damped_sum(phi, h), phi * (1 - std::pow(phi, static_cast<double>(h))) / (1 - phi), 1e-12);
        }
    }
    EXPECT_EQ(damped_sum(1.0, 9), 9.0);
}

TEST(HwGrid, UniformValuesStayInRange) {
    const HwGrid g = HwGrid::uniform(4);
    EXPECT_EQ(g.alpha, (std::vector<double>{0.2, 0.4, 0.6, 0.8}));
    EXPECT_EQ(g.phi, (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
}

TEST(HwFitGrid, RecoversGeneratingParameters) {
    // The holdout is exactly the forecast of the generating parameters, so
    // they score zero error and every other candidate scores above it.
    Rng rng(4);
    const HwGrid grid = HwGrid::uniform(3);
    for (const HwParams truth : {HwParams{0.25, 0.5, 0.75, 2.0 / 3.0, 4}, HwParams{0.75, 0.25, 0.5, 1.0, 4},
                                 HwParams{0.5, 0.75, 0.25, 1.0 / 3.0, 4}}) {
        std::vector<double> x;
        for (int t = 0; t < 40; ++t) x.push_back(0.05 * t + std::sin(t * 1.5707963) + 0.3 * test::normal_values(1, rng)[0]);
        const HwState state = hw_smooth(x, truth, hw_initial_state(x, 4));
        const auto tail = hw_forecast(state, truth, 8);
        x.insert(x.end(), tail.begin(), tail.end());
        const HwFit fit = hw_fit_grid(x, 4, grid, 8);
        EXPECT_EQ(fit.params, truth);
        EXPECT_EQ(fit.validation_mse, 0.0);
        EXPECT_EQ(fit.candidates, 81u);
        EXPECT_FALSE(fit.degenerate);
    }
}

TEST(HwFitGrid, ConstantSeriesIsDegenerate) {
    const std::vector<double> x(50, -1.25);
    const HwFit fit = hw_fit_grid(x, 5, HwGrid::uniform(3), 10);
    EXPECT_TRUE(fit.degenerate);
    EXPECT_EQ(fit.validation_mse, 0.0);
    // Ties resolve toward the smallest candidate.
    EXPECT_EQ(fit.params, (HwParams{0.25, 0.25, 0.25, 1.0 / 3.0, 5}));
}

TEST(HwFitGrid, SinglePointGrid) {
    Rng rng(5);
    const auto x = test::normal_values(30, rng);
    const HwFit fit = hw_fit_grid(x, 3, HwGrid{{0.4}, {0.3}, {0.2}, {0.9}}, 6);
    EXPECT_EQ(fit.params, (HwParams{0.4, 0.3, 0.2, 0.9, 3}));
    EXPECT_EQ(fit.candidates, 1u);
}

TEST(HwFitGrid, RejectsShortSeries) {
    const std::vector<double> x(10, 1.0);
    EXPECT_THROW(hw_fit_grid(x, 4, HwGrid::uniform(2), 6), DataError);
    EXPECT_THROW(hw_fit_grid(x, 2, HwGrid{}, 2), ConfigError);
}
