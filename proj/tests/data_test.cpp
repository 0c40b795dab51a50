#include "etsf/data.hpp"
#include "etsf/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace etsf;
using namespace etsf::data;

namespace {

Series parse(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in, "mem.csv");
}

Series ramp(std::size_t T, std::size_t m = 1) {
    Series s;
    s.values = Matrix(T, m);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < m; ++c) s.values(t, c) = static_cast<double>(t * m + c);
    for (std::size_t c = 0; c < m; ++c) s.names.push_back("c" + std::to_string(c));
    return s;
}

}  // namespace

TEST(Csv, LoadsTwoByTwo) {
    const Series s = parse("a,b\n1,2\n3.5,-4e1\n");
    EXPECT_EQ(s.length(), 2u);
    EXPECT_EQ(s.channels(), 2u);
    EXPECT_EQ(s.values.data, (std::vector<double>{1, 2, 3.5, -40}));
    EXPECT_EQ(s.names, (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(s.timestamps.empty());
}

TEST(Csv, NanCellNamesTheLine) {
    try {
        parse("a,b\n1,2\n# note\n3,NaN\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("mem.csv:4"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse("a\nfoo\n"), ParseError);
    EXPECT_THROW(parse("a,b\n1\n"), ParseError);
}

TEST(Csv, EmptyInput) {
    EXPECT_THROW(parse(""), DataError);
    EXPECT_THROW(parse("a,b\n"), DataError);
}

TEST(Csv, TimestampColumn) {
    const Series s = parse("date,x\n2020-01-01 00:00:00,1.5\n2020-01-01T01:00,2\n");
    EXPECT_EQ(s.channels(), 1u);
    EXPECT_EQ(s.timestamps, (std::vector<std::string>{"2020-01-01 00:00:00", "2020-01-01T01:00"}));
    EXPECT_EQ(s.names, (std::vector<std::string>{"x"}));
    EXPECT_THROW(parse("date,x\n2020-01-01,1\nyesterday,2\n"), ParseError);
    EXPECT_TRUE(is_iso8601("2016-07-01 00:15:00"));
    EXPECT_FALSE(is_iso8601("07/01/2016"));
}

TEST(Csv, RoundTripIsValueIdentical) {
    Rng rng(1);
    Series s = ramp(50, 3);
    for (double& v : s.values.data) v = test::normal_values(1, rng, 1e3)[0] / 7.0;
    s.timestamps.assign(50, "2021-03-01T00:00:00");
    std::ostringstream out;
    write_csv(s, out);
    const Series back = parse(out.str());
    EXPECT_EQ(back.values, s.values);
    EXPECT_EQ(back.timestamps, s.timestamps);
    EXPECT_EQ(back.names, s.names);

    const auto path = std::filesystem::temp_directory_path() / "etsf_data_roundtrip.csv";
    write_csv(s, path.string());
    EXPECT_EQ(load_csv(path.string()).values, s.values);
    std::filesystem::remove(path);
    EXPECT_THROW(load_csv("/nonexistent/etsf.csv"), IoError);
}

TEST(Normalize, TrainStatisticsAndRoundTrip) {
    Rng rng(2);
    Series s = ramp(80, 3);
    for (double& v : s.values.data) v = 5.0 + 3.0 * test::normal_values(1, rng)[0];
    for (std::size_t t = 0; t < 80; ++t) s.values(t, 2) = 4.0;  // constant channel
    const Series train = s.slice(0, 50);
    const auto [norm, stats] = normalize(s, train);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 50; ++t) mean += norm.values(t, c);
        EXPECT_LT(std::abs(mean / 50.0), 1e-10);
    }
    EXPECT_EQ(stats.std[2], 1.0);
    for (std::size_t t = 0; t < 80; ++t) EXPECT_EQ(norm.values(t, 2), 0.0);
    EXPECT_LT(max_abs_diff(stats.invert(norm.values), s.values), 1e-12);
}

TEST(Split, FloorBoundaries) {
    const auto a = split_chronological(ramp(100), SplitSpec{0.6, 0.2, 0.2});
    EXPECT_EQ(a.train.length(), 60u);
    EXPECT_EQ(a.val.length(), 20u);
    EXPECT_EQ(a.test.length(), 20u);
    const auto b = split_chronological(ramp(10), SplitSpec{});
    EXPECT_EQ(b.train.length(), 7u);
    EXPECT_EQ(b.val.length(), 1u);
    EXPECT_EQ(b.test.length(), 2u);
}

TEST(Split, ConcatenationIsIdentity) {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t T = test::uniform_int(rng, 10, 300);
        const Series s = ramp(T, 2);
        const auto parts = split_chronological(s, SplitSpec{});
        const Matrix joined = concat_rows(concat_rows(parts.train.values, parts.val.values), parts.test.values);
        EXPECT_EQ(joined, s.values);
    }
}

TEST(Split, TooShortStatesRequiredLength) {
    try {
        split_chronological(ramp(50), SplitSpec{}, 12);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("12"), std::string::npos) << e.what();
    }
    EXPECT_THROW((SplitSpec{0.5, 0.5, 0.5}.validate()), ConfigError);
}

TEST(Windows, CountsAndIndices) {
    const Series s = ramp(10);
    const auto w = window_dataset(s, 4, 2);
    ASSERT_EQ(w.size(), 5u);
    EXPECT_EQ(w[0].lookback.data, (std::vector<double>{0, 1, 2, 3}));
    EXPECT_EQ(w[0].target.data, (std::vector<double>{4, 5}));
    EXPECT_EQ(w[4].origin, 4u);
    EXPECT_THROW(window_dataset(ramp(5), 4, 2), DataError);
}

TEST(Windows, StrideHorizonGivesDisjointTargets) {
    Rng rng(4);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t L = test::uniform_int(rng, 1, 10), H = test::uniform_int(rng, 1, 6);
        const std::size_t T = L + H + test::uniform_int(rng, 0, 40);
        const auto w = window_dataset(ramp(T), L, H, H);
        EXPECT_EQ(w.size(), (T - L) / H);
        EXPECT_EQ(w.size(), window_count(T, L, H, H));
        for (std::size_t i = 1; i < w.size(); ++i) EXPECT_EQ(w[i].target.data.front(), w[i - 1].target.data.back() + 1);
        EXPECT_EQ(window_dataset(ramp(T), L, H).size(), T - L - H + 1);
    }
}

TEST(Synth, Constants) {
    EXPECT_DOUBLE_EQ(synth::trend(192), 0.5);
    EXPECT_DOUBLE_EQ(synth::season(0), 0.3);
}

TEST(Synth, NoiselessRowsDependOnlyOnInstance) {
    const Matrix a = synth::generate(6, 0.0, 1);
    const Matrix b = synth::generate(3, 0.0, 99, 3);
    for (std::size_t k = 0; k < a.cols; ++k) {
        EXPECT_EQ(a(4, k), b(1, k));
        EXPECT_EQ(a(2, k), synth::trend(k + 1.0) + synth::season(k + 1.0 + 2.0));
    }
}

TEST(Synth, SeededNoiseIsReproducible) {
    EXPECT_EQ(synth::generate(20, 0.05, 7).data, synth::generate(20, 0.05, 7).data);
    EXPECT_NE(synth::generate(20, 0.05, 7).data, synth::generate(20, 0.05, 8).data);
    const auto w = synth::synth_generate(4, 0.05, 3);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_EQ(w[0].lookback.rows, 192u);
    EXPECT_EQ(w[0].target.rows, 48u);
}

TEST(Synth, CsvRoundTrip) {
    synth::SynthFile f;
    f.instances = synth::generate(5, 0.05, 11, 2);
    f.noise = 0.05;
    f.seed = 11;
    f.first_instance = 2;
    std::ostringstream out;
    synth::write_csv(f, out);
    std::istringstream in(out.str());
    const auto back = synth::read_csv(in);
    EXPECT_EQ(back.instances, f.instances);
    EXPECT_EQ(back.seed, 11u);
    EXPECT_EQ(back.first_instance, 2u);
    EXPECT_EQ(back.noise, 0.05);
    EXPECT_EQ(back.lookback, 192u);
}

TEST(Augment, InactiveIsIdentity) {
    Rng rng(5);
    WindowPair p{test::random_matrix(8, 2, rng), test::random_matrix(3, 2, rng), 0};
    const WindowPair orig = p;
    AugmentConfig off;
    EXPECT_FALSE(augment(p, off, rng).scale);
    AugmentConfig never;
    never.enabled = true;
    never.probability = 0.0;
    augment(p, never, rng);
    EXPECT_EQ(p.lookback, orig.lookback);
    EXPECT_EQ(p.target, orig.target);
}

TEST(Augment, ShiftOnlyAddsOneConstant) {
    Rng rng(6);
    AugmentConfig cfg;
    cfg.enabled = true;
    for (int rep = 0; rep < 200; ++rep) {
        WindowPair p{test::random_matrix(8, 2, rng), test::random_matrix(3, 2, rng), 0};
        const WindowPair orig = p;
        const auto trace = augment(p, cfg, rng);
        if (!trace.shift || trace.scale || trace.jitter) continue;
        const double d = p.lookback.data[0] - orig.lookback.data[0];
        for (std::size_t i = 0; i < p.lookback.data.size(); ++i)
            EXPECT_NEAR(p.lookback.data[i] - orig.lookback.data[i], d, 1e-12);
        for (std::size_t i = 0; i < p.target.data.size(); ++i)
            EXPECT_NEAR(p.target.data[i] - orig.target.data[i], d, 1e-12);
    }
}

TEST(Augment, ScaleMultipliesBothParts) {
    Rng rng(7);
    AugmentConfig cfg;
    cfg.enabled = true;
    cfg.probability = 1.0;
    cfg.shift_std = 0.0;
    cfg.jitter_std = 0.0;
    WindowPair p{test::random_matrix(8, 1, rng), test::random_matrix(3, 1, rng), 0};
    const WindowPair orig = p;
    augment(p, cfg, rng);
    const double f = p.lookback.data[0] / orig.lookback.data[0];
    EXPECT_NEAR(p.target.data[2], f * orig.target.data[2], 1e-12);
}

TEST(Augment, ActivationRatesWithinThreeSigma) {
    Rng rng(8);
    AugmentConfig cfg;
    cfg.enabled = true;
    const int n = 10000;
    int scale = 0, shift = 0, jitter = 0;
    for (int i = 0; i < n; ++i) {
        WindowPair p{Matrix(2, 1), Matrix(1, 1), 0};
        const auto t = augment(p, cfg, rng);
        scale += t.scale;
        shift += t.shift;
        jitter += t.jitter;
    }
    const double sigma = std::sqrt(n * 0.25);
    for (int c : {scale, shift, jitter}) EXPECT_LT(std::abs(c - n * 0.5), 3 * sigma);
}

TEST(Metrics, Examples) {
    Matrix a(2, 2);
    a.data = {1, 2, 3, 4};
    const auto same = metrics(a, a);
    EXPECT_EQ(same.mse, 0.0);
    EXPECT_EQ(same.mae, 0.0);
    Matrix zero(1, 1), two(1, 1);
    two.data = {2};
    const auto m = metrics(zero, two);
    EXPECT_EQ(m.mse, 4.0);
    EXPECT_EQ(m.mae, 2.0);
    EXPECT_THROW(metrics(a, two), DimensionError);
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const auto r = metrics(test::random_matrix(4, 3, rng), test::random_matrix(4, 3, rng));
        EXPECT_GE(r.mse, 0.0);
        EXPECT_GE(r.mae, 0.0);
    }
}
