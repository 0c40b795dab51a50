#pragma once

#include "etsf/matrix.hpp"
#include "etsf/ops.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace etsf::data {

// T x m observations with optional timestamps and channel names.
struct Series {
    Matrix values;
    std::vector<std::string> timestamps;  // empty or one per row
    std::vector<std::string> names;       // one per channel

    std::size_t length() const { return values.rows; }
    std::size_t channels() const { return values.cols; }
    // Rows [begin, end).
    Series slice(std::size_t begin, std::size_t end) const;
};

/**
 * Header row, then one row per time step. The first column holds ISO-8601
 * timestamps if the first data row does not start with a number. Lines
 * starting with '#' are skipped. Non-numeric or non-finite cells raise
 * ParseError naming the line.
 */
Series load_csv(const std::string& path);
Series parse_csv(std::istream& in, const std::string& source = "<stream>");
void write_csv(const Series& series, const std::string& path);
void write_csv(const Series& series, std::ostream& out);

bool is_iso8601(const std::string& text);

// Per-channel standardization statistics.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;  // 1 where the fitted channel is constant

    static NormStats fit(const Matrix& values);
    Matrix apply(const Matrix& values) const;
    Matrix invert(const Matrix& values) const;
};

/// Standardizes `series` with statistics of `train`.
std::pair<Series, NormStats> normalize(const Series& series, const Series& train);

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;

    void validate() const;
};

struct Splits {
    Series train;
    Series val;
    Series test;
};

/// floor(fraction n), tolerant of the rounding in sums like 0.7 + 0.1.
std::size_t split_boundary(double fraction, std::size_t n);

/// Boundaries at floor(train T) and floor((train + val) T). With
/// min_length > 0 each part must hold at least that many rows.
Splits split_chronological(const Series& series, const SplitSpec& spec, std::size_t min_length = 0);

// Target starts where the lookback ends: rows [origin, origin+L) and
// [origin+L, origin+L+H).
struct WindowPair {
    Matrix lookback;  // L x m
    Matrix target;    // H x m
    std::size_t origin = 0;
};

/// Count at stride s is floor((T - L - H) / s) + 1.
std::vector<WindowPair> window_dataset(const Series& series, std::size_t L, std::size_t H, std::size_t stride = 1);
std::size_t window_count(std::size_t T, std::size_t L, std::size_t H, std::size_t stride = 1);

Matrix concat_rows(const Matrix& a, const Matrix& b);

// Synthetic trend + seasonality instances, x_i(t) = b(t) + s(t + i) + noise
// for t = 1 .. lookback + horizon.
namespace synth {

inline constexpr std::size_t kLookback = 192;
inline constexpr std::size_t kHorizon = 48;
inline constexpr double kBeta0 = -0.2;
inline constexpr double kBeta1 = 192.0;
inline constexpr double kFreq1 = 1.0 / 10.0;
inline constexpr double kFreq2 = 1.0 / 13.0;
inline constexpr double kAmp1 = 0.15;
inline constexpr double kAmp2 = 0.15;

double trend(double t);
double season(double t);

/// n x (lookback + horizon); row i is instance i.
Matrix generate(std::size_t n, double noise_std, std::uint64_t seed, std::size_t first_instance = 0);
/// One window per instance, lookback 192 and horizon 48.
std::vector<WindowPair> synth_generate(std::size_t n, double noise_std, std::uint64_t seed);
std::vector<WindowPair> to_windows(const Matrix& instances, std::size_t lookback);

struct SynthFile {
    Matrix instances;
    std::size_t lookback = kLookback;
    std::size_t horizon = kHorizon;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t first_instance = 0;
};

// "# synth lookback=.. horizon=.. noise=.. seed=.. first=..", then a header
// "instance,t_1,...", then one row per instance.
void write_csv(const SynthFile& file, std::ostream& out);
void write_csv(const SynthFile& file, const std::string& path);
SynthFile read_csv(std::istream& in, const std::string& source = "<stream>");
SynthFile read_csv(const std::string& path);
bool is_synth_csv(const std::string& path);

}  // namespace synth

struct AugmentConfig {
    bool enabled = false;
    double probability = 0.5;  // per stage
    double scale_std = 0.2;
    double shift_std = 0.2;
    double jitter_std = 0.2;
    // x * (1 + eps) instead of x * eps.
    bool scale_around_one = false;
};

struct AugmentTrace {
    bool scale = false;
    bool shift = false;
    bool jitter = false;
};

/// Scale, shift, then jitter the concatenated lookback and target. Each stage
/// fires independently with `probability`.
AugmentTrace augment(WindowPair& pair, const AugmentConfig& cfg, Rng& rng);

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

/// Means over all entries; DimensionError on shape mismatch.
Metrics metrics(const Matrix& pred, const Matrix& target);

}  // namespace etsf::data
