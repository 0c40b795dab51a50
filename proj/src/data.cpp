#include "etsf/data.hpp"

#include "etsf/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

namespace etsf::data {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_number(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line); }

double parse_cell(const std::string& text, const std::string& source, std::size_t line, std::size_t column) {
    double v = 0.0;
    if (!parse_number(text, v)) {
        throw ParseError(where(source, line) + ": column " + std::to_string(column + 1) + ": '" + text +
                         "' is not a number");
    }
    if (!std::isfinite(v)) {
        throw ParseError(where(source, line) + ": column " + std::to_string(column + 1) + ": non-finite value '" +
                         text + "'");
    }
    return v;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

Series Series::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > length()) {
        throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of a series of length " +
                             std::to_string(length()));
    }
    Series out;
    out.names = names;
    out.values = Matrix(end - begin, channels());
    std::copy(values.data.begin() + static_cast<std::ptrdiff_t>(begin * channels()),
              values.data.begin() + static_cast<std::ptrdiff_t>(end * channels()), out.values.data.begin());
    if (!timestamps.empty()) out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    return out;
}

bool is_iso8601(const std::string& text) {
    static const std::regex re(R"(^\d{4}-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$)");
    return std::regex_match(text, re);
}

Series parse_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        header = split_fields(t);
        break;
    }
    if (header.empty()) throw DataError(source + ": empty file");

    Series s;
    bool has_time = false;
    bool decided = false;
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto fields = split_fields(t);
        if (fields.size() != header.size()) {
            throw ParseError(where(source, line_no) + ": expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        if (!decided) {
            double probe = 0.0;
            has_time = !parse_number(fields[0], probe) && is_iso8601(fields[0]);
            if (has_time && header.size() < 2) throw ParseError(where(source, line_no) + ": no numeric columns");
            decided = true;
        }
        std::size_t c0 = 0;
        if (has_time) {
            if (!is_iso8601(fields[0])) {
                throw ParseError(where(source, line_no) + ": '" + fields[0] + "' is not an ISO-8601 timestamp");
            }
            s.timestamps.push_back(fields[0]);
            c0 = 1;
        }
        for (std::size_t c = c0; c < fields.size(); ++c) values.push_back(parse_cell(fields[c], source, line_no, c));
        ++rows;
    }
    if (rows == 0) throw DataError(source + ": no data rows");
    const std::size_t m = header.size() - (has_time ? 1 : 0);
    s.names.assign(header.begin() + (has_time ? 1 : 0), header.end());
    s.values = Matrix(rows, m, std::move(values));
    return s;
}

Series load_csv(const std::string& path) {
    auto in = open_in(path);
    return parse_csv(in, path);
}

void write_csv(const Series& series, std::ostream& out) {
    const bool has_time = !series.timestamps.empty();
    if (has_time && series.timestamps.size() != series.length()) {
        throw DimensionError("write_csv: " + std::to_string(series.timestamps.size()) + " timestamps for " +
                             std::to_string(series.length()) + " rows");
    }
    if (has_time) out << "date";
    for (std::size_t c = 0; c < series.channels(); ++c) {
        if (has_time || c > 0) out << ',';
        out << (c < series.names.size() ? series.names[c] : "x" + std::to_string(c));
    }
    out << '\n';
    for (std::size_t r = 0; r < series.length(); ++r) {
        if (has_time) out << series.timestamps[r];
        for (std::size_t c = 0; c < series.channels(); ++c) {
            if (has_time || c > 0) out << ',';
            out << format_number(series.values(r, c));
        }
        out << '\n';
    }
}

void write_csv(const Series& series, const std::string& path) {
    auto out = open_out(path);
    write_csv(series, out);
    if (!out) throw IoError("failed writing '" + path + "'");
}

NormStats NormStats::fit(const Matrix& values) {
    if (values.rows == 0) throw DataError("normalization statistics need at least one row");
    NormStats st;
    st.mean.assign(values.cols, 0.0);
    st.std.assign(values.cols, 0.0);
    const double n = static_cast<double>(values.rows);
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c) st.mean[c] += values(r, c);
    for (double& m : st.mean) m /= n;
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c) {
            const double d = values(r, c) - st.mean[c];
            st.std[c] += d * d;
        }
    for (double& s : st.std) {
        s = std::sqrt(s / n);
        if (!(s > 0.0)) s = 1.0;
    }
    return st;
}

Matrix NormStats::apply(const Matrix& values) const {
    if (values.cols != mean.size()) {
        throw DimensionError("normalization fitted on " + std::to_string(mean.size()) + " channels applied to " +
                             std::to_string(values.cols));
    }
    Matrix out(values.rows, values.cols);
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c) out(r, c) = (values(r, c) - mean[c]) / std[c];
    return out;
}

Matrix NormStats::invert(const Matrix& values) const {
    if (values.cols != mean.size()) {
        throw DimensionError("normalization fitted on " + std::to_string(mean.size()) + " channels inverted on " +
                             std::to_string(values.cols));
    }
    Matrix out(values.rows, values.cols);
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c) out(r, c) = values(r, c) * std[c] + mean[c];
    return out;
}

std::pair<Series, NormStats> normalize(const Series& series, const Series& train) {
    NormStats st = NormStats::fit(train.values);
    Series out = series;
    out.values = st.apply(series.values);
    return {std::move(out), std::move(st)};
}

void SplitSpec::validate() const {
    if (!(train > 0.0 && val > 0.0 && test > 0.0)) throw ConfigError("split fractions must all be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::size_t split_boundary(double fraction, std::size_t n) {
    // 0.7 + 0.1 is 0.7999..., so snap products within rounding of an integer.
    const double x = fraction * static_cast<double>(n);
    return static_cast<std::size_t>(std::floor(x + 1e-9 * std::max(1.0, x)));
}

Splits split_chronological(const Series& series, const SplitSpec& spec, std::size_t min_length) {
    spec.validate();
    const std::size_t T = series.length();
    const std::size_t b1 = split_boundary(spec.train, T);
    const std::size_t b2 = split_boundary(spec.train + spec.val, T);
    const std::size_t shortest = std::min({b1, b2 - b1, T - b2});
    if (shortest == 0 || shortest < min_length) {
        // Smallest T whose every part reaches the requirement.
        const std::size_t need = std::max<std::size_t>(min_length, 1);
        std::size_t required = T;
        for (std::size_t n = 1;; ++n) {
            const std::size_t c1 = split_boundary(spec.train, n);
            const std::size_t c2 = split_boundary(spec.train + spec.val, n);
            if (c1 >= need && c2 - c1 >= need && n - c2 >= need) {
                required = n;
                break;
            }
        }
        throw DataError("series of length " + std::to_string(T) + " is too short to split; each part needs " +
                        std::to_string(need) + " rows, which requires length >= " + std::to_string(required));
    }
    return {series.slice(0, b1), series.slice(b1, b2), series.slice(b2, T)};
}

std::size_t window_count(std::size_t T, std::size_t L, std::size_t H, std::size_t stride) {
    if (stride == 0) throw ConfigError("window stride must be positive");
    if (T < L + H) return 0;
    return (T - L - H) / stride + 1;
}

std::vector<WindowPair> window_dataset(const Series& series, std::size_t L, std::size_t H, std::size_t stride) {
    if (L == 0 || H == 0) throw ConfigError("lookback and horizon must be positive");
    const std::size_t T = series.length();
    if (T < L + H) {
        throw DataError("series of length " + std::to_string(T) + " is shorter than lookback + horizon = " +
                        std::to_string(L + H));
    }
    const std::size_t n = window_count(T, L, H, stride);
    std::vector<WindowPair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t o = i * stride;
        WindowPair w;
        w.origin = o;
        w.lookback = series.slice(o, o + L).values;
        w.target = series.slice(o + L, o + L + H).values;
        out.push_back(std::move(w));
    }
    return out;
}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw DimensionError("concat_rows: column counts differ");
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
}

namespace synth {

double trend(double t) { return 1.0 / (1.0 + std::exp(kBeta0 * (t - kBeta1))); }

double season(double t) {
    const double two_pi = 2.0 * std::numbers::pi;
    return kAmp1 * std::cos(two_pi * kFreq1 * t) + kAmp2 * std::cos(two_pi * kFreq2 * t);
}

Matrix generate(std::size_t n, double noise_std, std::uint64_t seed, std::size_t first_instance) {
    if (!(noise_std >= 0.0)) throw ConfigError("synthetic noise standard deviation must be non-negative");
    const std::size_t len = kLookback + kHorizon;
    Matrix out(n, len);
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double i = static_cast<double>(first_instance + r);
        for (std::size_t k = 0; k < len; ++k) {
            const double t = static_cast<double>(k + 1);
            double v = trend(t) + season(t + i);
            if (noise_std > 0.0) v += noise(rng);
            out(r, k) = v;
        }
    }
    return out;
}

std::vector<WindowPair> to_windows(const Matrix& instances, std::size_t lookback) {
    if (lookback == 0 || lookback >= instances.cols) {
        throw DataError("instances of length " + std::to_string(instances.cols) + " cannot hold lookback " +
                        std::to_string(lookback) + " plus a horizon");
    }
    std::vector<WindowPair> out(instances.rows);
    const std::size_t H = instances.cols - lookback;
    for (std::size_t r = 0; r < instances.rows; ++r) {
        out[r].origin = r;
        out[r].lookback = Matrix(lookback, 1);
        out[r].target = Matrix(H, 1);
        for (std::size_t k = 0; k < lookback; ++k) out[r].lookback.data[k] = instances(r, k);
        for (std::size_t k = 0; k < H; ++k) out[r].target.data[k] = instances(r, lookback + k);
    }
    return out;
}

std::vector<WindowPair> synth_generate(std::size_t n, double noise_std, std::uint64_t seed) {
    return to_windows(generate(n, noise_std, seed), kLookback);
}

void write_csv(const SynthFile& file, std::ostream& out) {
    if (file.instances.cols != file.lookback + file.horizon) {
        throw DimensionError("synthetic instances have " + std::to_string(file.instances.cols) +
                             " steps, expected lookback + horizon");
    }
    out << "# synth lookback=" << file.lookback << " horizon=" << file.horizon << " noise=" << format_number(file.noise)
        << " seed=" << file.seed << " first=" << file.first_instance << '\n';
    out << "instance";
    for (std::size_t k = 0; k < file.instances.cols; ++k) out << ",t_" << (k + 1);
    out << '\n';
    for (std::size_t r = 0; r < file.instances.rows; ++r) {
        out << (file.first_instance + r);
        for (std::size_t k = 0; k < file.instances.cols; ++k) out << ',' << format_number(file.instances(r, k));
        out << '\n';
    }
}

void write_csv(const SynthFile& file, const std::string& path) {
    auto out = open_out(path);
    write_csv(file, out);
    if (!out) throw IoError("failed writing '" + path + "'");
}

SynthFile read_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    SynthFile f;
    {
        std::istringstream meta(trim(line));
        std::string tag;
        meta >> tag;
        std::string kind;
        meta >> kind;
        if (tag != "#" || kind != "synth") throw ParseError(where(source, 1) + ": missing '# synth' metadata row");
        std::string kv;
        while (meta >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ParseError(where(source, 1) + ": bad metadata entry '" + kv + "'");
            const std::string key = kv.substr(0, eq);
            const std::string val = kv.substr(eq + 1);
            double v = 0.0;
            if (!parse_number(val, v)) throw ParseError(where(source, 1) + ": bad metadata value '" + kv + "'");
            if (key == "lookback") f.lookback = static_cast<std::size_t>(v);
            else if (key == "horizon") f.horizon = static_cast<std::size_t>(v);
            else if (key == "noise") f.noise = v;
            else if (key == "seed") f.seed = static_cast<std::uint64_t>(std::stoull(val));
            else if (key == "first") f.first_instance = static_cast<std::size_t>(v);
        }
    }
    const Series s = parse_csv(in, source);
    const std::size_t len = f.lookback + f.horizon;
    if (s.channels() != len + 1) {
        throw ParseError(source + ": expected instance column plus " + std::to_string(len) + " steps, got " +
                         std::to_string(s.channels()) + " columns");
    }
    f.instances = Matrix(s.length(), len);
    for (std::size_t r = 0; r < s.length(); ++r)
        for (std::size_t k = 0; k < len; ++k) f.instances(r, k) = s.values(r, k + 1);
    if (s.length() > 0) f.first_instance = static_cast<std::size_t>(s.values(0, 0));
    return f;
}

SynthFile read_csv(const std::string& path) {
    auto in = open_in(path);
    return read_csv(in, path);
}

bool is_synth_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) return false;
    return trim(line).rfind("# synth", 0) == 0;
}

}  // namespace synth

AugmentTrace augment(WindowPair& pair, const AugmentConfig& cfg, Rng& rng) {
    AugmentTrace trace;
    if (!cfg.enabled) return trace;
    std::bernoulli_distribution fire(cfg.probability);
    trace.scale = fire(rng);
    trace.shift = fire(rng);
    trace.jitter = fire(rng);
    auto each = [&](auto&& fn) {
        for (double& v : pair.lookback.data) fn(v);
        for (double& v : pair.target.data) fn(v);
    };
    if (trace.scale) {
        const double eps = std::normal_distribution<double>(0.0, cfg.scale_std)(rng);
        const double factor = cfg.scale_around_one ? 1.0 + eps : eps;
        each([&](double& v) { v *= factor; });
    }
    if (trace.shift) {
        const double eps = std::normal_distribution<double>(0.0, cfg.shift_std)(rng);
        each([&](double& v) { v += eps; });
    }
    if (trace.jitter) {
        std::normal_distribution<double> noise(0.0, cfg.jitter_std);
        each([&](double& v) { v += noise(rng); });
    }
    return trace;
}

Metrics metrics(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols) {
        throw DimensionError("metrics: prediction " + std::to_string(pred.rows) + "x" + std::to_string(pred.cols) +
                             " vs target " + std::to_string(target.rows) + "x" + std::to_string(target.cols));
    }
    if (pred.data.empty()) throw DimensionError("metrics: empty arrays");
    Metrics m;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double e = pred.data[i] - target.data[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    const double n = static_cast<double>(pred.data.size());
    m.mse /= n;
    m.mae /= n;
    return m;
}

}  // namespace etsf::data
