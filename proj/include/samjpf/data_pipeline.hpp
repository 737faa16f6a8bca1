#ifndef SAMJPF_DATA_PIPELINE_HPP
#define SAMJPF_DATA_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "samjpf/error.hpp"
#include "samjpf/io.hpp"
#include "samjpf/types.hpp"

namespace samjpf {

struct TimedValue {
    double t;
    double value;
};

/// One sensor stream as recorded: strictly increasing timestamps.
struct RawChannel {
    std::string name;
    std::vector<TimedValue> samples;
};

/// Maps channel names to CSV column names. The timestamp column is separate.
struct CsvSchema {
    std::string time_column = "t";
    std::map<std::string, std::string> channels;

    /// Identity schema over the five vehicle channels.
    static CsvSchema vehicle() {
        CsvSchema s;
        for (Channel c : kAllChannels) s.channels.emplace(channel_name(c), channel_name(c));
        return s;
    }

    static CsvSchema for_modality(Modality m) {
        CsvSchema s;
        const auto [a, b] = channel_pair(m);
        s.channels.emplace(channel_name(a), channel_name(a));
        s.channels.emplace(channel_name(b), channel_name(b));
        return s;
    }
};

struct NormParams {
    double min = 0.0;
    double max = 1.0;

    [[nodiscard]] double apply(double v) const { return (v - min) / (max - min); }
    [[nodiscard]] double invert(double u) const { return min + u * (max - min); }
    friend bool operator==(const NormParams&, const NormParams&) = default;
};

/// Channels resampled on a uniform grid. Row k sits at time t0 + k * dt.
struct SyncedSeries {
    double dt = 0.1;
    double t0 = 0.0;
    std::vector<std::string> names;
    Eigen::MatrixXd values; // rows = time, cols = channels
    /// Present once the series has been normalized (one entry per column).
    std::vector<NormParams> norm_params;

    [[nodiscard]] Eigen::Index length() const { return values.rows(); }
    [[nodiscard]] double time_at(Eigen::Index k) const { return t0 + static_cast<double>(k) * dt; }
    [[nodiscard]] bool normalized() const { return !norm_params.empty(); }

    [[nodiscard]] Eigen::Index column(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return static_cast<Eigen::Index>(i);
        }
        throw SchemaError("series has no channel '" + std::string(name) + "'");
    }
};

/// Rows are [X1, X2, dX1, dX2]; row i belongs to synced sample i + 1.
struct GeneralizedStateSequence {
    Eigen::Matrix<double, Eigen::Dynamic, 4> gs;
    double dt = 0.1;
    double t0 = 0.0; // time of the first row
    Modality modality = Modality::XY;

    [[nodiscard]] Eigen::Index length() const { return gs.rows(); }
    [[nodiscard]] Eigen::MatrixX2d states() const { return gs.leftCols<2>(); }
    [[nodiscard]] Eigen::MatrixX2d derivatives() const { return gs.rightCols<2>(); }
};

inline std::vector<RawChannel> parse_channels(const io::CsvTable& table, const CsvSchema& schema) {
    const auto tcol = table.column(schema.time_column);
    if (tcol < 0) throw SchemaError("missing timestamp column '" + schema.time_column + "'");
    std::vector<std::pair<std::string, std::ptrdiff_t>> cols;
    for (const auto& [name, column] : schema.channels) {
        const auto idx = table.column(column);
        if (idx < 0) throw SchemaError("missing column '" + column + "' for channel '" + name + "'");
        cols.emplace_back(name, idx);
    }
    if (table.rows.size() < 2) throw DataError("fewer than 2 samples");

    std::vector<RawChannel> out;
    out.reserve(cols.size());
    for (const auto& [name, idx] : cols) out.push_back(RawChannel{name, {}});

    double prev_t = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.line_numbers[r];
        if (row.size() != table.header.size()) {
            throw DataError("line " + std::to_string(line) + ": expected " + std::to_string(table.header.size()) +
                            " cells, got " + std::to_string(row.size()));
        }
        const double t = io::parse_double(row[static_cast<std::size_t>(tcol)], line);
        if (!(t > prev_t)) {
            throw DataError("line " + std::to_string(line) + ": timestamp " + row[static_cast<std::size_t>(tcol)] +
                            " is not strictly increasing");
        }
        prev_t = t;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const double v = io::parse_double(row[static_cast<std::size_t>(cols[c].second)], line);
            if (!std::isfinite(v)) throw DataError("line " + std::to_string(line) + ": non-finite value");
            out[c].samples.push_back({t, v});
        }
    }
    return out;
}

/// Reads a header-bearing CSV with one timestamp column (seconds).
inline std::vector<RawChannel> load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    return parse_channels(io::parse_csv(io::read_file(path)), schema);
}

namespace detail {

inline double interpolate(const std::vector<TimedValue>& s, double t, std::size_t& hint) {
    while (hint + 1 < s.size() && s[hint + 1].t < t) ++hint;
    if (t <= s.front().t) return s.front().value;
    if (t >= s.back().t) return s.back().value;
    const auto& a = s[hint];
    const auto& b = s[hint + 1];
    const double w = (t - a.t) / (b.t - a.t);
    return a.value + w * (b.value - a.value);
}

} // namespace detail

/// Linear interpolation of every channel onto a uniform grid spanning the
/// common time range. Output is not normalized.
inline SyncedSeries synchronize(const std::vector<RawChannel>& channels, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (channels.empty()) throw SyncError("no channels to synchronize");
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& ch : channels) {
        if (ch.samples.size() < 2) throw DataError("channel '" + ch.name + "' has fewer than 2 samples");
        for (std::size_t i = 1; i < ch.samples.size(); ++i) {
            if (!(ch.samples[i].t > ch.samples[i - 1].t)) {
                throw DataError("channel '" + ch.name + "' timestamps not strictly increasing at sample " +
                                std::to_string(i));
            }
        }
        lo = std::max(lo, ch.samples.front().t);
        hi = std::min(hi, ch.samples.back().t);
    }
    // grid tolerance absorbs round-off in t0 + k*dt
    const double tol = 1e-9 * std::max(1.0, std::abs(hi));
    if (hi - lo + tol < 2.0 * dt) {
        throw SyncError("channel time ranges overlap for less than 2*dt");
    }
    const auto n = static_cast<Eigen::Index>(std::floor((hi - lo) / dt + 1e-9)) + 1;

    SyncedSeries out;
    out.dt = dt;
    out.t0 = lo;
    out.values.resize(n, static_cast<Eigen::Index>(channels.size()));
    for (std::size_t c = 0; c < channels.size(); ++c) {
        out.names.push_back(channels[c].name);
        std::size_t hint = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            out.values(k, static_cast<Eigen::Index>(c)) = detail::interpolate(channels[c].samples, out.time_at(k), hint);
        }
    }
    return out;
}

/// Loads a CSV and resamples it on a uniform grid. dt <= 0 takes the mean
/// spacing of the recorded timestamps.
inline SyncedSeries load_series(const std::filesystem::path& path, const CsvSchema& schema, double dt = 0.0) {
    const auto channels = load_csv(path, schema);
    if (!(dt > 0.0)) {
        const auto& s = channels.front().samples;
        dt = (s.back().t - s.front().t) / static_cast<double>(s.size() - 1);
    }
    return synchronize(channels, dt);
}

/// Converts a synced series back into raw channels (one sample per grid row).
inline std::vector<RawChannel> to_channels(const SyncedSeries& s) {
    std::vector<RawChannel> out;
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
        RawChannel ch{s.names[static_cast<std::size_t>(c)], {}};
        ch.samples.reserve(static_cast<std::size_t>(s.length()));
        for (Eigen::Index k = 0; k < s.length(); ++k) ch.samples.push_back({s.time_at(k), s.values(k, c)});
        out.push_back(std::move(ch));
    }
    return out;
}

/// Scales with externally supplied parameters. Values outside [0,1] are kept.
inline SyncedSeries apply_normalization(const SyncedSeries& s, const std::vector<NormParams>& params) {
    if (params.size() != static_cast<std::size_t>(s.values.cols())) {
        throw ConfigError("normalization parameter count does not match channel count");
    }
    SyncedSeries out = s;
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
        const auto& p = params[static_cast<std::size_t>(c)];
        out.values.col(c) = (s.values.col(c).array() - p.min) / (p.max - p.min);
    }
    out.norm_params = params;
    return out;
}

/// Per-column min-max scaling to [0,1]; the fitted parameters are recorded
/// so test data can be scaled with the training ranges.
inline SyncedSeries normalize(const SyncedSeries& s) {
    std::vector<NormParams> params;
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
        const double lo = s.values.col(c).minCoeff();
        const double hi = s.values.col(c).maxCoeff();
        if (!(hi > lo)) {
            throw NormalizationError("channel '" + s.names[static_cast<std::size_t>(c)] + "' is constant");
        }
        params.push_back({lo, hi});
    }
    return apply_normalization(s, params);
}

inline SyncedSeries denormalize(const SyncedSeries& s) {
    if (!s.normalized()) return s;
    SyncedSeries out = s;
    for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
        const auto& p = s.norm_params[static_cast<std::size_t>(c)];
        out.values.col(c) = s.values.col(c).array() * (p.max - p.min) + p.min;
    }
    out.norm_params.clear();
    return out;
}

/// Restricts a multi-channel series to the two channels of a modality.
inline SyncedSeries select_modality(const SyncedSeries& s, Modality m) {
    const auto [a, b] = channel_pair(m);
    const Eigen::Index ia = s.column(channel_name(a));
    const Eigen::Index ib = s.column(channel_name(b));
    SyncedSeries out;
    out.dt = s.dt;
    out.t0 = s.t0;
    out.names = {std::string(channel_name(a)), std::string(channel_name(b))};
    out.values.resize(s.length(), 2);
    out.values.col(0) = s.values.col(ia);
    out.values.col(1) = s.values.col(ib);
    if (s.normalized()) {
        out.norm_params = {s.norm_params[static_cast<std::size_t>(ia)], s.norm_params[static_cast<std::size_t>(ib)]};
    }
    return out;
}

/// Generalized states of order one. The zero-force initial filter predicts
/// X_t = X_{t-1}; its innovation is the backward difference, so the
/// derivative block is (X_t - X_{t-1}) / dt. The first sample has no
/// predecessor and is dropped.
inline GeneralizedStateSequence estimate_generalized_states(const SyncedSeries& series, Modality modality) {
    if (series.values.cols() != 2) throw DataError("generalized states need exactly two channels");
    const Eigen::Index n = series.length();
    if (n < 2) throw DataError("need at least 2 samples for generalized states");
    GeneralizedStateSequence out;
    out.dt = series.dt;
    out.t0 = series.time_at(1);
    out.modality = modality;
    out.gs.resize(n - 1, 4);
    for (Eigen::Index k = 1; k < n; ++k) {
        const Vec2 cur = series.values.row(k).transpose();
        const Vec2 prev = series.values.row(k - 1).transpose();
        out.gs.row(k - 1) << cur.transpose(), ((cur - prev) / series.dt).transpose();
    }
    if (!out.gs.allFinite()) throw DataError("non-finite generalized state");
    return out;
}

inline std::string gs_to_csv(const GeneralizedStateSequence& g) {
    std::string out = "t,x1,x2,dx1,dx2\n";
    for (Eigen::Index k = 0; k < g.length(); ++k) {
        out += io::fmt_num(g.t0 + static_cast<double>(k) * g.dt);
        for (int c = 0; c < 4; ++c) {
            out += ',';
            out += io::fmt_num(g.gs(k, c));
        }
        out += '\n';
    }
    return out;
}

inline std::string series_to_csv(const SyncedSeries& s) {
    std::string out = "t";
    for (const auto& n : s.names) out += "," + n;
    out += '\n';
    for (Eigen::Index k = 0; k < s.length(); ++k) {
        out += io::fmt_num(s.time_at(k));
        for (Eigen::Index c = 0; c < s.values.cols(); ++c) out += "," + io::fmt_num(s.values(k, c));
        out += '\n';
    }
    return out;
}

} // namespace samjpf

#endif // SAMJPF_DATA_PIPELINE_HPP
