#ifndef SAMJPF_DETECTION_HPP
#define SAMJPF_DETECTION_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "samjpf/error.hpp"
#include "samjpf/mjpf.hpp"

namespace samjpf {

/// Consecutive super-threshold samples needed to count a detection.
inline constexpr int kDefaultMinRun = 3;

struct ModalityReport {
    Modality modality = Modality::XY;
    std::size_t windows = 0;
    std::size_t windows_detected = 0;
    /// Fraction of truth windows holding a qualifying run.
    double recall = 0.0;
    /// Fraction of out-of-window samples that belong to a qualifying run.
    double false_alarm_rate = 0.0;
    /// Qualifying out-of-window runs per minute of out-of-window time.
    double false_alarms_per_minute = 0.0;
    double mean_theta_inside = 0.0;
    double mean_theta_outside = 0.0;
    double ms_per_sample = 0.0;
};

/// Longest run of consecutive samples above `threshold` whose times all fall
/// inside `w`.
inline int longest_run_inside(const AnomalyTrace& trace, const TimeWindow& w, double threshold) {
    int best = 0;
    int run = 0;
    for (const auto& s : trace.samples) {
        if (w.contains(s.t) && s.theta > threshold) {
            best = std::max(best, ++run);
        } else {
            run = 0;
        }
    }
    return best;
}

/// Longest super-threshold run anywhere in the trace.
inline int longest_run(const AnomalyTrace& trace, double threshold) {
    return longest_run_inside(trace, TimeWindow{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
                              threshold);
}

inline void check_windows(const AnomalyTrace& trace, const std::vector<TimeWindow>& windows) {
    if (trace.samples.empty()) throw EvalError("empty trace");
    const double lo = trace.samples.front().t;
    const double hi = trace.samples.back().t;
    for (const auto& w : windows) {
        if (!(w.t_end >= w.t_start)) throw EvalError("truth window ends before it starts");
        if (w.t_start > hi || w.t_end < lo) throw EvalError("truth window lies outside the trace time range");
    }
}

inline ModalityReport evaluate_trace(const AnomalyTrace& trace, const std::vector<TimeWindow>& windows, double threshold,
                                     int min_run = kDefaultMinRun) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
    if (min_run < 1) throw ConfigError("minimum run length must be >= 1");
    check_windows(trace, windows);
    ModalityReport rep;
    rep.modality = trace.modality;
    rep.windows = windows.size();
    rep.ms_per_sample = trace.ms_per_sample;
    for (const auto& w : windows) {
        if (longest_run_inside(trace, w, threshold) >= min_run) ++rep.windows_detected;
    }
    rep.recall = windows.empty() ? 0.0 : static_cast<double>(rep.windows_detected) / static_cast<double>(windows.size());

    auto inside = [&](double t) {
        return std::any_of(windows.begin(), windows.end(), [&](const TimeWindow& w) { return w.contains(t); });
    };
    double sum_in = 0.0, sum_out = 0.0;
    std::size_t n_in = 0, n_out = 0, flagged = 0, runs = 0;
    std::size_t run = 0;
    auto close_run = [&] {
        if (run >= static_cast<std::size_t>(min_run)) {
            flagged += run;
            ++runs;
        }
        run = 0;
    };
    for (const auto& s : trace.samples) {
        if (inside(s.t)) {
            sum_in += s.theta;
            ++n_in;
            close_run();
            continue;
        }
        sum_out += s.theta;
        ++n_out;
        if (s.theta > threshold) {
            ++run;
        } else {
            close_run();
        }
    }
    close_run();
    rep.mean_theta_inside = n_in ? sum_in / static_cast<double>(n_in) : 0.0;
    rep.mean_theta_outside = n_out ? sum_out / static_cast<double>(n_out) : 0.0;
    rep.false_alarm_rate = n_out ? static_cast<double>(flagged) / static_cast<double>(n_out) : 0.0;
    if (n_out > 1) {
        const double dt = (trace.samples.back().t - trace.samples.front().t) / static_cast<double>(trace.samples.size() - 1);
        const double minutes = static_cast<double>(n_out) * dt / 60.0;
        rep.false_alarms_per_minute = minutes > 0 ? static_cast<double>(runs) / minutes : 0.0;
    }
    return rep;
}

/// Threshold at the given quantile of theta on a normal (anomaly-free) trace.
inline double calibrate_threshold(const AnomalyTrace& normal, double quantile = 0.95) {
    if (normal.samples.empty()) throw EvalError("calibration trace is empty");
    std::vector<double> th;
    th.reserve(normal.samples.size());
    for (const auto& s : normal.samples) th.push_back(s.theta);
    std::sort(th.begin(), th.end());
    const double pos = quantile * static_cast<double>(th.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    const double v = i + 1 < th.size() ? th[i] * (1.0 - frac) + th[i + 1] * frac : th[i];
    return std::clamp(v, 1e-6, 1.0 - 1e-6);
}

inline nlohmann::json report_to_json(const ModalityReport& r) {
    return {{"modality", modality_name(r.modality)},
            {"windows", r.windows},
            {"windows_detected", r.windows_detected},
            {"recall", r.recall},
            {"false_alarm_rate", r.false_alarm_rate},
            {"false_alarms_per_minute", r.false_alarms_per_minute},
            {"mean_theta_inside", r.mean_theta_inside},
            {"mean_theta_outside", r.mean_theta_outside},
            {"ms_per_sample", r.ms_per_sample}};
}

} // namespace samjpf

#endif // SAMJPF_DETECTION_HPP
