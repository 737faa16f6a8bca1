#include <catch_amalgamated.hpp>

#include <random>

#include "samjpf/detection.hpp"

using namespace samjpf;
using Catch::Approx;

namespace {

// Samples at t = k * dt with the given theta values.
AnomalyTrace make_trace(const std::vector<double>& theta, double dt = 1.0) {
    AnomalyTrace tr;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        AnomalySample s;
        s.step = static_cast<long>(k);
        s.t = static_cast<double>(k) * dt;
        s.theta = theta[k];
        s.lambda = 1.0 - theta[k] * theta[k];
        tr.samples.push_back(s);
    }
    return tr;
}

} // namespace

TEST_CASE("quiet trace: recall 0, no false alarms") {
    const auto tr = make_trace(std::vector<double>(20, 0.1));
    const auto r = evaluate_trace(tr, {{5.0, 10.0}}, 0.3);
    CHECK(r.windows == 1);
    CHECK(r.windows_detected == 0);
    CHECK(r.recall == 0.0);
    CHECK(r.false_alarm_rate == 0.0);
    CHECK(r.false_alarms_per_minute == 0.0);
    CHECK(r.mean_theta_inside == Approx(0.1));
    CHECK(r.mean_theta_outside == Approx(0.1));
}

TEST_CASE("theta 1 inside the window and 0 outside: recall 1, no false alarms") {
    std::vector<double> th(20, 0.0);
    for (int k = 5; k <= 10; ++k) th[static_cast<std::size_t>(k)] = 1.0;
    const auto r = evaluate_trace(make_trace(th), {{5.0, 10.0}}, 0.3, 3);
    CHECK(r.recall == 1.0);
    CHECK(r.false_alarm_rate == 0.0);
    CHECK(r.mean_theta_inside == 1.0);
    CHECK(r.mean_theta_outside == 0.0);
}

TEST_CASE("runs shorter than the minimum do not count") {
    std::vector<double> th(20, 0.0);
    th[6] = th[7] = 0.9;
    const std::vector<TimeWindow> w{{5.0, 10.0}};
    CHECK(evaluate_trace(make_trace(th), w, 0.3, 3).recall == 0.0);
    CHECK(evaluate_trace(make_trace(th), w, 0.3, 2).recall == 1.0);
    // a run straddling the window edge only counts its inside part
    std::vector<double> edge(20, 0.0);
    for (int k = 9; k <= 13; ++k) edge[static_cast<std::size_t>(k)] = 0.9;
    CHECK(longest_run_inside(make_trace(edge), w[0], 0.3) == 2);
    CHECK(longest_run(make_trace(edge), 0.3) == 5);
    // equal to the threshold is not above it
    CHECK(longest_run(make_trace(std::vector<double>(5, 0.3)), 0.3) == 0);
}

TEST_CASE("false alarm arithmetic") {
    // 30 samples at 2 s, window covers t in [0, 18] (10 samples), 20 outside
    std::vector<double> th(30, 0.0);
    for (int k = 15; k < 19; ++k) th[static_cast<std::size_t>(k)] = 0.8; // qualifying run of 4
    th[25] = 0.8;                                                       // lone spike, ignored
    const auto r = evaluate_trace(make_trace(th, 2.0), {{0.0, 18.0}}, 0.3, 3);
    CHECK(r.false_alarm_rate == Approx(4.0 / 20.0));
    // one run over 20 samples * 2 s = 40 s
    CHECK(r.false_alarms_per_minute == Approx(1.0 / (40.0 / 60.0)));
    CHECK(r.recall == 0.0);
}

TEST_CASE("several windows are scored independently") {
    std::vector<double> th(40, 0.0);
    for (int k = 2; k <= 6; ++k) th[static_cast<std::size_t>(k)] = 0.7;
    const auto r = evaluate_trace(make_trace(th), {{1.0, 8.0}, {20.0, 30.0}}, 0.3);
    CHECK(r.windows == 2);
    CHECK(r.windows_detected == 1);
    CHECK(r.recall == 0.5);
}

TEST_CASE("raising the threshold never raises recall or false alarms") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> th(120);
        // bursty traces so runs of all lengths appear
        double level = u(rng);
        for (auto& v : th) {
            if (u(rng) < 0.1) level = u(rng);
            v = std::clamp(level + 0.1 * (u(rng) - 0.5), 0.0, 1.0);
        }
        const auto tr = make_trace(th);
        const std::vector<TimeWindow> w{{10.0, 30.0}, {60.0, 75.0}};
        ModalityReport prev = evaluate_trace(tr, w, 0.01);
        for (double thr = 0.05; thr < 1.0; thr += 0.05) {
            const auto r = evaluate_trace(tr, w, thr);
            CHECK(r.recall <= prev.recall);
            CHECK(r.false_alarm_rate <= prev.false_alarm_rate);
            CHECK(r.false_alarm_rate >= 0.0);
            CHECK(r.false_alarm_rate <= 1.0);
            prev = r;
        }
    }
}

TEST_CASE("calibration picks the requested quantile") {
    std::vector<double> th;
    for (int k = 0; k <= 100; ++k) th.push_back(k / 100.0);
    std::shuffle(th.begin(), th.end(), std::mt19937_64(3));
    const auto tr = make_trace(th);
    CHECK(calibrate_threshold(tr, 0.95) == Approx(0.95));
    CHECK(calibrate_threshold(tr, 0.5) == Approx(0.5));
    // interpolation between order statistics
    CHECK(calibrate_threshold(make_trace({0.0, 1.0}), 0.25) == Approx(0.25));
    // clamped into the open interval so it is a valid threshold
    const double c = calibrate_threshold(make_trace({0.0, 0.0, 0.0}), 0.95);
    CHECK(c > 0.0);
    CHECK(c < 1.0);
    CHECK_THROWS_AS(calibrate_threshold(AnomalyTrace{}), EvalError);
}

TEST_CASE("bad inputs are rejected") {
    const auto tr = make_trace(std::vector<double>(10, 0.0));
    CHECK_THROWS_AS(evaluate_trace(tr, {{50.0, 60.0}}, 0.3), EvalError);
    CHECK_THROWS_AS(evaluate_trace(tr, {{5.0, 2.0}}, 0.3), EvalError);
    CHECK_THROWS_AS(evaluate_trace(AnomalyTrace{}, {}, 0.3), EvalError);
    CHECK_THROWS_AS(evaluate_trace(tr, {}, 0.0), ConfigError);
    CHECK_THROWS_AS(evaluate_trace(tr, {}, 1.0), ConfigError);
    CHECK_THROWS_AS(evaluate_trace(tr, {}, 0.3, 0), ConfigError);
    // no windows: recall 0 by convention, everything is outside
    const auto r = evaluate_trace(tr, {}, 0.3);
    CHECK(r.windows == 0);
    CHECK(r.recall == 0.0);
}

TEST_CASE("report serializes every metric") {
    std::vector<double> th(20, 0.0);
    for (int k = 5; k <= 10; ++k) th[static_cast<std::size_t>(k)] = 1.0;
    auto tr = make_trace(th);
    tr.modality = Modality::VP;
    tr.ms_per_sample = 0.25;
    const auto j = report_to_json(evaluate_trace(tr, {{5.0, 10.0}}, 0.3));
    CHECK(j.at("modality") == "VP");
    CHECK(j.at("recall") == 1.0);
    CHECK(j.at("windows") == 1);
    CHECK(j.at("ms_per_sample") == 0.25);
    for (const char* key : {"false_alarm_rate", "false_alarms_per_minute", "mean_theta_inside", "mean_theta_outside"}) {
        CHECK(j.contains(key));
    }
}
