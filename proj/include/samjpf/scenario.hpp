#ifndef SAMJPF_SCENARIO_HPP
#define SAMJPF_SCENARIO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "samjpf/data_pipeline.hpp"
#include "samjpf/error.hpp"
#include "samjpf/io.hpp"
#include "samjpf/types.hpp"

namespace samjpf {

enum class ScenarioKind { PMT, ES1, ES2, PedAvoid };

inline std::string_view scenario_name(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::PMT: return "pmt";
    case ScenarioKind::ES1: return "es1";
    case ScenarioKind::ES2: return "es2";
    case ScenarioKind::PedAvoid: return "ped_avoid";
    }
    return "?";
}

inline ScenarioKind parse_scenario(std::string_view s) {
    std::string low(s);
    for (auto& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (low == "pmt") return ScenarioKind::PMT;
    if (low == "es1") return ScenarioKind::ES1;
    if (low == "es2") return ScenarioKind::ES2;
    if (low == "ped_avoid" || low == "ped-avoid" || low == "pedavoid") return ScenarioKind::PedAvoid;
    throw SpecError("unknown scenario '" + std::string(s) + "'");
}

/// Rounded rectangle driven counterclockwise. Arc length 0 is the middle of
/// the bottom edge.
struct Course {
    double width = 38.0;
    double height = 33.0;
    double corner_radius = 2.0;

    [[nodiscard]] double straight_x() const { return width - 2.0 * corner_radius; }
    [[nodiscard]] double straight_y() const { return height - 2.0 * corner_radius; }
    [[nodiscard]] double arc_length() const { return 0.5 * std::numbers::pi * corner_radius; }
    [[nodiscard]] double perimeter() const { return 2.0 * (straight_x() + straight_y()) + 4.0 * arc_length(); }
    [[nodiscard]] Vec2 center() const { return {0.5 * width, 0.5 * height}; }

    struct Pose {
        Vec2 pos;
        Vec2 tangent;
        double curvature = 0.0;
        bool on_straight = true;
    };

    [[nodiscard]] Pose pose(double s) const {
        const double per = perimeter();
        // measure from the start of the bottom straight
        double u = std::fmod(s + 0.5 * straight_x(), per);
        if (u < 0) u += per;
        const double r = corner_radius;
        const double arc = arc_length();
        const double seg[] = {straight_x(), arc, straight_y(), arc, straight_x(), arc, straight_y(), arc};
        const Vec2 dirs[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const Vec2 starts[] = {{r, 0.0}, {width, r}, {width - r, height}, {0.0, height - r}};
        const Vec2 arc_centers[] = {{width - r, r}, {width - r, height - r}, {r, height - r}, {r, r}};
        int i = 0;
        while (i < 7 && u >= seg[i]) u -= seg[i++];
        Pose p;
        if (i % 2 == 0) {
            const int side = i / 2;
            p.pos = starts[side] + dirs[side] * u;
            p.tangent = dirs[side];
        } else {
            const int corner = i / 2;
            const double ang = -0.5 * std::numbers::pi * (1 - corner) + std::min(u, arc) / r;
            p.pos = arc_centers[corner] + r * Vec2(std::cos(ang), std::sin(ang));
            p.tangent = Vec2(-std::sin(ang), std::cos(ang));
            p.curvature = 1.0 / r;
            p.on_straight = false;
        }
        return p;
    }

    /// Arc length of the nearest course point (coarse search then refinement).
    [[nodiscard]] double project(const Vec2& q) const {
        const double per = perimeter();
        double best_s = 0.0;
        double best_d = std::numeric_limits<double>::infinity();
        const int n = 720;
        for (int i = 0; i < n; ++i) {
            const double s = per * i / n;
            const double d = (pose(s).pos - q).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best_s = s;
            }
        }
        double step = per / n;
        for (int it = 0; it < 30; ++it) {
            step *= 0.5;
            for (const double cand : {best_s - step, best_s + step}) {
                const double d = (pose(cand).pos - q).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best_s = cand;
                }
            }
        }
        best_s = std::fmod(best_s, per);
        return best_s < 0 ? best_s + per : best_s;
    }
};

struct VehicleParams {
    double cruise_speed = 1.5;
    double corner_speed = 1.25;
    /// Distance before an arc where the vehicle is already at corner speed.
    double corner_approach = 1.5;
    double max_accel = 0.5;
    double max_jerk = 0.5;
    double speed_gain = 1.5;
    double wheelbase = 1.5;
    /// Width (m) of the Gaussian that smooths path curvature into steering
    /// and the corner slow-down into the speed target.
    double smoothing = 2.0;
};

/// power = c1|v| + c2|a| + c3|steering||v|; during an emergency stop the
/// drive is reversed into regenerative braking, giving the negated value.
struct PowerModel {
    double c1 = 1.0;
    double c2 = 0.5;
    double c3 = 0.15;
};

struct NoiseSpec {
    double position = 0.01;
    double steering = 0.003;
    double velocity = 0.005;
    double power = 0.01;
};

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::PMT;
    int laps = 4;
    int samples_per_lap = 800;
    Course course;
    VehicleParams vehicle;
    PowerModel power;
    NoiseSpec noise;
    /// Sampling period; 0 derives it from the course perimeter, cruise speed and samples_per_lap.
    double dt = 0.0;
    double follower_gap = 5.0;
    double reaction_delay = 0.5;
    double dwell = 8.0;
    double start_hold = 3.0;
    /// Event placement in laps of course arc length (1.5 = middle of the top
    /// edge on the second lap). Empty selects per-scenario defaults.
    std::vector<double> event_laps;
    double detour_offset = 2.0;
    double detour_length = 12.0;
    bool clockwise = false;
    std::uint64_t seed = 1;

    [[nodiscard]] double sample_dt() const {
        return dt > 0.0 ? dt : course.perimeter() / (vehicle.cruise_speed * samples_per_lap);
    }
    [[nodiscard]] int num_samples() const { return laps * samples_per_lap; }

    [[nodiscard]] std::vector<double> events() const {
        if (!event_laps.empty() || kind == ScenarioKind::PMT) return event_laps;
        if (kind == ScenarioKind::PedAvoid) return {1.25, 2.5};
        return {1.5, 2.75};
    }

    void validate() const {
        if (laps < 1) throw SpecError("laps must be >= 1");
        if (samples_per_lap < 100) throw SpecError("samples_per_lap must be >= 100");
        if (noise.position < 0 || noise.steering < 0 || noise.velocity < 0 || noise.power < 0) {
            throw SpecError("noise sigmas must be >= 0");
        }
        if (dt < 0) throw SpecError("dt must be >= 0");
        if (course.corner_radius <= 0 || course.straight_x() <= 0 || course.straight_y() <= 0) {
            throw SpecError("course dimensions are inconsistent");
        }
        if (vehicle.cruise_speed <= 0 || vehicle.corner_speed <= 0 || vehicle.max_accel <= 0 || vehicle.max_jerk <= 0 ||
            vehicle.smoothing <= 0) {
            throw SpecError("vehicle speeds and limits must be positive");
        }
        if (follower_gap <= 0 || reaction_delay < 0 || dwell < 0 || start_hold < 0) throw SpecError("bad timing parameters");
        if (kind == ScenarioKind::PedAvoid && (detour_length <= 0 || detour_offset <= 0)) throw SpecError("bad detour geometry");
    }
};

struct TruthWindow {
    std::string agent;
    double t_start = 0.0;
    double t_end = 0.0;
    std::string cause;
};

struct AgentTrace {
    std::string agent;
    /// Rows t_k = k*dt; columns x, y, steering, velocity, power.
    SyncedSeries series;
};

struct ScenarioDataset {
    ScenarioSpec spec;
    std::vector<AgentTrace> agents;
    std::vector<TruthWindow> truth_windows;

    [[nodiscard]] const AgentTrace& agent(const std::string& name) const {
        for (const auto& a : agents) {
            if (a.agent == name) return a;
        }
        throw SchemaError("no agent '" + name + "' in dataset");
    }
};

inline const std::vector<std::string>& vehicle_channel_names() {
    static const std::vector<std::string> names = {"x", "y", "steering", "velocity", "power"};
    return names;
}

namespace detail {

/// Lateral offset (positive = outward) of a pedestrian detour centred at s_c.
struct Detour {
    double s_center = 0.0;
    double length = 12.0;
    double offset = 2.0;

    [[nodiscard]] bool active(double s) const { return std::abs(s - s_center) < 0.5 * length; }
    // offset, first and second derivative in s
    [[nodiscard]] Eigen::Vector3d eval(double s) const {
        if (!active(s)) return Eigen::Vector3d::Zero();
        const double u = (s - (s_center - 0.5 * length)) / length;
        const double w = 2.0 * std::numbers::pi / length;
        return {0.5 * offset * (1.0 - std::cos(2.0 * std::numbers::pi * u)), 0.5 * offset * w * std::sin(2.0 * std::numbers::pi * u),
                0.5 * offset * w * w * std::cos(2.0 * std::numbers::pi * u)};
    }
};

enum class Phase { Hold, Drive, Brake, Dwell };

struct VehicleState {
    double s = 0.0;
    double v = 0.0;
    double a = 0.0;
    Phase phase = Phase::Hold;
    bool emergency = false;
    double phase_time = 0.0;
};

/// Scheduled stop: brake at t_brake, restart at t_restart (or never).
struct StopCommand {
    double t_brake = 0.0;
    std::optional<double> t_restart;
    bool emergency = false;
};

struct VehiclePlan {
    double s0 = 0.0;
    double t_go = 0.0;
    std::vector<StopCommand> stops; // sorted by t_brake
    std::vector<Detour> detours;
};

struct RawSample {
    Vec2 pos;
    double steer = 0.0;
    double v = 0.0;
    double power = 0.0;
};

struct SimRecord {
    std::vector<RawSample> samples;
    std::vector<double> s_at_sample;
    std::vector<double> brake_times;
    std::vector<double> stopped_times;
    std::vector<double> restart_times;
    std::vector<std::pair<double, double>> detour_times;
};

/// Smoothed steering and speed-target profiles over arc length.
class PathProfile {
public:
    PathProfile(const ScenarioSpec& spec, const std::vector<Detour>& detours, double s_lo, double s_hi)
        : lo_(s_lo - 4.0 * spec.vehicle.smoothing), ds_(0.05) {
        const auto n = static_cast<std::size_t>((s_hi - lo_ + 4.0 * spec.vehicle.smoothing) / ds_) + 2;
        const Course& c = spec.course;
        const double per = c.perimeter();
        const double arc = c.arc_length();
        const double first_arc = 0.5 * c.straight_x();
        const double arc_starts[] = {first_arc, first_arc + arc + c.straight_y(), first_arc + 2 * arc + c.straight_y() + c.straight_x(),
                                     first_arc + 3 * arc + 2 * c.straight_y() + c.straight_x()};
        std::vector<double> curv(n), slow(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = lo_ + static_cast<double>(i) * ds_;
            curv[i] = c.pose(s).curvature;
            for (const auto& d : detours) {
                if (d.active(s)) {
                    const auto e = d.eval(s);
                    // an outward offset bends the path to the right first
                    curv[i] = -e(2) / std::pow(1.0 + e(1) * e(1), 1.5);
                }
            }
            double u = std::fmod(s, per);
            if (u < 0) u += per;
            for (const double st : arc_starts) {
                const double rel = u - st;
                if (rel > -spec.vehicle.corner_approach && rel < arc) slow[i] = 1.0;
            }
        }
        const double sigma = spec.vehicle.smoothing;
        const int half = static_cast<int>(3.0 * sigma / ds_);
        std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
        double ksum = 0.0;
        for (int j = -half; j <= half; ++j) {
            const double x = j * ds_ / sigma;
            ksum += kernel[static_cast<std::size_t>(j + half)] = std::exp(-0.5 * x * x);
        }
        steer_.resize(n);
        vtarget_.resize(n);
        const auto& vp = spec.vehicle;
        for (std::size_t i = 0; i < n; ++i) {
            double kc = 0.0, ks = 0.0;
            for (int j = -half; j <= half; ++j) {
                const auto idx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) + j, 0, static_cast<std::ptrdiff_t>(n) - 1);
                const double w = kernel[static_cast<std::size_t>(j + half)];
                kc += w * curv[static_cast<std::size_t>(idx)];
                ks += w * slow[static_cast<std::size_t>(idx)];
            }
            steer_[i] = std::atan(vp.wheelbase * kc / ksum);
            vtarget_[i] = vp.cruise_speed - (vp.cruise_speed - vp.corner_speed) * ks / ksum;
        }
    }

    [[nodiscard]] double steering(double s) const { return lookup(steer_, s); }
    [[nodiscard]] double target_speed(double s) const { return lookup(vtarget_, s); }

private:
    [[nodiscard]] double lookup(const std::vector<double>& v, double s) const {
        const double x = std::clamp((s - lo_) / ds_, 0.0, static_cast<double>(v.size() - 2));
        const auto i = static_cast<std::size_t>(x);
        const double f = x - static_cast<double>(i);
        return v[i] * (1.0 - f) + v[i + 1] * f;
    }

    double lo_;
    double ds_;
    std::vector<double> steer_;
    std::vector<double> vtarget_;
};

/// Integrates one vehicle at a fine internal step and records samples at dt.
/// Stops listed in the plan fire at their scheduled times.
inline SimRecord simulate_vehicle(const ScenarioSpec& spec, const VehiclePlan& plan, int n_samples, double dt) {
    const auto& vp = spec.vehicle;
    const auto& pw = spec.power;
    const int sub = 10;
    const double h = dt / sub;
    VehicleState st;
    st.s = plan.s0;
    SimRecord rec;
    std::size_t next_stop = 0;
    constexpr double never = std::numeric_limits<double>::infinity();
    double restart_at = never; // final stops never restart
    double t = 0.0;
    const PathProfile profile(spec, plan.detours, plan.s0, plan.s0 + 1.05 * vp.cruise_speed * n_samples * dt + 10.0);
    auto geometry = [&](double s, Vec2& pos, double& stretch, bool& in_detour) {
        const auto p = spec.course.pose(s);
        Vec2 normal_out(p.tangent.y(), -p.tangent.x());
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        in_detour = false;
        for (const auto& det : plan.detours) {
            if (det.active(s)) {
                d = det.eval(s);
                in_detour = true;
            }
        }
        pos = p.pos + d(0) * normal_out;
        stretch = std::sqrt(1.0 + d(1) * d(1));
    };
    bool was_in_detour = false;
    double detour_start = 0.0;
    for (int k = 0; k < n_samples; ++k) {
        for (int j = 0; j < (k == 0 ? 1 : sub); ++j) {
            if (k > 0) {
                // phase transitions
                if (st.phase == Phase::Hold && t >= plan.t_go) st.phase = Phase::Drive;
                if ((st.phase == Phase::Drive || st.phase == Phase::Hold) && next_stop < plan.stops.size() &&
                    t >= plan.stops[next_stop].t_brake) {
                    const auto& cmd = plan.stops[next_stop++];
                    st.phase = st.phase == Phase::Hold ? Phase::Dwell : Phase::Brake;
                    st.emergency = cmd.emergency;
                    restart_at = cmd.t_restart.value_or(never);
                    rec.brake_times.push_back(t);
                }
                if (st.phase == Phase::Brake && st.v < 0.01) {
                    st.v = 0.0;
                    st.a = 0.0;
                    st.phase = Phase::Dwell;
                    rec.stopped_times.push_back(t);
                }
                if (st.phase == Phase::Dwell && t >= restart_at) {
                    st.phase = Phase::Drive;
                    st.emergency = false;
                    rec.restart_times.push_back(t);
                    restart_at = never;
                }

                double a_des = 0.0;
                if (st.phase == Phase::Drive) {
                    a_des = std::clamp(vp.speed_gain * (profile.target_speed(st.s) - st.v), -vp.max_accel, vp.max_accel);
                } else if (st.phase == Phase::Brake) {
                    // full deceleration, eased out over the last 0.2 m/s
                    a_des = -vp.max_accel * std::min(1.0, st.v / 0.2);
                }
                st.a += std::clamp(a_des - st.a, -vp.max_jerk * h, vp.max_jerk * h);
                st.v += st.a * h;
                if (st.v < 0.0) {
                    st.v = 0.0;
                    st.a = std::max(st.a, 0.0);
                }
                if (st.phase == Phase::Dwell || st.phase == Phase::Hold) {
                    st.v = 0.0;
                    st.a = 0.0;
                }
                Vec2 pos;
                double stretch = 1.0;
                bool in_det = false;
                geometry(st.s, pos, stretch, in_det);
                st.s += st.v * h / stretch;
                t += h;
            }
        }
        t = k * dt; // keep the sample clock exact
        Vec2 pos;
        double stretch = 1.0;
        bool in_det = false;
        geometry(st.s, pos, stretch, in_det);
        if (in_det && !was_in_detour) detour_start = t;
        if (!in_det && was_in_detour) rec.detour_times.emplace_back(detour_start, t);
        was_in_detour = in_det;

        RawSample r;
        r.pos = pos;
        r.steer = profile.steering(st.s);
        r.v = st.v;
        const double p = pw.c1 * st.v + pw.c2 * std::abs(st.a) + pw.c3 * std::abs(r.steer) * st.v;
        r.power = st.emergency ? -p : p;
        rec.samples.push_back(r);
        rec.s_at_sample.push_back(st.s);
    }
    if (was_in_detour) rec.detour_times.emplace_back(detour_start, (n_samples - 1) * dt);
    return rec;
}

/// First sample time at which the recorded arc length reaches `s_target`.
inline std::optional<double> time_reaching(const SimRecord& rec, double s_target, double dt) {
    for (std::size_t k = 0; k < rec.s_at_sample.size(); ++k) {
        if (rec.s_at_sample[k] >= s_target) return static_cast<double>(k) * dt;
    }
    return std::nullopt;
}

/// Latest time a mid-straight point is reached while leaving `margin` seconds.
inline std::optional<double> final_brake_time(const ScenarioSpec& spec, const SimRecord& rec, double dt, double margin) {
    const double per = spec.course.perimeter();
    const double t_end = (static_cast<double>(rec.s_at_sample.size()) - 1.0) * dt - margin;
    std::optional<double> best;
    const double s_last = rec.s_at_sample.back();
    for (int q = 1; q * 0.25 * per <= s_last; ++q) {
        const auto t = time_reaching(rec, q * 0.25 * per, dt);
        if (t && *t <= t_end) best = t;
    }
    return best;
}

inline SyncedSeries to_series(const SimRecord& rec, double dt, const NoiseSpec& noise, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    SyncedSeries s;
    s.dt = dt;
    s.t0 = 0.0;
    s.names = vehicle_channel_names();
    const auto n = static_cast<Eigen::Index>(rec.samples.size());
    s.values.resize(n, 5);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& r = rec.samples[static_cast<std::size_t>(k)];
        s.values(k, 0) = r.pos.x() + noise.position * g(rng);
        s.values(k, 1) = r.pos.y() + noise.position * g(rng);
        s.values(k, 2) = r.steer + noise.steering * g(rng);
        s.values(k, 3) = r.v + noise.velocity * g(rng);
        s.values(k, 4) = r.power + noise.power * g(rng);
    }
    return s;
}

} // namespace detail

/// Deterministic synthetic two-vehicle dataset. PMT, ES1 and ES2 emit a
/// leader ("icab1") and a follower ("icab2"); PED_AVOID emits one vehicle.
/// Every run starts from standstill and ends with a service stop.
inline ScenarioDataset generate(const ScenarioSpec& spec) {
    using namespace detail;
    spec.validate();
    const double dt = spec.sample_dt();
    const int n = spec.num_samples();
    const double per = spec.course.perimeter();
    const double brake_margin = 7.0;
    const auto events = spec.events();
    const bool two_agents = spec.kind != ScenarioKind::PedAvoid;

    VehiclePlan leader;
    leader.s0 = two_agents ? spec.follower_gap : 0.0;
    leader.t_go = spec.start_hold;
    VehiclePlan follower;
    follower.s0 = 0.0;
    follower.t_go = spec.start_hold + spec.reaction_delay;

    auto check_event = [&](const std::optional<double>& t, double lap) {
        if (!t) throw SpecError("event at lap " + io::fmt_num(lap) + " falls outside the trace");
        return *t;
    };

    // Pass 1: place scheduled events against an undisturbed run.
    if (spec.kind == ScenarioKind::PedAvoid) {
        for (const double lap : events) {
            leader.detours.push_back(Detour{lap * per, spec.detour_length, spec.detour_offset});
        }
    }
    // Leader stops (ES1) are resolved sequentially since each one delays the rest.
    if (spec.kind == ScenarioKind::ES1) {
        for (const double lap : events) {
            const auto rec = simulate_vehicle(spec, leader, n, dt);
            const double tb = check_event(time_reaching(rec, lap * per, dt), lap);
            leader.stops.push_back(StopCommand{tb, std::nullopt, true});
            auto rec2 = simulate_vehicle(spec, leader, n, dt);
            if (rec2.stopped_times.size() < leader.stops.size()) throw SpecError("stop does not complete inside the trace");
            leader.stops.back().t_restart = rec2.stopped_times.back() + spec.dwell;
        }
        for (const auto& cmd : leader.stops) {
            follower.stops.push_back(StopCommand{cmd.t_brake + spec.reaction_delay,
                                                 *cmd.t_restart + spec.reaction_delay, true});
        }
    }
    if (spec.kind == ScenarioKind::ES2) {
        for (const double lap : events) {
            const auto rec = simulate_vehicle(spec, follower, n, dt);
            const double tb = check_event(time_reaching(rec, lap * per, dt), lap);
            follower.stops.push_back(StopCommand{tb, std::nullopt, true});
            auto rec2 = simulate_vehicle(spec, follower, n, dt);
            if (rec2.stopped_times.size() < follower.stops.size()) throw SpecError("stop does not complete inside the trace");
            follower.stops.back().t_restart = rec2.stopped_times.back() + spec.dwell;
        }
    }

    // Pass 2: final service stop on a straight near the end of the trace.
    const auto lead_rec = simulate_vehicle(spec, leader, n, dt);
    const auto t_final = final_brake_time(spec, lead_rec, dt, brake_margin);
    if (!t_final) throw SpecError("trace too short for a final stop");
    if (!leader.stops.empty() && *t_final <= leader.stops.back().t_restart.value_or(0.0)) {
        throw SpecError("events leave no room for the final stop");
    }
    leader.stops.push_back(StopCommand{*t_final, std::nullopt, false});
    double t_follow_final = *t_final + spec.reaction_delay;
    if (!follower.stops.empty() && follower.stops.back().t_restart && t_follow_final <= *follower.stops.back().t_restart) {
        throw SpecError("events leave no room for the final stop");
    }
    follower.stops.push_back(StopCommand{t_follow_final, std::nullopt, false});

    ScenarioDataset ds;
    ds.spec = spec;
    std::mt19937_64 rng(spec.seed);
    auto emit = [&](const std::string& name, const VehiclePlan& plan) {
        auto rec = simulate_vehicle(spec, plan, n, dt);
        for (std::size_t i = 0; i < plan.stops.size(); ++i) {
            if (!plan.stops[i].emergency) continue;
            if (i >= rec.restart_times.size()) throw SpecError("emergency stop of " + name + " does not finish");
            ds.truth_windows.push_back(TruthWindow{name, rec.brake_times.at(i), rec.restart_times.at(i), "emergency_stop"});
        }
        for (const auto& [a, b] : rec.detour_times) ds.truth_windows.push_back(TruthWindow{name, a, b, "pedestrian_avoidance"});
        AgentTrace tr{name, to_series(rec, dt, spec.noise, rng)};
        if (spec.clockwise) {
            tr.series.values.col(1) = spec.course.height - tr.series.values.col(1).array();
            tr.series.values.col(2) *= -1.0;
        }
        ds.agents.push_back(std::move(tr));
    };
    emit("icab1", leader);
    if (two_agents) emit("icab2", follower);
    return ds;
}

// Self check ---------------------------------------------------------------

struct SelfCheckReport {
    std::vector<std::string> violations;
    /// One entry per truth window: did the agent hold still inside it.
    std::vector<bool> stationary;

    [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Signed area enclosed by each full lap around the course centre.
inline std::vector<double> lap_signed_areas(const SyncedSeries& s, const Vec2& center) {
    std::vector<double> areas;
    double prev_angle = 0.0;
    double unwrapped = 0.0;
    double lap_start_angle = 0.0;
    std::size_t lap_start = 0;
    bool init = false;
    for (Eigen::Index k = 0; k < s.length(); ++k) {
        const Vec2 p(s.values(k, 0) - center.x(), s.values(k, 1) - center.y());
        const double ang = std::atan2(p.y(), p.x());
        if (!init) {
            prev_angle = ang;
            unwrapped = ang;
            lap_start_angle = ang;
            init = true;
            continue;
        }
        double d = ang - prev_angle;
        if (d > std::numbers::pi) d -= 2 * std::numbers::pi;
        if (d < -std::numbers::pi) d += 2 * std::numbers::pi;
        unwrapped += d;
        prev_angle = ang;
        if (std::abs(unwrapped - lap_start_angle) >= 2 * std::numbers::pi) {
            double area = 0.0;
            for (auto i = static_cast<Eigen::Index>(lap_start); i < k; ++i) {
                area += s.values(i, 0) * s.values(i + 1, 1) - s.values(i + 1, 0) * s.values(i, 1);
            }
            area += s.values(k, 0) * s.values(static_cast<Eigen::Index>(lap_start), 1) -
                    s.values(static_cast<Eigen::Index>(lap_start), 0) * s.values(k, 1);
            areas.push_back(0.5 * area);
            lap_start = static_cast<std::size_t>(k);
            lap_start_angle = unwrapped;
        }
    }
    return areas;
}

inline SelfCheckReport self_check(const ScenarioDataset& ds) {
    SelfCheckReport rep;
    const auto& spec = ds.spec;
    const double dt = spec.sample_dt();
    const auto& nz = spec.noise;
    for (const auto& a : ds.agents) {
        const auto& v = a.series.values;
        // finite-difference speed against the velocity channel
        const double pos_sd = std::sqrt(2.0) * nz.position / dt;
        const double tol = 6.0 * (pos_sd + nz.velocity) + 0.5 * spec.vehicle.max_accel * dt + 0.02;
        std::size_t bad = 0;
        for (Eigen::Index k = 1; k < a.series.length(); ++k) {
            const double fd = std::hypot(v(k, 0) - v(k - 1, 0), v(k, 1) - v(k - 1, 1)) / dt;
            const double ch = 0.5 * (v(k, 3) + v(k - 1, 3));
            if (std::abs(fd - ch) > tol) ++bad;
        }
        if (bad > 0) rep.violations.push_back(a.agent + ": " + std::to_string(bad) + " samples violate kinematic consistency");
        const auto areas = lap_signed_areas(a.series, spec.course.center());
        if (areas.empty()) rep.violations.push_back(a.agent + ": no complete lap");
        for (std::size_t i = 0; i < areas.size(); ++i) {
            if (!(areas[i] > 0.0)) {
                rep.violations.push_back(a.agent + ": lap " + std::to_string(i + 1) + " is not counterclockwise");
            }
        }
    }
    // leader-follower gap while platooning (before the first event)
    if (ds.agents.size() == 2 && !spec.clockwise) {
        double t_limit = std::numeric_limits<double>::infinity();
        for (const auto& w : ds.truth_windows) t_limit = std::min(t_limit, w.t_start);
        const auto& l = ds.agents[0].series.values;
        const auto& f = ds.agents[1].series.values;
        const double per = spec.course.perimeter();
        double prev_l = spec.follower_gap;
        double prev_f = 0.0;
        std::size_t bad = 0;
        const Eigen::Index stride = 5;
        for (Eigen::Index k = 0; k < ds.agents[0].series.length(); k += stride) {
            if (static_cast<double>(k) * dt >= t_limit) break;
            double sl = spec.course.project(Vec2(l(k, 0), l(k, 1)));
            double sf = spec.course.project(Vec2(f(k, 0), f(k, 1)));
            // unwrap against the previous projection
            sl += per * std::round((prev_l - sl) / per);
            sf += per * std::round((prev_f - sf) / per);
            prev_l = sl;
            prev_f = sf;
            const double gap = sl - sf;
            if (gap < 0.5 * spec.follower_gap || gap > 2.0 * spec.follower_gap) ++bad;
        }
        if (bad > 0) rep.violations.push_back("leader-follower gap out of bounds at " + std::to_string(bad) + " samples");
    }
    for (const auto& w : ds.truth_windows) {
        bool still = false;
        if (w.cause == "emergency_stop") {
            const auto& a = ds.agent(w.agent).series;
            const double thr = 0.05 * spec.vehicle.cruise_speed;
            double run = 0.0;
            for (Eigen::Index k = 0; k < a.length(); ++k) {
                const double t = a.time_at(k);
                if (t < w.t_start || t > w.t_end) continue;
                run = std::abs(a.values(k, 3)) < thr ? run + dt : 0.0;
                if (run >= 0.5 * spec.dwell) still = true;
            }
        }
        rep.stationary.push_back(still);
    }
    return rep;
}

// Output --------------------------------------------------------------------

inline nlohmann::json truth_windows_to_json(const std::vector<TruthWindow>& ws) {
    auto j = nlohmann::json::array();
    for (const auto& w : ws) j.push_back({{"agent", w.agent}, {"t_start", w.t_start}, {"t_end", w.t_end}, {"cause", w.cause}});
    return j;
}

inline std::vector<TruthWindow> truth_windows_from_json(const nlohmann::json& j) {
    std::vector<TruthWindow> out;
    try {
        for (const auto& e : j) {
            out.push_back(TruthWindow{e.at("agent").get<std::string>(), e.at("t_start").get<double>(),
                                      e.at("t_end").get<double>(), e.value("cause", std::string{})});
        }
    } catch (const nlohmann::json::exception& e) {
        throw EvalError(std::string("malformed truth windows: ") + e.what());
    }
    return out;
}

inline nlohmann::json spec_to_json(const ScenarioSpec& s) {
    return {{"kind", scenario_name(s.kind)},
            {"laps", s.laps},
            {"samples_per_lap", s.samples_per_lap},
            {"dt", s.sample_dt()},
            {"course", {{"width", s.course.width}, {"height", s.course.height}, {"corner_radius", s.course.corner_radius}}},
            {"cruise_speed", s.vehicle.cruise_speed},
            {"follower_gap", s.follower_gap},
            {"reaction_delay", s.reaction_delay},
            {"dwell", s.dwell},
            {"event_laps", s.events()},
            {"clockwise", s.clockwise},
            {"seed", s.seed}};
}

/// Writes one CSV per agent plus truth_windows.json and scenario.json.
inline void write_dataset(const std::filesystem::path& dir, const ScenarioDataset& ds) {
    for (const auto& a : ds.agents) io::write_file_atomic(dir / (a.agent + ".csv"), series_to_csv(a.series));
    io::write_file_atomic(dir / "truth_windows.json", truth_windows_to_json(ds.truth_windows).dump(1) + "\n");
    io::write_file_atomic(dir / "scenario.json", spec_to_json(ds.spec).dump(1) + "\n");
}

/// Truth windows of one agent as plain time intervals.
inline std::vector<std::pair<double, double>> windows_for(const std::vector<TruthWindow>& ws, const std::string& agent) {
    std::vector<std::pair<double, double>> out;
    for (const auto& w : ws) {
        if (w.agent == agent) out.emplace_back(w.t_start, w.t_end);
    }
    return out;
}

} // namespace samjpf

#endif // SAMJPF_SCENARIO_HPP
