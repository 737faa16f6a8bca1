#ifndef SAMJPF_CONFIG_HPP
#define SAMJPF_CONFIG_HPP

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "samjpf/dbn_model.hpp"
#include "samjpf/detection.hpp"
#include "samjpf/error.hpp"
#include "samjpf/io.hpp"
#include "samjpf/mjpf.hpp"
#include "samjpf/scenario.hpp"

namespace samjpf {

/// Everything a command needs. Files use flat dotted keys, one
/// `key = value` per line, `#` starts a comment.
struct RunConfig {
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_dir = "models";
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 1;
    double threshold = kDefaultThreshold;
    int min_run = kDefaultMinRun;
    double calibration_quantile = 0.95;
    std::vector<Modality> modalities{kAllModalities.begin(), kAllModalities.end()};
    TrainConfig train;
    MjpfConfig mjpf;
    ScenarioSpec scenario;
    int coupled_latency = 0;

    void validate() const {
        if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0,1)");
        if (min_run < 1) throw ConfigError("min_run must be >= 1");
        if (!(calibration_quantile > 0.0 && calibration_quantile < 1.0)) throw ConfigError("calibration.quantile must lie in (0,1)");
        if (modalities.empty()) throw ConfigError("at least one modality is required");
        if (coupled_latency < 0) throw ConfigError("coupled.latency must be >= 0");
        train.gng.validate();
        mjpf.validate();
        scenario.validate();
    }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<Modality> to_modalities(const std::string& v) {
    std::vector<Modality> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto tok = io::trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!tok.empty()) out.push_back(parse_modality(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string join_modalities(const std::vector<Modality>& ms) {
    std::string out;
    for (auto m : ms) out += (out.empty() ? "" : ",") + std::string(modality_name(m));
    return out;
}

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define SAMJPF_NUM_KEY(key, field, help)                                                                         \
    ConfigKey {                                                                                                  \
        key, help, [](RunConfig& c, const std::string& v) { c.field = to_double(key, v); },                     \
            [](const RunConfig& c) { return io::fmt_num(static_cast<double>(c.field)); }                         \
    }
#define SAMJPF_INT_KEY(key, field, help)                                                                         \
    ConfigKey {                                                                                                  \
        key, help, [](RunConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_int(key, v)); }, \
            [](const RunConfig& c) { return std::to_string(c.field); }                                           \
    }

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"paths.data_dir", "dataset directory", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
         [](const RunConfig& c) { return c.data_dir.string(); }},
        {"paths.model_dir", "model directory", [](RunConfig& c, const std::string& v) { c.model_dir = v; },
         [](const RunConfig& c) { return c.model_dir.string(); }},
        {"paths.output_dir", "output directory", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
         [](const RunConfig& c) { return c.output_dir.string(); }},
        {"seed", "seed shared by simulator, GNG and filter",
         [](RunConfig& c, const std::string& v) {
             c.seed = static_cast<std::uint64_t>(to_int("seed", v));
             c.train.gng.seed = c.seed;
             c.mjpf.seed = c.seed;
             c.scenario.seed = c.seed;
         },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        SAMJPF_NUM_KEY("threshold", threshold, "Hellinger anomaly threshold"),
        SAMJPF_INT_KEY("min_run", min_run, "consecutive super-threshold samples per detection"),
        SAMJPF_NUM_KEY("calibration.quantile", calibration_quantile, "quantile used by --calibrate"),
        {"modalities", "comma separated list of XY,SV,SP,VP",
         [](RunConfig& c, const std::string& v) { c.modalities = to_modalities(v); },
         [](const RunConfig& c) { return join_modalities(c.modalities); }},
        SAMJPF_INT_KEY("gng.max_nodes", train.gng.max_nodes, "GNG node cap"),
        SAMJPF_INT_KEY("gng.lambda", train.gng.lambda_insert, "GNG insertion period"),
        SAMJPF_NUM_KEY("gng.eps_b", train.gng.eps_b, "GNG winner step"),
        SAMJPF_NUM_KEY("gng.eps_n", train.gng.eps_n, "GNG neighbour step"),
        SAMJPF_INT_KEY("gng.a_max", train.gng.a_max, "GNG edge age limit"),
        SAMJPF_NUM_KEY("gng.alpha", train.gng.alpha, "GNG error decay on insertion"),
        SAMJPF_NUM_KEY("gng.d", train.gng.d_decay, "GNG global error decay"),
        SAMJPF_INT_KEY("gng.epochs", train.gng.epochs, "GNG passes over the data"),
        SAMJPF_NUM_KEY("smoothing.epsilon", train.smoothing.epsilon, "additive transition smoothing"),
        {"dynamics.mode", "KINEMATIC or LITERAL",
         [](RunConfig& c, const std::string& v) { c.train.mode = parse_dynamics_mode(v); },
         [](const RunConfig& c) { return std::string(dynamics_mode_name(c.train.mode)); }},
        SAMJPF_NUM_KEY("dynamics.q_scale", train.q_scale, "process noise scale"),
        SAMJPF_INT_KEY("mjpf.particles_per_word", mjpf.particles_per_word, "particles per dictionary word"),
        SAMJPF_INT_KEY("mjpf.max_particles", mjpf.max_particles, "particle cap (0 = none)"),
        SAMJPF_NUM_KEY("mjpf.resample_threshold", mjpf.resample_threshold, "ESS fraction triggering resampling"),
        {"mjpf.obs_noise", "observation noise variance (times identity)",
         [](RunConfig& c, const std::string& v) { c.mjpf.obs_noise = Mat2::Identity() * to_double("mjpf.obs_noise", v); },
         [](const RunConfig& c) { return io::fmt_num(c.mjpf.obs_noise(0, 0)); }},
        SAMJPF_NUM_KEY("mjpf.process_floor", mjpf.process_floor, "state process noise as a multiple of R"),
        SAMJPF_NUM_KEY("mjpf.region_kappa", mjpf.region_kappa, "state-letter prior width (0 = off)"),
        {"scenario.kind", "PMT, ES1, ES2 or PED_AVOID",
         [](RunConfig& c, const std::string& v) { c.scenario.kind = parse_scenario(v); },
         [](const RunConfig& c) { return std::string(scenario_name(c.scenario.kind)); }},
        SAMJPF_INT_KEY("scenario.laps", scenario.laps, "laps per run"),
        SAMJPF_INT_KEY("scenario.samples_per_lap", scenario.samples_per_lap, "samples per lap"),
        SAMJPF_NUM_KEY("scenario.dt", scenario.dt, "sampling period in s (0 = derived)"),
        SAMJPF_NUM_KEY("scenario.follower_gap", scenario.follower_gap, "leader-follower gap in m"),
        SAMJPF_NUM_KEY("scenario.reaction_delay", scenario.reaction_delay, "follower reaction delay in s"),
        SAMJPF_NUM_KEY("scenario.dwell", scenario.dwell, "standstill per emergency stop in s"),
        {"scenario.clockwise", "drive the course clockwise",
         [](RunConfig& c, const std::string& v) { c.scenario.clockwise = to_bool("scenario.clockwise", v); },
         [](const RunConfig& c) { return std::string(c.scenario.clockwise ? "true" : "false"); }},
        SAMJPF_INT_KEY("coupled.latency", coupled_latency, "channel latency in steps"),
    };
    return keys;
}

#undef SAMJPF_NUM_KEY
#undef SAMJPF_INT_KEY

} // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : detail::config_keys()) {
        if (k.name == key) {
            k.set(cfg, std::string(io::trim(value)));
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

inline std::string get_config_value(const RunConfig& cfg, const std::string& key) {
    for (const auto& k : detail::config_keys()) {
        if (k.name == key) return k.get(cfg);
    }
    throw ConfigError("unknown config key '" + key + "'");
}

/// Applies `key = value` lines on top of `cfg`.
inline void parse_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config") {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        std::string_view line(text.data() + start, end - start);
        start = end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = io::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            set_config_value(cfg, std::string(io::trim(line.substr(0, eq))), std::string(io::trim(line.substr(eq + 1))));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig cfg = {}) {
    parse_config_text(cfg, io::read_file(path), path.string());
    return cfg;
}

/// Every key with its current value, in declaration order.
inline std::string dump_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

/// Relative paths are resolved against SA_MJPF_DATA_DIR when it is set.
inline std::filesystem::path resolve_path(const std::filesystem::path& p) {
    if (p.is_absolute()) return p;
    if (const char* base = std::getenv("SA_MJPF_DATA_DIR"); base != nullptr && *base != '\0') {
        return std::filesystem::path(base) / p;
    }
    return p;
}

} // namespace samjpf

#endif // SAMJPF_CONFIG_HPP
