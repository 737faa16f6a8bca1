// sa-mjpf: simulate, train, test and evaluate self-aware vehicle models.
//
// Exit codes: 0 success, 1 internal error, 2 usage, 3 refused (output exists).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "samjpf/samjpf.hpp"

namespace fs = std::filesystem;
using namespace samjpf;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRefused = 3;

struct Refused : Error {
    using Error::Error;
};

struct Usage : Error {
    using Error::Error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_writable(const fs::path& file, bool force) {
    if (fs::exists(file) && !force) throw Refused(file.string() + " exists; pass --force to overwrite");
}

void ensure_empty_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
        throw Refused(dir.string() + " is not empty; pass --force to overwrite");
    }
    fs::create_directories(dir);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Vehicle channels present in a CSV header. Missing ones surface later as
/// stage errors of the modality that needs them.
CsvSchema schema_from_header(const fs::path& file) {
    std::ifstream in(file);
    std::string header;
    if (!in || !std::getline(in, header)) throw DataError("cannot read header of " + file.string());
    CsvSchema schema;
    std::size_t start = 0;
    while (start <= header.size()) {
        const auto comma = header.find(',', start);
        const std::string col(io::trim(std::string_view(header).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        for (Channel c : kAllChannels) {
            if (col == channel_name(c)) schema.channels.emplace(col, col);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return schema;
}

/// Agent CSVs of a dataset directory, sorted by agent name.
std::map<std::string, SyncedSeries> load_agents(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Usage("dataset directory " + dir.string() + " does not exist");
    std::map<std::string, SyncedSeries> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        out.emplace(e.path().stem().string(), load_series(e.path(), schema_from_header(e.path())));
    }
    if (out.empty()) throw Usage("no agent CSV files in " + dir.string());
    return out;
}

std::vector<TruthWindow> load_windows(const fs::path& file) {
    if (!fs::exists(file)) return {};
    return truth_windows_from_json(parse_json_text(io::read_file(file), file.string()));
}

std::vector<TimeWindow> windows_of(const std::vector<TruthWindow>& ws, const std::string& agent) {
    std::vector<TimeWindow> out;
    for (const auto& [a, b] : windows_for(ws, agent)) out.push_back({a, b});
    return out;
}

fs::path model_file(const fs::path& dir, const std::string& agent, Modality m) {
    return dir / (agent + "_" + std::string(modality_name(m)) + ".json");
}

fs::path trace_file(const fs::path& dir, const std::string& agent, Modality m) {
    return dir / (agent + "_" + std::string(modality_name(m)) + ".trace.csv");
}

// simulate ------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, const std::optional<fs::path>& out_opt, bool force) {
    const fs::path out = out_opt ? *out_opt : resolve_path(cfg.data_dir) / lower(std::string(scenario_name(cfg.scenario.kind)));
    ensure_empty_dir(out, force);
    const auto t0 = std::chrono::steady_clock::now();
    const ScenarioDataset ds = generate(cfg.scenario);
    const auto check = self_check(ds);
    for (const auto& v : check.violations) std::cerr << "warning: " << v << "\n";
    write_dataset(out, ds);
    std::printf("simulated %s: %zu agent(s) x %d samples, %zu truth window(s) -> %s (%.2f s)\n",
                std::string(scenario_name(cfg.scenario.kind)).c_str(), ds.agents.size(), cfg.scenario.num_samples(),
                ds.truth_windows.size(), out.string().c_str(), seconds_since(t0));
    return 0;
}

// train ---------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::optional<fs::path>& data_opt, const std::optional<fs::path>& models_opt,
              bool force) {
    const fs::path data = data_opt ? *data_opt : resolve_path(cfg.data_dir) / "pmt";
    const fs::path models = models_opt ? *models_opt : resolve_path(cfg.model_dir);
    const auto agents = load_agents(data);
    for (const auto& [agent, _] : agents) {
        for (Modality m : cfg.modalities) ensure_writable(model_file(models, agent, m), force);
    }
    fs::create_directories(models);

    struct Job {
        std::string agent;
        Modality modality;
        std::future<std::pair<SwitchingDbnModel, double>> result;
    };
    std::vector<Job> jobs;
    for (const auto& [agent, series] : agents) {
        for (Modality m : cfg.modalities) {
            jobs.push_back({agent, m, std::async(std::launch::async, [&series = series, m, &cfg] {
                                const auto t0 = std::chrono::steady_clock::now();
                                auto model = train_model(series, m, cfg.train);
                                return std::make_pair(std::move(model), seconds_since(t0));
                            })});
        }
    }
    nlohmann::json timing = nlohmann::json::object();
    std::map<std::string, SwitchingDbnModel> xy_models;
    for (auto& job : jobs) {
        auto [model, secs] = job.result.get();
        save_model(model_file(models, job.agent, job.modality), model);
        std::printf("trained %s %s: %d words, %zu+%zu letters, %.3f s\n", job.agent.c_str(),
                    std::string(modality_name(job.modality)).c_str(), model.num_words(), model.state_codebook.size(),
                    model.deriv_codebook.size(), secs);
        timing[job.agent][std::string(modality_name(job.modality))] = secs;
        if (job.modality == Modality::XY) xy_models.emplace(job.agent, std::move(model));
    }
    if (xy_models.size() >= 2) {
        const auto& [a1, m1] = *xy_models.begin();
        const auto& [a2, m2] = *std::next(xy_models.begin());
        const fs::path file = models / "coupled.json";
        ensure_writable(file, force);
        const auto cm = train_coupled(a1, m1, agents.at(a1), a2, m2, agents.at(a2), cfg.train.smoothing);
        save_coupled_model(file, cm);
        std::printf("trained coupled model %s/%s: %zu x %zu letters\n", a1.c_str(), a2.c_str(), cm.codebook1.size(),
                    cm.codebook2.size());
    }
    io::write_file_atomic(models / "timing.json", timing.dump(1) + "\n");
    return 0;
}

// test ----------------------------------------------------------------------

int cmd_test(const RunConfig& cfg, const std::optional<fs::path>& data_opt, const std::optional<fs::path>& models_opt,
             const std::optional<fs::path>& out_opt, bool force) {
    const fs::path data = data_opt ? *data_opt : resolve_path(cfg.data_dir) / lower(std::string(scenario_name(cfg.scenario.kind)));
    const fs::path models = models_opt ? *models_opt : resolve_path(cfg.model_dir);
    const fs::path out = out_opt ? *out_opt : resolve_path(cfg.output_dir);
    const auto agents = load_agents(data);
    const auto windows = load_windows(data / "truth_windows.json");
    ensure_empty_dir(out, force);

    nlohmann::json timing = nlohmann::json::object();
    int traces = 0;
    for (const auto& [agent, series] : agents) {
        for (Modality m : cfg.modalities) {
            const fs::path mf = model_file(models, agent, m);
            if (!fs::exists(mf)) {
                std::cerr << "skipping " << agent << " " << modality_name(m) << ": no model at " << mf << "\n";
                continue;
            }
            const auto model = load_model(mf);
            const auto trace = run_trace(model, cfg.mjpf, series, windows_of(windows, agent), cfg.threshold);
            io::write_file_atomic(trace_file(out, agent, m), trace_to_csv(trace));
            timing[agent][std::string(modality_name(m))] = trace.ms_per_sample;
            std::printf("tested %s %s: %zu samples, %.3f ms/sample\n", agent.c_str(), std::string(modality_name(m)).c_str(),
                        trace.samples.size(), trace.ms_per_sample);
            ++traces;
        }
    }
    const fs::path coupled = models / "coupled.json";
    if (fs::exists(coupled)) {
        const auto cm = load_coupled_model(coupled);
        if (agents.count(cm.agent1) && agents.count(cm.agent2)) {
            for (const auto& [self, other] : {std::pair{cm.agent1, cm.agent2}, std::pair{cm.agent2, cm.agent1}}) {
                const auto ct = run_coupled(cm, self, agents.at(self), agents.at(other), cfg.coupled_latency);
                io::write_file_atomic(out / (self + ".coupled.csv"), coupled_trace_to_csv(ct));
                std::printf("coupled trace for %s: %zu samples\n", self.c_str(), ct.samples.size());
            }
        }
    }
    if (traces == 0) throw Usage("no models found in " + models.string());
    io::write_file_atomic(out / "truth_windows.json", truth_windows_to_json(windows).dump(1) + "\n");
    io::write_file_atomic(out / "timing.json", timing.dump(1) + "\n");
    return 0;
}

// eval ----------------------------------------------------------------------

struct TraceFile {
    std::string agent;
    Modality modality;
    fs::path path;
};

std::vector<TraceFile> list_traces(const fs::path& dir) {
    std::vector<TraceFile> out;
    if (!fs::is_directory(dir)) throw Usage("trace directory " + dir.string() + " does not exist");
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        const std::string suffix = ".trace.csv";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        const std::string stem = name.substr(0, name.size() - suffix.size());
        const auto us = stem.rfind('_');
        if (us == std::string::npos) continue;
        out.push_back({stem.substr(0, us), parse_modality(stem.substr(us + 1)), e.path()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    if (out.empty()) throw Usage("no *.trace.csv files in " + dir.string());
    return out;
}

int cmd_eval(const RunConfig& cfg, const std::optional<fs::path>& traces_opt, const std::optional<fs::path>& windows_opt,
             bool calibrate, const std::optional<fs::path>& normal_opt) {
    const fs::path dir = traces_opt ? *traces_opt : resolve_path(cfg.output_dir);
    const auto windows = load_windows(windows_opt ? *windows_opt : dir / "truth_windows.json");
    if (calibrate && !normal_opt) throw Usage("--calibrate needs --normal DIR with traces of a normal run");

    nlohmann::json report = {{"threshold", cfg.threshold}, {"min_run", cfg.min_run}, {"traces", nlohmann::json::array()}};
    std::printf("%-8s %-3s %8s %7s %9s %9s %9s\n", "agent", "mod", "windows", "recall", "fa_rate", "fa/min", "theta_in");
    for (const auto& tf : list_traces(dir)) {
        const auto trace = trace_from_csv(io::read_file(tf.path), tf.modality);
        const auto ws = windows_of(windows, tf.agent);
        const auto rep = evaluate_trace(trace, ws, cfg.threshold, cfg.min_run);
        auto j = report_to_json(rep);
        j["agent"] = tf.agent;
        std::printf("%-8s %-3s %4zu/%-3zu %7.3f %9.4f %9.3f %9.3f\n", tf.agent.c_str(), std::string(modality_name(tf.modality)).c_str(),
                    rep.windows_detected, rep.windows, rep.recall, rep.false_alarm_rate, rep.false_alarms_per_minute,
                    rep.mean_theta_inside);
        if (calibrate) {
            const fs::path normal = *normal_opt / tf.path.filename();
            if (!fs::exists(normal)) throw Usage("no normal trace " + normal.string() + " for calibration");
            const double thr = calibrate_threshold(trace_from_csv(io::read_file(normal), tf.modality), cfg.calibration_quantile);
            const auto cal = evaluate_trace(trace, ws, thr, cfg.min_run);
            j["calibrated"] = report_to_json(cal);
            j["calibrated"]["threshold"] = thr;
            std::printf("%-8s %-3s calibrated threshold %.3f: recall %.3f, fa_rate %.4f\n", tf.agent.c_str(),
                        std::string(modality_name(tf.modality)).c_str(), thr, cal.recall, cal.false_alarm_rate);
        }
        report["traces"].push_back(j);
    }
    io::write_file_atomic(dir / "report.json", report.dump(1) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-aware vehicle anomaly detection with Markov jump particle filters"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("sa-mjpf 1.0"));

    std::optional<fs::path> config_file;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_file, "config file with flat dotted keys")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "seed for simulator, GNG and filter");
    std::map<std::string, std::string> overrides;
    for (const auto& k : detail::config_keys()) {
        if (k.name == "seed") continue;
        app.add_option_function<std::string>("--" + k.name, [&overrides, name = k.name](const std::string& v) { overrides[name] = v; },
                                             k.help)
            ->group("Config keys");
    }

    bool force = false;
    std::optional<fs::path> out, data, models, traces, windows, normal;
    std::optional<std::string> scenario;
    std::optional<int> laps;
    bool calibrate = false;

    auto* sim = app.add_subcommand("simulate", "generate a scenario dataset");
    sim->add_option("--scenario", scenario, "PMT, ES1, ES2 or PED_AVOID");
    sim->add_option("--laps", laps, "laps to drive");
    sim->add_option("--out", out, "output directory");
    sim->add_flag("--force", force, "overwrite existing output");

    auto* train = app.add_subcommand("train", "train per-modality models and the coupled model");
    train->add_option("--data", data, "dataset directory of normal runs");
    train->add_option("--models", models, "model output directory");
    train->add_flag("--force", force, "overwrite existing models");

    auto* test = app.add_subcommand("test", "run trained models over a dataset");
    test->add_option("--data", data, "dataset directory");
    test->add_option("--models", models, "model directory");
    test->add_option("--out", out, "trace output directory");
    test->add_flag("--force", force, "overwrite existing traces");

    auto* eval = app.add_subcommand("eval", "score traces against truth windows");
    eval->add_option("--traces", traces, "trace directory");
    eval->add_option("--windows", windows, "truth_windows.json (defaults to the one in the trace directory)");
    eval->add_flag("--calibrate", calibrate, "also report a threshold calibrated on normal traces");
    eval->add_option("--normal", normal, "trace directory of a normal run, for --calibrate");

    for (auto* sub : {sim, train, test, eval}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        RunConfig cfg;
        try {
            if (config_file) cfg = load_config(*config_file);
            for (const auto& k : detail::config_keys()) {
                if (auto it = overrides.find(k.name); it != overrides.end()) set_config_value(cfg, k.name, it->second);
            }
            if (seed) set_config_value(cfg, "seed", std::to_string(*seed));
            if (scenario) cfg.scenario.kind = parse_scenario(*scenario);
            if (laps) cfg.scenario.laps = *laps;
            cfg.validate();
        } catch (const ConfigError& e) {
            throw Usage(e.what());
        } catch (const SpecError& e) {
            throw Usage(e.what());
        }

        if (*sim) return cmd_simulate(cfg, out, force);
        if (*train) return cmd_train(cfg, data, models, force);
        if (*test) return cmd_test(cfg, data, models, out, force);
        return cmd_eval(cfg, traces, windows, calibrate, normal);
    } catch (const Usage& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Refused& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return kExitRefused;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}
