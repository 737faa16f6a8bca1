#ifndef SAMJPF_DBN_MODEL_HPP
#define SAMJPF_DBN_MODEL_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "samjpf/data_pipeline.hpp"
#include "samjpf/error.hpp"
#include "samjpf/gng.hpp"
#include "samjpf/io.hpp"
#include "samjpf/types.hpp"
#include "samjpf/vocabulary.hpp"

namespace samjpf {

inline constexpr const char* kModelFormat = "sa-mjpf-model/1";

/// KINEMATIC: position advances by U*dt and the derivative is set to U.
/// LITERAL: the printed block structure, which only sets the derivative.
enum class DynamicsMode { Kinematic, Literal };

inline std::string_view dynamics_mode_name(DynamicsMode m) { return m == DynamicsMode::Kinematic ? "KINEMATIC" : "LITERAL"; }

inline DynamicsMode parse_dynamics_mode(std::string_view s) {
    if (s == "KINEMATIC" || s == "kinematic") return DynamicsMode::Kinematic;
    if (s == "LITERAL" || s == "literal") return DynamicsMode::Literal;
    throw ConfigError("unknown dynamics mode '" + std::string(s) + "'");
}

/// x_{k+1} = A x_k + B U + w,  w ~ N(0, Q).
struct WordDynamics {
    Mat4 A = Mat4::Identity();
    Mat42 B = Mat42::Zero();
    Vec2 U = Vec2::Zero();
    Mat4 Q = Mat4::Zero();
    double dt = 0.1;

    [[nodiscard]] Vec4 predict_mean(const Vec4& x) const { return A * x + B * U; }
    [[nodiscard]] Mat4 predict_cov(const Mat4& P) const { return A * P * A.transpose() + Q; }

    friend bool operator==(const WordDynamics&, const WordDynamics&) = default;
};

inline WordDynamics build_word_dynamics(const Word& word, const Mat2& deriv_cov, double dt, DynamicsMode mode,
                                        double q_scale = 1.0) {
    if (!(dt > 0.0)) throw ConfigError("build_word_dynamics: dt must be positive");
    if (!(q_scale >= 0.0)) throw ConfigError("build_word_dynamics: q_scale must be >= 0");
    WordDynamics d;
    d.dt = dt;
    d.U = word.mean_velocity;
    d.A.setZero();
    d.A.topLeftCorner<2, 2>().setIdentity();
    d.B.setZero();
    if (mode == DynamicsMode::Kinematic) {
        d.B.topRows<2>() = Mat2::Identity() * dt;
        d.B.bottomRows<2>() = Mat2::Identity();
    } else {
        d.B.bottomRows<2>() = Mat2::Identity() * dt;
    }
    d.Q.setZero();
    d.Q.topLeftCorner<2, 2>() = deriv_cov * (dt * dt) * q_scale;
    d.Q.bottomRightCorner<2, 2>() = deriv_cov * q_scale;
    return d;
}

struct TrainConfig {
    GngParams gng;
    SmoothingConfig smoothing;
    DynamicsMode mode = DynamicsMode::Kinematic;
    double q_scale = 1.0;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct SwitchingDbnModel {
    Modality modality = Modality::XY;
    Codebook state_codebook;
    Codebook deriv_codebook;
    Dictionary dictionary;
    std::vector<WordDynamics> dynamics; // indexed by word label
    std::vector<NormParams> norm_params; // one per channel of the modality
    std::vector<std::string> channel_names;
    DynamicsMode mode = DynamicsMode::Kinematic;
    TrainConfig train_config;
    double dt = 0.1;

    [[nodiscard]] int num_words() const { return dictionary.size(); }

    void validate() const {
        if (dictionary.size() == 0) throw ModelError("model has an empty dictionary");
        if (dynamics.size() != dictionary.words.size()) throw ModelFormatError("dynamics count does not match words");
        if (norm_params.size() != 2) throw ModelFormatError("model needs normalization parameters for 2 channels");
        for (const auto& w : dictionary.words) {
            if (w.state_letter < 0 || w.state_letter >= static_cast<int>(state_codebook.size()) || w.deriv_letter < 0 ||
                w.deriv_letter >= static_cast<int>(deriv_codebook.size())) {
                throw ModelFormatError("word " + std::to_string(w.label) + " references a missing letter");
            }
        }
    }
};

/// All modality models of one vehicle.
struct VehicleModelSet {
    std::string vehicle_id;
    std::map<Modality, SwitchingDbnModel> models;
};

/// Full offline pipeline for one modality. `series` holds raw (unnormalized)
/// channels; the modality's two columns are selected and scaled here.
inline SwitchingDbnModel train_model(const SyncedSeries& series, Modality modality, const TrainConfig& cfg = {}) {
    auto stage = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    };
    SwitchingDbnModel model;
    model.modality = modality;
    model.mode = cfg.mode;
    model.train_config = cfg;
    model.dt = series.dt;

    const SyncedSeries pair = stage("select", [&] { return select_modality(series, modality); });
    const SyncedSeries norm = stage("normalize", [&] { return pair.normalized() ? pair : normalize(pair); });
    model.norm_params = norm.norm_params;
    model.channel_names = norm.names;
    const auto gs = stage("generalized_states", [&] { return estimate_generalized_states(norm, modality); });

    GngParams state_params = cfg.gng;
    GngParams deriv_params = cfg.gng;
    deriv_params.seed = cfg.gng.seed ^ 0x9e3779b97f4a7c15ULL;
    model.state_codebook = stage("gng_state", [&] { return train_gng(gs.states(), state_params, SpaceTag::State); });
    model.deriv_codebook =
        stage("gng_derivative", [&] { return train_gng(gs.derivatives(), deriv_params, SpaceTag::Derivative); });

    auto enc = stage("words", [&] { return build_words(gs, model.state_codebook, model.deriv_codebook); });
    model.dictionary = std::move(enc.dictionary);
    model.dictionary.transition = stage("transition", [&] {
        if (enc.sequence.size() < 2) return Eigen::MatrixXd::Identity(model.dictionary.size(), model.dictionary.size()).eval();
        return estimate_transition_matrix(enc.sequence, model.dictionary.size(), cfg.smoothing);
    });
    stage("dynamics", [&] {
        for (const auto& w : model.dictionary.words) {
            model.dynamics.push_back(
                build_word_dynamics(w, model.deriv_codebook.node(w.deriv_letter).cov, series.dt, cfg.mode, cfg.q_scale));
        }
        return 0;
    });
    return model;
}

// JSON ------------------------------------------------------------------

namespace detail {

template <int R, int C>
nlohmann::json fixed_to_json(const Eigen::Matrix<double, R, C>& m) {
    std::vector<double> flat;
    for (int i = 0; i < R; ++i) {
        for (int j = 0; j < C; ++j) flat.push_back(m(i, j));
    }
    return flat;
}

template <int R, int C>
Eigen::Matrix<double, R, C> fixed_from_json(const nlohmann::json& j, const std::string& what) {
    const auto flat = j.get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(R * C)) throw ModelFormatError(what + ": wrong number of entries");
    Eigen::Matrix<double, R, C> m;
    for (int i = 0; i < R; ++i) {
        for (int c = 0; c < C; ++c) m(i, c) = flat[static_cast<std::size_t>(i * C + c)];
    }
    return m;
}

} // namespace detail

inline nlohmann::json model_to_json(const SwitchingDbnModel& m) {
    nlohmann::json dyn = nlohmann::json::object();
    for (std::size_t i = 0; i < m.dynamics.size(); ++i) {
        const auto& d = m.dynamics[i];
        dyn[std::to_string(i)] = {{"A", detail::fixed_to_json(d.A)},
                                  {"B", detail::fixed_to_json(d.B)},
                                  {"U", detail::fixed_to_json(d.U)},
                                  {"Q", detail::fixed_to_json(d.Q)},
                                  {"dt", d.dt}};
    }
    nlohmann::json norm = nlohmann::json::array();
    for (std::size_t c = 0; c < m.norm_params.size(); ++c) {
        norm.push_back({{"channel", m.channel_names.at(c)}, {"min", m.norm_params[c].min}, {"max", m.norm_params[c].max}});
    }
    return {{"format", kModelFormat},
            {"modality", modality_name(m.modality)},
            {"dt", m.dt},
            {"dynamics_mode", dynamics_mode_name(m.mode)},
            {"gng_params", m.train_config.gng},
            {"smoothing_epsilon", m.train_config.smoothing.epsilon},
            {"q_scale", m.train_config.q_scale},
            {"norm_params", norm},
            {"state_codebook", m.state_codebook},
            {"deriv_codebook", m.deriv_codebook},
            {"dictionary", m.dictionary},
            {"dynamics", dyn}};
}

inline SwitchingDbnModel model_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object() || !j.contains("format")) throw ModelFormatError("missing format tag");
        const auto fmt = j.at("format").get<std::string>();
        if (fmt != kModelFormat) throw ModelFormatError("unsupported model format '" + fmt + "'");
        SwitchingDbnModel m;
        m.modality = parse_modality(j.at("modality").get<std::string>());
        j.at("dt").get_to(m.dt);
        m.mode = parse_dynamics_mode(j.at("dynamics_mode").get<std::string>());
        m.train_config.mode = m.mode;
        m.train_config.gng = j.at("gng_params").get<GngParams>();
        j.at("smoothing_epsilon").get_to(m.train_config.smoothing.epsilon);
        j.at("q_scale").get_to(m.train_config.q_scale);
        for (const auto& n : j.at("norm_params")) {
            m.channel_names.push_back(n.at("channel").get<std::string>());
            m.norm_params.push_back({n.at("min").get<double>(), n.at("max").get<double>()});
        }
        m.state_codebook = j.at("state_codebook").get<Codebook>();
        m.deriv_codebook = j.at("deriv_codebook").get<Codebook>();
        m.dictionary = j.at("dictionary").get<Dictionary>();
        const auto& dyn = j.at("dynamics");
        for (const auto& w : m.dictionary.words) {
            const auto key = std::to_string(w.label);
            if (!dyn.contains(key)) throw ModelFormatError("missing dynamics for word " + key);
            const auto& jd = dyn.at(key);
            WordDynamics d;
            d.A = detail::fixed_from_json<4, 4>(jd.at("A"), "word " + key + " A");
            d.B = detail::fixed_from_json<4, 2>(jd.at("B"), "word " + key + " B");
            d.U = detail::fixed_from_json<2, 1>(jd.at("U"), "word " + key + " U");
            d.Q = detail::fixed_from_json<4, 4>(jd.at("Q"), "word " + key + " Q");
            jd.at("dt").get_to(d.dt);
            m.dynamics.push_back(d);
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed model: ") + e.what());
    }
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline std::string serialize_model(const SwitchingDbnModel& m) { return model_to_json(m).dump(1) + "\n"; }

inline void save_model(const std::filesystem::path& path, const SwitchingDbnModel& m) {
    io::write_file_atomic(path, serialize_model(m));
}

inline SwitchingDbnModel load_model(const std::filesystem::path& path) {
    return model_from_json(parse_json_text(io::read_file(path), path.string()));
}

inline nlohmann::json model_set_to_json(const VehicleModelSet& set) {
    nlohmann::json models = nlohmann::json::object();
    for (const auto& [mod, m] : set.models) models[std::string(modality_name(mod))] = model_to_json(m);
    return {{"format", kModelFormat}, {"vehicle_id", set.vehicle_id}, {"models", models}};
}

inline VehicleModelSet model_set_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", std::string{}) != kModelFormat) throw ModelFormatError("unsupported model set format");
        VehicleModelSet set;
        j.at("vehicle_id").get_to(set.vehicle_id);
        for (const auto& [key, jm] : j.at("models").items()) {
            const Modality mod = parse_modality(key);
            auto m = model_from_json(jm);
            if (m.modality != mod) throw ModelFormatError("model under key " + key + " has another modality");
            set.models.emplace(mod, std::move(m));
        }
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed model set: ") + e.what());
    }
}

inline void save_model_set(const std::filesystem::path& path, const VehicleModelSet& set) {
    io::write_file_atomic(path, model_set_to_json(set).dump(1) + "\n");
}

inline VehicleModelSet load_model_set(const std::filesystem::path& path) {
    return model_set_from_json(parse_json_text(io::read_file(path), path.string()));
}

} // namespace samjpf

#endif // SAMJPF_DBN_MODEL_HPP
