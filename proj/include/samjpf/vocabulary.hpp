#ifndef SAMJPF_VOCABULARY_HPP
#define SAMJPF_VOCABULARY_HPP

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "samjpf/data_pipeline.hpp"
#include "samjpf/error.hpp"
#include "samjpf/gng.hpp"
#include "samjpf/types.hpp"

namespace samjpf {

using WordId = int;

/// A co-occurring (state letter, derivative letter) pair.
struct Word {
    WordId label = 0;
    LetterId state_letter = 0;
    LetterId deriv_letter = 0;
    Vec2 mean_velocity = Vec2::Zero();
    std::size_t count = 0;

    friend bool operator==(const Word&, const Word&) = default;
};

struct Dictionary {
    std::vector<Word> words; // words[i].label == i
    Eigen::MatrixXd transition;
    Modality modality = Modality::XY;

    [[nodiscard]] int size() const { return static_cast<int>(words.size()); }
};

/// Additive smoothing per cell before row normalization. Zero disables it.
struct SmoothingConfig {
    double epsilon = 1e-3;
};

/// Exact pair lookup; nullopt marks a pair never seen in training.
inline std::optional<WordId> lookup_word(const Dictionary& dict, LetterId state_letter, LetterId deriv_letter) {
    for (const auto& w : dict.words) {
        if (w.state_letter == state_letter && w.deriv_letter == deriv_letter) return w.label;
    }
    return std::nullopt;
}

struct WordEncoding {
    Dictionary dictionary; // transition left empty
    std::vector<WordId> sequence;
};

/// Labels are assigned in order of first appearance.
inline WordEncoding build_words(const GeneralizedStateSequence& gs, const Codebook& cb_state, const Codebook& cb_deriv) {
    if (gs.length() == 0) throw DataError("build_words: empty generalized state sequence");
    WordEncoding out;
    out.dictionary.modality = gs.modality;
    std::map<std::pair<LetterId, LetterId>, WordId> index;
    std::vector<Vec2> sums;
    out.sequence.reserve(static_cast<std::size_t>(gs.length()));
    for (Eigen::Index k = 0; k < gs.length(); ++k) {
        const Vec2 s = gs.gs.row(k).head<2>().transpose();
        const Vec2 d = gs.gs.row(k).tail<2>().transpose();
        const auto key = std::make_pair(assign_letter(cb_state, s), assign_letter(cb_deriv, d));
        auto [it, inserted] = index.try_emplace(key, static_cast<WordId>(out.dictionary.words.size()));
        if (inserted) {
            out.dictionary.words.push_back(Word{it->second, key.first, key.second, Vec2::Zero(), 0});
            sums.emplace_back(Vec2::Zero());
        }
        auto& w = out.dictionary.words[static_cast<std::size_t>(it->second)];
        w.count += 1;
        sums[static_cast<std::size_t>(it->second)] += d;
        out.sequence.push_back(it->second);
    }
    for (auto& w : out.dictionary.words) w.mean_velocity = sums[static_cast<std::size_t>(w.label)] / static_cast<double>(w.count);
    return out;
}

namespace detail {

/// Adds epsilon to every cell, then normalizes rows; all-zero rows become uniform.
inline void normalize_rows(Eigen::MatrixXd& m, double epsilon) {
    m.array() += epsilon;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double s = m.row(i).sum();
        if (s > 0.0) {
            m.row(i) /= s;
        } else {
            m.row(i).setConstant(1.0 / static_cast<double>(m.cols()));
        }
    }
}

} // namespace detail

inline Eigen::MatrixXd estimate_transition_matrix(const std::vector<WordId>& sequence, int k,
                                                  const SmoothingConfig& smoothing = {}) {
    if (k <= 0) throw DataError("estimate_transition_matrix: K must be positive");
    if (sequence.size() < 2) throw DataError("estimate_transition_matrix: need at least 2 words");
    if (smoothing.epsilon < 0.0) throw ConfigError("smoothing epsilon must be >= 0");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t t = 1; t < sequence.size(); ++t) {
        const WordId a = sequence[t - 1];
        const WordId b = sequence[t];
        if (a < 0 || b < 0 || a >= k || b >= k) throw DataError("estimate_transition_matrix: label out of range");
        counts(a, b) += 1.0;
    }
    detail::normalize_rows(counts, smoothing.epsilon);
    return counts;
}

/// P(agent-2 position letter | agent-1 position letter) and the reverse.
struct CoupledCooccurrence {
    Eigen::MatrixXd m12; // m x n, rows conditional on agent-1 letter
    Eigen::MatrixXd m21; // n x m, rows conditional on agent-2 letter
    double epsilon = 0.0;

    [[nodiscard]] Eigen::Index m_rows() const { return m12.rows(); }
    [[nodiscard]] Eigen::Index n_cols() const { return m12.cols(); }
};

/// Letter counts default to one past the largest observed label.
inline CoupledCooccurrence estimate_coupled_cooccurrence(const std::vector<LetterId>& a1, const std::vector<LetterId>& a2,
                                                         const SmoothingConfig& smoothing = {}, int m = -1, int n = -1) {
    if (a1.size() != a2.size()) throw SyncError("co-occurrence streams differ in length");
    if (a1.empty()) throw DataError("co-occurrence streams are empty");
    if (smoothing.epsilon < 0.0) throw ConfigError("smoothing epsilon must be >= 0");
    int max1 = 0;
    int max2 = 0;
    for (std::size_t t = 0; t < a1.size(); ++t) {
        if (a1[t] < 0 || a2[t] < 0) throw DataError("negative letter id");
        max1 = std::max(max1, a1[t]);
        max2 = std::max(max2, a2[t]);
    }
    if (m < 0) m = max1 + 1;
    if (n < 0) n = max2 + 1;
    if (max1 >= m || max2 >= n) throw DataError("letter id exceeds codebook size");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(m, n);
    for (std::size_t t = 0; t < a1.size(); ++t) counts(a1[t], a2[t]) += 1.0;
    CoupledCooccurrence out;
    out.epsilon = smoothing.epsilon;
    out.m12 = counts;
    out.m21 = counts.transpose();
    detail::normalize_rows(out.m12, smoothing.epsilon);
    detail::normalize_rows(out.m21, smoothing.epsilon);
    return out;
}

// JSON ------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(flat.size()) != rows * cols) {
        throw ModelFormatError("matrix shape does not match data length");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = flat[static_cast<std::size_t>(i * cols + j2)];
    }
    return m;
}

} // namespace detail

inline void to_json(nlohmann::json& j, const Word& w) {
    j = {{"label", w.label},
         {"state_letter", w.state_letter},
         {"deriv_letter", w.deriv_letter},
         {"mean_velocity", {w.mean_velocity.x(), w.mean_velocity.y()}},
         {"count", w.count}};
}

inline void from_json(const nlohmann::json& j, Word& w) {
    j.at("label").get_to(w.label);
    j.at("state_letter").get_to(w.state_letter);
    j.at("deriv_letter").get_to(w.deriv_letter);
    const auto v = j.at("mean_velocity").get<std::vector<double>>();
    if (v.size() != 2) throw ModelFormatError("word " + std::to_string(w.label) + ": mean_velocity must have 2 entries");
    w.mean_velocity << v[0], v[1];
    j.at("count").get_to(w.count);
}

inline void to_json(nlohmann::json& j, const Dictionary& d) {
    j = {{"modality", modality_name(d.modality)},
         {"words", d.words},
         {"transition", detail::matrix_to_json(d.transition)}};
}

inline void from_json(const nlohmann::json& j, Dictionary& d) {
    d.modality = parse_modality(j.at("modality").get<std::string>());
    d.words = j.at("words").get<std::vector<Word>>();
    d.transition = detail::matrix_from_json(j.at("transition"));
    for (std::size_t i = 0; i < d.words.size(); ++i) {
        if (d.words[i].label != static_cast<WordId>(i)) throw ModelFormatError("dictionary labels must be dense");
    }
    if (d.transition.rows() != d.size() || d.transition.cols() != d.size()) {
        throw ModelFormatError("transition matrix is not K x K");
    }
}

inline void to_json(nlohmann::json& j, const CoupledCooccurrence& c) {
    j = {{"epsilon", c.epsilon}, {"m12", detail::matrix_to_json(c.m12)}, {"m21", detail::matrix_to_json(c.m21)}};
}

inline void from_json(const nlohmann::json& j, CoupledCooccurrence& c) {
    j.at("epsilon").get_to(c.epsilon);
    c.m12 = detail::matrix_from_json(j.at("m12"));
    c.m21 = detail::matrix_from_json(j.at("m21"));
    if (c.m12.rows() != c.m21.cols() || c.m12.cols() != c.m21.rows()) {
        throw ModelFormatError("co-occurrence matrices have inconsistent shapes");
    }
}

} // namespace samjpf

#endif // SAMJPF_VOCABULARY_HPP
