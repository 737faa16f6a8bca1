#ifndef SAMJPF_COLLECTIVE_HPP
#define SAMJPF_COLLECTIVE_HPP

#include <algorithm>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "samjpf/data_pipeline.hpp"
#include "samjpf/dbn_model.hpp"
#include "samjpf/error.hpp"
#include "samjpf/gng.hpp"
#include "samjpf/io.hpp"
#include "samjpf/vocabulary.hpp"

namespace samjpf {

inline constexpr const char* kCoupledFormat = "sa-mjpf-coupled/1";

struct PositionMessage {
    std::string agent_id;
    long t = 0; // timestep index
    Vec2 position = Vec2::Zero(); // normalized in the sender's training frame
};

/// Lossless in-process link between agents. A message sent at step t becomes
/// readable at step t + latency. Safe for concurrent producers and consumers;
/// each sender's messages come out in the order they went in.
class MessageChannel {
public:
    explicit MessageChannel(int latency = 0) : latency_(latency) {
        if (latency < 0) throw ConfigError("channel latency must be >= 0");
    }

    [[nodiscard]] int latency() const { return latency_; }

    void send(const PositionMessage& msg) {
        std::lock_guard lock(mu_);
        auto& last = last_sent_[msg.agent_id];
        if (last && msg.t <= *last) throw DataError("channel: timestamps from " + msg.agent_id + " must increase");
        last = msg.t;
        queues_[msg.agent_id].push_back(msg);
    }

    /// Pops every message from `sender` that is due at step `now`.
    std::vector<PositionMessage> receive(const std::string& sender, long now) {
        std::lock_guard lock(mu_);
        std::vector<PositionMessage> out;
        auto it = queues_.find(sender);
        if (it == queues_.end()) return out;
        auto& q = it->second;
        while (!q.empty() && q.front().t + latency_ <= now) {
            out.push_back(std::move(q.front()));
            q.pop_front();
        }
        return out;
    }

    [[nodiscard]] std::size_t pending(const std::string& sender) const {
        std::lock_guard lock(mu_);
        auto it = queues_.find(sender);
        return it == queues_.end() ? 0 : it->second.size();
    }

private:
    int latency_;
    mutable std::mutex mu_;
    std::map<std::string, std::deque<PositionMessage>> queues_;
    std::map<std::string, std::optional<long>> last_sent_;
};

/// Sends all messages then reads them back per sender at step `now`.
inline std::vector<PositionMessage> exchange(MessageChannel& channel, const std::vector<PositionMessage>& messages, long now) {
    std::vector<std::string> senders;
    for (const auto& m : messages) {
        channel.send(m);
        if (std::find(senders.begin(), senders.end(), m.agent_id) == senders.end()) senders.push_back(m.agent_id);
    }
    std::vector<PositionMessage> out;
    for (const auto& s : senders) {
        auto got = channel.receive(s, now);
        out.insert(out.end(), got.begin(), got.end());
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return out;
}

struct CoupledAnomalySample {
    long step = 0;
    double t = 0.0;
    double delta = 0.0;
    double cell_prob = 1.0;
    LetterId letter_self = 0;
    LetterId letter_other = 0;
};

/// Position letters and co-occurrence of one agent pair. cooc.m12 is
/// conditioned on the first agent's letter, cooc.m21 on the second's.
struct CoupledModel {
    std::string agent1;
    std::string agent2;
    Codebook codebook1;
    Codebook codebook2;
    std::vector<NormParams> norm1;
    std::vector<NormParams> norm2;
    CoupledCooccurrence cooc;

    [[nodiscard]] bool has_agent(const std::string& id) const { return id == agent1 || id == agent2; }
};

inline CoupledAnomalySample coupled_score(const Eigen::MatrixXd& M, const Codebook& cb_self, const Codebook& cb_other,
                                          const Vec2& pos_self, const Vec2& pos_other, double t) {
    CoupledAnomalySample s;
    s.t = t;
    s.letter_self = assign_letter(cb_self, pos_self);
    s.letter_other = assign_letter(cb_other, pos_other);
    if (s.letter_self >= M.rows() || s.letter_other >= M.cols()) {
        throw ModelError("co-occurrence matrix smaller than the codebooks");
    }
    s.cell_prob = M(s.letter_self, s.letter_other);
    s.delta = 1.0 - s.cell_prob;
    return s;
}

namespace detail {

/// Normalized XY positions of a raw series in a model's frame.
inline Eigen::MatrixX2d xy_positions(const SyncedSeries& series, const std::vector<NormParams>& norm) {
    const SyncedSeries xy = apply_normalization(select_modality(series, Modality::XY), norm);
    return xy.values;
}

inline void check_xy_model(const SwitchingDbnModel& m, const char* who) {
    if (m.modality != Modality::XY) throw ModelError(std::string(who) + " coupled training needs an X-Y model");
}

} // namespace detail

/// Letters come from each agent's X-Y state codebook; the streams are paired
/// index by index and truncated to the shorter one.
inline CoupledModel train_coupled(const std::string& id1, const SwitchingDbnModel& xy1, const SyncedSeries& series1,
                                  const std::string& id2, const SwitchingDbnModel& xy2, const SyncedSeries& series2,
                                  const SmoothingConfig& smoothing = {}) {
    if (id1 == id2) throw ConfigError("coupled model needs two distinct agents");
    detail::check_xy_model(xy1, "first agent:");
    detail::check_xy_model(xy2, "second agent:");
    CoupledModel cm;
    cm.agent1 = id1;
    cm.agent2 = id2;
    cm.codebook1 = xy1.state_codebook;
    cm.codebook2 = xy2.state_codebook;
    cm.norm1 = xy1.norm_params;
    cm.norm2 = xy2.norm_params;
    const Eigen::MatrixX2d p1 = detail::xy_positions(series1, cm.norm1);
    const Eigen::MatrixX2d p2 = detail::xy_positions(series2, cm.norm2);
    const Eigen::Index n = std::min(p1.rows(), p2.rows());
    if (n == 0) throw DataError("coupled training streams are empty");
    std::vector<LetterId> a1(static_cast<std::size_t>(n));
    std::vector<LetterId> a2(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        a1[static_cast<std::size_t>(k)] = assign_letter(cm.codebook1, p1.row(k).transpose());
        a2[static_cast<std::size_t>(k)] = assign_letter(cm.codebook2, p2.row(k).transpose());
    }
    cm.cooc = estimate_coupled_cooccurrence(a1, a2, smoothing, static_cast<int>(cm.codebook1.size()),
                                            static_cast<int>(cm.codebook2.size()));
    return cm;
}

struct CoupledTrace {
    std::string self_id;
    std::string other_id;
    int latency = 0;
    std::vector<CoupledAnomalySample> samples;
};

/// Scores `self_id`'s view of the pair. Both agents publish their positions
/// over a channel each step; self scores its own position against the most
/// recent delivered message of the other agent. Steps before the first
/// delivery produce no sample.
inline CoupledTrace run_coupled(const CoupledModel& cm, const std::string& self_id, const SyncedSeries& series_self,
                                const SyncedSeries& series_other, int latency = 0) {
    if (!cm.has_agent(self_id)) throw ConfigError("agent " + self_id + " is not part of the coupled model");
    const bool first = self_id == cm.agent1;
    const std::string other_id = first ? cm.agent2 : cm.agent1;
    const Eigen::MatrixXd& M = first ? cm.cooc.m12 : cm.cooc.m21;
    const Codebook& cb_self = first ? cm.codebook1 : cm.codebook2;
    const Codebook& cb_other = first ? cm.codebook2 : cm.codebook1;
    const Eigen::MatrixX2d ps = detail::xy_positions(series_self, first ? cm.norm1 : cm.norm2);
    const Eigen::MatrixX2d po = detail::xy_positions(series_other, first ? cm.norm2 : cm.norm1);
    const Eigen::Index n = std::min(ps.rows(), po.rows());

    MessageChannel channel(latency);
    CoupledTrace trace{self_id, other_id, latency, {}};
    trace.samples.reserve(static_cast<std::size_t>(n));
    std::optional<Vec2> latest;
    for (Eigen::Index k = 0; k < n; ++k) {
        channel.send({self_id, k, ps.row(k).transpose()});
        channel.send({other_id, k, po.row(k).transpose()});
        for (const auto& m : channel.receive(other_id, k)) latest = m.position;
        channel.receive(self_id, k); // own echo, unused
        if (!latest) continue;
        auto s = coupled_score(M, cb_self, cb_other, ps.row(k).transpose(), *latest, series_self.time_at(k));
        s.step = k;
        trace.samples.push_back(s);
    }
    return trace;
}

/// Empirical quantile of delta, linear interpolation between order statistics.
inline double delta_quantile(const CoupledTrace& trace, double q) {
    if (trace.samples.empty()) throw EvalError("coupled trace is empty");
    std::vector<double> d;
    d.reserve(trace.samples.size());
    for (const auto& s : trace.samples) d.push_back(s.delta);
    std::sort(d.begin(), d.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(d.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < d.size() ? d[i] * (1.0 - frac) + d[i + 1] * frac : d[i];
}

inline std::string coupled_trace_to_csv(const CoupledTrace& trace) {
    std::string out = "t,delta,cell_prob,letter_self,letter_other\n";
    for (const auto& s : trace.samples) {
        out += io::fmt_num(s.t) + ',' + io::fmt_num(s.delta) + ',' + io::fmt_num(s.cell_prob) + ',' +
               std::to_string(s.letter_self) + ',' + std::to_string(s.letter_other) + '\n';
    }
    return out;
}

inline nlohmann::json coupled_model_to_json(const CoupledModel& cm) {
    auto norms = [](const std::vector<NormParams>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& p : v) a.push_back({{"min", p.min}, {"max", p.max}});
        return a;
    };
    return {{"format", kCoupledFormat},
            {"agent1", cm.agent1},
            {"agent2", cm.agent2},
            {"codebook1", cm.codebook1},
            {"codebook2", cm.codebook2},
            {"norm1", norms(cm.norm1)},
            {"norm2", norms(cm.norm2)},
            {"cooccurrence", cm.cooc}};
}

inline CoupledModel coupled_model_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", std::string{}) != kCoupledFormat) throw ModelFormatError("unsupported coupled model format");
        auto norms = [](const nlohmann::json& a) {
            std::vector<NormParams> v;
            for (const auto& p : a) v.push_back({p.at("min").get<double>(), p.at("max").get<double>()});
            if (v.size() != 2) throw ModelFormatError("coupled model needs 2 normalization entries per agent");
            return v;
        };
        CoupledModel cm;
        j.at("agent1").get_to(cm.agent1);
        j.at("agent2").get_to(cm.agent2);
        cm.codebook1 = j.at("codebook1").get<Codebook>();
        cm.codebook2 = j.at("codebook2").get<Codebook>();
        cm.norm1 = norms(j.at("norm1"));
        cm.norm2 = norms(j.at("norm2"));
        cm.cooc = j.at("cooccurrence").get<CoupledCooccurrence>();
        if (cm.cooc.m_rows() != static_cast<Eigen::Index>(cm.codebook1.size()) ||
            cm.cooc.n_cols() != static_cast<Eigen::Index>(cm.codebook2.size())) {
            throw ModelFormatError("co-occurrence shape does not match the codebooks");
        }
        return cm;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed coupled model: ") + e.what());
    }
}

inline void save_coupled_model(const std::filesystem::path& path, const CoupledModel& cm) {
    io::write_file_atomic(path, coupled_model_to_json(cm).dump(1) + "\n");
}

inline CoupledModel load_coupled_model(const std::filesystem::path& path) {
    return coupled_model_from_json(parse_json_text(io::read_file(path), path.string()));
}

} // namespace samjpf

#endif // SAMJPF_COLLECTIVE_HPP
