#ifndef SAMJPF_MJPF_HPP
#define SAMJPF_MJPF_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "samjpf/data_pipeline.hpp"
#include "samjpf/dbn_model.hpp"
#include "samjpf/error.hpp"
#include "samjpf/gaussian.hpp"
#include "samjpf/io.hpp"
#include "samjpf/types.hpp"

namespace samjpf {

inline constexpr double kDefaultThreshold = 0.3;

struct MjpfConfig {
    int particles_per_word = 10;
    /// Upper bound on the particle count; 0 leaves it unbounded.
    int max_particles = 500;
    double resample_threshold = 0.5;
    Mat2 obs_noise = Mat2::Identity() * 2e-3;
    /// Extra state-block process noise, as a multiple of obs_noise.
    double process_floor = 1.0;
    /// Weight of the active word's state-letter Gaussian as a prior on the
    /// predicted state (pseudo-observation with covariance kappa*cov + R).
    /// Zero disables it.
    double region_kappa = 20.0;
    /// Log-likelihood below which every particle counts as lost.
    double divergence_log_floor = -700.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (particles_per_word < 1) throw ConfigError("mjpf: particles_per_word must be >= 1");
        if (max_particles < 0) throw ConfigError("mjpf: max_particles must be >= 0");
        if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) throw ConfigError("mjpf: resample_threshold must be in (0,1]");
        if (Eigen::LLT<Mat2>(obs_noise).info() != Eigen::Success || !obs_noise.isApprox(obs_noise.transpose())) {
            throw ConfigError("mjpf: obs_noise must be symmetric positive definite");
        }
        if (!(process_floor >= 0.0) || !(region_kappa >= 0.0)) throw ConfigError("mjpf: floor and kappa must be >= 0");
    }
};

struct Particle {
    int word = 0;
    double weight = 0.0;
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Identity();
};

struct AnomalySample {
    long step = 0;
    double t = 0.0;
    double theta = 0.0;
    double lambda = 1.0;
    int map_word = 0;
    bool novel_word = false;
    bool reinitialized = false;
    Vec4 state_estimate = Vec4::Zero();
};

struct TimeWindow {
    double t_start = 0.0;
    double t_end = 0.0;

    [[nodiscard]] bool contains(double t) const { return t >= t_start && t <= t_end; }
};

struct AnomalyTrace {
    std::vector<AnomalySample> samples;
    double threshold = kDefaultThreshold;
    Modality modality = Modality::XY;
    std::vector<TimeWindow> truth_windows;
    double ms_per_sample = 0.0;
};

/// Systematic resampling to n particles with weights 1/n. Input weights
/// must be normalized.
template <typename Rng>
std::vector<Particle> systematic_resample(const std::vector<Particle>& particles, int n, Rng& rng) {
    if (particles.empty() || n < 1) throw ConfigError("resample: need particles and n >= 1");
    std::uniform_real_distribution<double> unif(0.0, 1.0 / n);
    const double u0 = unif(rng);
    std::vector<Particle> next;
    next.reserve(static_cast<std::size_t>(n));
    double c = particles.front().weight;
    std::size_t i = 0;
    for (int m = 0; m < n; ++m) {
        const double u = u0 + static_cast<double>(m) / n;
        while (u > c && i + 1 < particles.size()) c += particles[++i].weight;
        next.push_back(particles[i]);
        next.back().weight = 1.0 / n;
    }
    return next;
}

class MjpfFilter {
public:
    MjpfFilter(const SwitchingDbnModel& model, const MjpfConfig& cfg, const Vec2& z0)
        : model_(&model), cfg_(cfg), rng_(cfg.seed), z_prev_(z0) {
        cfg_.validate();
        const int k = model.num_words();
        if (k == 0) throw ModelError("mjpf: model has no words");
        if (static_cast<int>(model.dynamics.size()) != k) throw ModelError("mjpf: dynamics missing for some words");
        n_ = cfg_.particles_per_word * k;
        if (cfg_.max_particles > 0) n_ = std::min(n_, std::max(cfg_.max_particles, 1));
        cumulative_.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            auto& row = cumulative_[static_cast<std::size_t>(i)];
            row.resize(static_cast<std::size_t>(k));
            double acc = 0.0;
            for (int j = 0; j < k; ++j) {
                acc += model.dictionary.transition(i, j);
                row[static_cast<std::size_t>(j)] = acc;
            }
            for (auto& v : row) v /= acc;
        }
        initialize(z0);
    }

    [[nodiscard]] const std::vector<Particle>& particles() const { return particles_; }
    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] long steps() const { return step_; }

    [[nodiscard]] double effective_sample_size() const {
        double s = 0.0;
        for (const auto& p : particles_) s += p.weight * p.weight;
        return 1.0 / s;
    }

    [[nodiscard]] Vec4 state_estimate() const {
        Vec4 m = Vec4::Zero();
        for (const auto& p : particles_) m += p.weight * p.mean;
        return m;
    }

    /// Particles spread round-robin over the dictionary; beliefs centred on z
    /// with the word's mean velocity and letter covariances.
    void initialize(const Vec2& z) {
        const int k = model_->num_words();
        particles_.assign(static_cast<std::size_t>(n_), Particle{});
        for (int i = 0; i < n_; ++i) {
            auto& p = particles_[static_cast<std::size_t>(i)];
            p.word = i % k;
            p.weight = 1.0 / n_;
            set_belief(p, z);
        }
    }

    AnomalySample step(const Vec2& z) {
        if (!z.allFinite()) throw DataError("mjpf: non-finite observation at step " + std::to_string(step_ + 1));
        ++step_;
        const Mat2& R = cfg_.obs_noise;

        // discrete then continuous prediction
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> region_ll(particles_.size(), 0.0);
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            auto& p = particles_[i];
            const auto& row = cumulative_[static_cast<std::size_t>(p.word)];
            const double u = unif(rng_);
            auto it = std::upper_bound(row.begin(), row.end(), u);
            if (it == row.end()) --it;
            p.word = static_cast<int>(it - row.begin());
            const auto& dyn = model_->dynamics[static_cast<std::size_t>(p.word)];
            p.mean = dyn.predict_mean(p.mean);
            p.cov = dyn.predict_cov(p.cov);
            p.cov.topLeftCorner<2, 2>() += cfg_.process_floor * R;
            if (cfg_.region_kappa > 0.0) region_ll[i] = apply_region_prior(p);
        }
        if (cfg_.region_kappa > 0.0) reweight(region_ll);

        // moment-matched predictive density on the observed block
        Vec2 m = Vec2::Zero();
        for (const auto& p : particles_) m += p.weight * p.mean.head<2>();
        Mat2 S = Mat2::Zero();
        for (const auto& p : particles_) {
            const Vec2 d = p.mean.head<2>() - m;
            S += p.weight * (p.cov.topLeftCorner<2, 2>() + d * d.transpose());
        }
        S = repair_spd(S);

        AnomalySample out;
        out.step = step_;
        out.lambda = bhattacharyya_gaussian(m, S, z, R);
        out.theta = hellinger_from_bc(out.lambda);

        // Kalman update and reweighting
        std::vector<double> loglik(particles_.size());
        double max_ll = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            auto& p = particles_[i];
            loglik[i] = condition(p, z, R);
            max_ll = std::max(max_ll, loglik[i]);
        }
        const bool lost = !std::isfinite(max_ll) || max_ll < cfg_.divergence_log_floor;
        if (lost || !reweight(loglik)) {
            initialize(z);
            out.lambda = 0.0;
            out.theta = 1.0;
            out.reinitialized = true;
        } else if (effective_sample_size() < cfg_.resample_threshold * n_) {
            resample();
        }
        if (!(out.theta >= 0.0 && out.theta <= 1.0)) throw NumericError("mjpf: theta outside [0,1]");

        out.state_estimate = state_estimate();
        out.map_word = map_word();
        const Vec2 deriv = (z - z_prev_) / model_->dt;
        out.novel_word = !lookup_word(model_->dictionary, assign_letter(model_->state_codebook, z),
                                      assign_letter(model_->deriv_codebook, deriv))
                              .has_value();
        z_prev_ = z;
        return out;
    }

private:
    void set_belief(Particle& p, const Vec2& z) const {
        const auto& w = model_->dictionary.words[static_cast<std::size_t>(p.word)];
        p.mean << z, w.mean_velocity;
        p.cov.setZero();
        p.cov.topLeftCorner<2, 2>() = model_->state_codebook.node(w.state_letter).cov;
        p.cov.bottomRightCorner<2, 2>() = model_->deriv_codebook.node(w.deriv_letter).cov;
    }

    /// Conditions the prediction on the word's state-letter Gaussian, treated
    /// as a pseudo-observation; returns its log marginal likelihood.
    double apply_region_prior(Particle& p) const {
        const auto& w = model_->dictionary.words[static_cast<std::size_t>(p.word)];
        const auto& node = model_->state_codebook.node(w.state_letter);
        const Mat2 C = cfg_.region_kappa * node.cov + cfg_.obs_noise;
        return condition(p, node.mean, C);
    }

    /// Multiplies weights by exp(loglik) and normalizes. Returns false when
    /// every particle is lost.
    bool reweight(const std::vector<double>& loglik) {
        const double max_ll = *std::max_element(loglik.begin(), loglik.end());
        if (!std::isfinite(max_ll)) return false;
        double total = 0.0;
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            particles_[i].weight *= std::exp(loglik[i] - max_ll);
            total += particles_[i].weight;
        }
        if (!(total > 0.0) || !std::isfinite(total)) return false;
        for (auto& p : particles_) p.weight /= total;
        return true;
    }

    /// Kalman update of the state block against z ~ N(H x, R); returns the
    /// log marginal likelihood of z under the particle's prediction.
    static double condition(Particle& p, const Vec2& z, const Mat2& R) {
        const Vec2 y = z - p.mean.head<2>();
        const Mat2 Sy = p.cov.topLeftCorner<2, 2>() + R;
        const Eigen::LLT<Mat2> llt(Sy);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        const Eigen::Matrix<double, 4, 2> K = llt.solve(p.cov.topRows<2>()).transpose();
        // Joseph form keeps the covariance symmetric positive definite
        Mat4 IKH = Mat4::Identity();
        IKH.leftCols<2>() -= K;
        p.mean += K * y;
        p.cov = IKH * p.cov * IKH.transpose() + K * R * K.transpose();
        p.cov = 0.5 * (p.cov + p.cov.transpose());
        const double maha = y.dot(llt.solve(y));
        const double logdet = 2.0 * std::log(llt.matrixLLT()(0, 0) * llt.matrixLLT()(1, 1));
        return -0.5 * (maha + logdet) - std::log(2.0 * std::numbers::pi);
    }

    void resample() { particles_ = systematic_resample(particles_, n_, rng_); }

    [[nodiscard]] int map_word() const {
        std::vector<double> mass(static_cast<std::size_t>(model_->num_words()), 0.0);
        for (const auto& p : particles_) mass[static_cast<std::size_t>(p.word)] += p.weight;
        return static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());
    }

    const SwitchingDbnModel* model_;
    MjpfConfig cfg_;
    std::mt19937_64 rng_;
    Vec2 z_prev_;
    int n_ = 0;
    long step_ = 0;
    std::vector<std::vector<double>> cumulative_;
    std::vector<Particle> particles_;
};

/// Scales the modality's channels of a raw series with the model's ranges.
inline SyncedSeries prepare_observations(const SwitchingDbnModel& model, const SyncedSeries& series) {
    SyncedSeries pair = select_modality(series, model.modality);
    pair.norm_params.clear();
    return apply_normalization(pair, model.norm_params);
}

/// Runs the filter over a raw series: initialized on the first row, one
/// sample per remaining row.
inline AnomalyTrace run_trace(const SwitchingDbnModel& model, const MjpfConfig& cfg, const SyncedSeries& series,
                              std::vector<TimeWindow> truth_windows = {}, double threshold = kDefaultThreshold) {
    if (series.length() < 2) throw DataError("run_trace: need at least 2 samples");
    const SyncedSeries obs = prepare_observations(model, series);
    AnomalyTrace trace;
    trace.modality = model.modality;
    trace.threshold = threshold;
    trace.truth_windows = std::move(truth_windows);
    MjpfFilter filter(model, cfg, obs.values.row(0).transpose());
    trace.samples.reserve(static_cast<std::size_t>(obs.length() - 1));
    const auto start = std::chrono::steady_clock::now();
    for (Eigen::Index k = 1; k < obs.length(); ++k) {
        try {
            auto s = filter.step(obs.values.row(k).transpose());
            s.t = obs.time_at(k);
            trace.samples.push_back(s);
        } catch (const Error& e) {
            throw Error("timestep " + std::to_string(k) + ": " + e.what());
        }
    }
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    trace.ms_per_sample = elapsed.count() / static_cast<double>(trace.samples.size());
    return trace;
}

inline std::string trace_to_csv(const AnomalyTrace& trace) {
    std::string out = "t,theta,lambda,map_word,novel_word,x1,x2,dx1,dx2\n";
    for (const auto& s : trace.samples) {
        out += io::fmt_num(s.t) + ',' + io::fmt_num(s.theta) + ',' + io::fmt_num(s.lambda) + ',' +
               std::to_string(s.map_word) + ',' + (s.novel_word ? "1" : "0");
        for (int c = 0; c < 4; ++c) out += ',' + io::fmt_num(s.state_estimate(c));
        out += '\n';
    }
    return out;
}

/// Reads the t and theta columns of a trace CSV.
inline AnomalyTrace trace_from_csv(const std::string& text, Modality modality) {
    const auto table = io::parse_csv(text);
    const auto tc = table.column("t");
    const auto hc = table.column("theta");
    const auto lc = table.column("lambda");
    if (tc < 0 || hc < 0) throw SchemaError("trace CSV needs t and theta columns");
    AnomalyTrace trace;
    trace.modality = modality;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        AnomalySample s;
        s.step = static_cast<long>(r + 1);
        s.t = io::parse_double(row.at(static_cast<std::size_t>(tc)), table.line_numbers[r]);
        s.theta = io::parse_double(row.at(static_cast<std::size_t>(hc)), table.line_numbers[r]);
        if (lc >= 0) s.lambda = io::parse_double(row.at(static_cast<std::size_t>(lc)), table.line_numbers[r]);
        trace.samples.push_back(s);
    }
    return trace;
}

} // namespace samjpf

#endif // SAMJPF_MJPF_HPP
