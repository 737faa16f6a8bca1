#ifndef SAMJPF_GNG_HPP
#define SAMJPF_GNG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "samjpf/error.hpp"
#include "samjpf/types.hpp"

namespace samjpf {

using LetterId = int;

/// Growing Neural Gas hyperparameters (Fritzke's defaults).
struct GngParams {
    int max_nodes = 30;
    int lambda_insert = 100;
    double eps_b = 0.2;
    double eps_n = 0.006;
    int a_max = 50;
    double alpha = 0.5;
    double d_decay = 0.995;
    int epochs = 10;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(eps_n > 0.0 && eps_n <= eps_b && eps_b < 1.0)) throw ConfigError("gng: need 0 < eps_n <= eps_b < 1");
        if (max_nodes < 2) throw ConfigError("gng: max_nodes must be >= 2");
        if (lambda_insert <= 0 || a_max <= 0 || epochs <= 0) throw ConfigError("gng: counts must be positive");
        if (!(alpha > 0.0 && alpha <= 1.0) || !(d_decay > 0.0 && d_decay <= 1.0)) {
            throw ConfigError("gng: decay factors must lie in (0, 1]");
        }
    }

    friend bool operator==(const GngParams&, const GngParams&) = default;
};

enum class SpaceTag { State, Derivative };

inline std::string_view space_tag_name(SpaceTag t) { return t == SpaceTag::State ? "STATE" : "DERIVATIVE"; }

struct CodebookNode {
    LetterId id = 0;
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    std::size_t count = 0;
};

/// Trained letters of one space. Node ids are dense: nodes[i].id == i.
struct Codebook {
    std::vector<CodebookNode> nodes;
    std::set<std::pair<LetterId, LetterId>> edges; // first < second
    SpaceTag space = SpaceTag::State;

    [[nodiscard]] std::size_t size() const { return nodes.size(); }
    [[nodiscard]] const CodebookNode& node(LetterId id) const { return nodes.at(static_cast<std::size_t>(id)); }
};

/// Regularization added to every node covariance.
inline constexpr double kCovarianceFloor = 1e-6;

/// Nearest node mean in Euclidean distance; ties go to the lowest id.
inline LetterId assign_letter(const Codebook& cb, const Vec2& sample) {
    if (cb.nodes.empty()) throw ModelError("assign_letter: empty codebook");
    if (!sample.allFinite()) throw DataError("assign_letter: non-finite sample");
    LetterId best = cb.nodes.front().id;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& n : cb.nodes) {
        const double d = (n.mean - sample).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = n.id;
        }
    }
    return best;
}

namespace detail {

struct GngGraph {
    std::vector<Vec2> w;
    std::vector<double> err;
    std::vector<bool> alive;
    // age matrix; -1 = no edge
    std::vector<std::vector<int>> age;

    int add(const Vec2& v, double e) {
        w.push_back(v);
        err.push_back(e);
        alive.push_back(true);
        for (auto& row : age) row.push_back(-1);
        age.emplace_back(w.size(), -1);
        return static_cast<int>(w.size()) - 1;
    }
    void connect(int a, int b) { age[a][b] = age[b][a] = 0; }
    void disconnect(int a, int b) { age[a][b] = age[b][a] = -1; }
    [[nodiscard]] bool has_edge(int a, int b) const { return age[a][b] >= 0; }
    [[nodiscard]] int live_count() const { return static_cast<int>(std::count(alive.begin(), alive.end(), true)); }
};

/// Lloyd refinement from the given seeds until the hard partition is stable.
/// Empty clusters are dropped. Returns the surviving seed indices.
inline std::vector<int> refine_partition(const Eigen::MatrixX2d& data, std::vector<Vec2>& means,
                                         std::vector<int>& assign) {
    const auto n = static_cast<std::size_t>(data.rows());
    std::vector<int> keep(means.size());
    std::iota(keep.begin(), keep.end(), 0);
    assign.assign(n, -1);
    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 x = data.row(static_cast<Eigen::Index>(i)).transpose();
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < means.size(); ++k) {
                const double d = (means[k] - x).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(k);
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        // drop empties, recompute means
        std::vector<std::size_t> counts(means.size(), 0);
        std::vector<Vec2> sums(means.size(), Vec2::Zero());
        for (std::size_t i = 0; i < n; ++i) {
            counts[static_cast<std::size_t>(assign[i])] += 1;
            sums[static_cast<std::size_t>(assign[i])] += data.row(static_cast<Eigen::Index>(i)).transpose();
        }
        std::vector<int> remap(means.size(), -1);
        std::vector<Vec2> next;
        std::vector<int> next_keep;
        for (std::size_t k = 0; k < means.size(); ++k) {
            if (counts[k] == 0) continue;
            remap[k] = static_cast<int>(next.size());
            next.push_back(sums[k] / static_cast<double>(counts[k]));
            next_keep.push_back(keep[k]);
        }
        if (next.size() != means.size()) changed = true;
        for (auto& a : assign) a = remap[static_cast<std::size_t>(a)];
        means = std::move(next);
        keep = std::move(next_keep);
        if (!changed) break;
    }
    return keep;
}

} // namespace detail

/// Fritzke's Growing Neural Gas over 2-D samples, followed by a hard
/// nearest-node partition from which each node's statistics are computed.
/// Growth stops at `max_nodes`; training ends with the epoch in which the
/// cap was reached, or after `epochs` passes.
inline Codebook train_gng(const Eigen::MatrixX2d& data, const GngParams& params, SpaceTag space = SpaceTag::State) {
    params.validate();
    const Eigen::Index n = data.rows();
    if (n < 2) throw DataError("train_gng: need at least 2 samples");
    if (!data.allFinite()) throw DataError("train_gng: non-finite sample");

    std::mt19937_64 rng(params.seed);
    detail::GngGraph g;
    {
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        const Eigen::Index a = pick(rng);
        Eigen::Index b = pick(rng);
        if (n > 1) {
            while (b == a) b = pick(rng);
        }
        g.add(data.row(a).transpose(), 0.0);
        g.add(data.row(b).transpose(), 0.0);
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    long step = 0;
    bool capped = false;
    for (int epoch = 0; epoch < params.epochs && !capped; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (const Eigen::Index idx : order) {
            const Vec2 x = data.row(idx).transpose();
            ++step;
            // winner and runner-up
            int s1 = -1, s2 = -1;
            double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
            for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                if (!g.alive[k]) continue;
                const double d = (g.w[k] - x).squaredNorm();
                if (d < d1) {
                    d2 = d1;
                    s2 = s1;
                    d1 = d;
                    s1 = k;
                } else if (d < d2) {
                    d2 = d;
                    s2 = k;
                }
            }
            for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                if (g.has_edge(s1, k)) g.age[s1][k] = ++g.age[k][s1];
            }
            g.err[s1] += d1;
            g.w[s1] += params.eps_b * (x - g.w[s1]);
            for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                if (k != s1 && g.has_edge(s1, k)) g.w[k] += params.eps_n * (x - g.w[k]);
            }
            if (s2 >= 0) g.connect(s1, s2);

            for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                if (g.has_edge(s1, k) && g.age[s1][k] > params.a_max) g.disconnect(s1, k);
            }
            for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                if (!g.alive[k]) continue;
                bool connected = false;
                for (int j = 0; j < static_cast<int>(g.w.size()) && !connected; ++j) connected = g.has_edge(k, j);
                if (!connected && g.live_count() > 2) g.alive[k] = false;
            }

            if (step % params.lambda_insert == 0) {
                if (g.live_count() >= params.max_nodes) {
                    capped = true;
                } else {
                    int q = -1;
                    for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                        if (g.alive[k] && (q < 0 || g.err[k] > g.err[q])) q = k;
                    }
                    int f = -1;
                    for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
                        if (g.alive[k] && g.has_edge(q, k) && (f < 0 || g.err[k] > g.err[f])) f = k;
                    }
                    if (f >= 0) {
                        const int r = g.add(0.5 * (g.w[q] + g.w[f]), 0.0);
                        g.disconnect(q, f);
                        g.connect(q, r);
                        g.connect(r, f);
                        g.err[q] *= params.alpha;
                        g.err[f] *= params.alpha;
                        g.err[r] = g.err[q];
                    }
                    if (g.live_count() >= params.max_nodes) capped = true;
                }
            }
            for (auto& e : g.err) e *= params.d_decay;
        }
    }

    // final hard assignment and statistics
    std::vector<int> live;
    std::vector<Vec2> means;
    for (int k = 0; k < static_cast<int>(g.w.size()); ++k) {
        if (g.alive[k]) {
            live.push_back(k);
            means.push_back(g.w[k]);
        }
    }
    // Nodes closer than the data's rounding noise describe one cluster.
    const double scale = 1.0 + (data.colwise().maxCoeff() - data.colwise().minCoeff()).norm();
    const double tol2 = std::pow(1e-9 * scale, 2);
    std::vector<int> assign;
    for (int pass = 0; pass < 5; ++pass) {
        std::vector<Vec2> unique;
        std::vector<int> unique_live;
        for (std::size_t k = 0; k < means.size(); ++k) {
            const bool dup = std::any_of(unique.begin(), unique.end(),
                                         [&](const Vec2& u) { return (u - means[k]).squaredNorm() <= tol2; });
            if (dup) continue;
            unique.push_back(means[k]);
            unique_live.push_back(live[k]);
        }
        const bool merged = unique.size() != means.size();
        means = std::move(unique);
        live = std::move(unique_live);
        const std::vector<int> kept = detail::refine_partition(data, means, assign);
        std::vector<int> survivors;
        for (int k : kept) survivors.push_back(live[static_cast<std::size_t>(k)]);
        live = std::move(survivors);
        if (!merged) break;
    }

    Codebook cb;
    cb.space = space;
    cb.nodes.resize(means.size());
    for (std::size_t k = 0; k < means.size(); ++k) {
        cb.nodes[k].id = static_cast<LetterId>(k);
        cb.nodes[k].mean = means[k];
        cb.nodes[k].cov.setZero();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& node = cb.nodes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        const Vec2 d = data.row(i).transpose() - node.mean;
        node.cov += d * d.transpose();
        node.count += 1;
    }
    for (auto& node : cb.nodes) {
        node.cov /= static_cast<double>(node.count);
        node.cov = 0.5 * (node.cov + node.cov.transpose()) + kCovarianceFloor * Mat2::Identity();
    }
    // carry over GNG edges between surviving nodes
    std::vector<int> graph_to_node(g.w.size(), -1);
    for (std::size_t k = 0; k < live.size(); ++k) {
        graph_to_node[static_cast<std::size_t>(live[k])] = static_cast<int>(k);
    }
    for (int a = 0; a < static_cast<int>(g.w.size()); ++a) {
        for (int b = a + 1; b < static_cast<int>(g.w.size()); ++b) {
            if (!g.has_edge(a, b)) continue;
            const int na = graph_to_node[static_cast<std::size_t>(a)];
            const int nb = graph_to_node[static_cast<std::size_t>(b)];
            if (na >= 0 && nb >= 0 && na != nb) cb.edges.emplace(std::min(na, nb), std::max(na, nb));
        }
    }
    return cb;
}

/// Mean squared distance of each sample to its assigned node.
inline double quantization_error(const Codebook& cb, const Eigen::MatrixX2d& data) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const Vec2 x = data.row(i).transpose();
        sum += (cb.node(assign_letter(cb, x)).mean - x).squaredNorm();
    }
    return sum / static_cast<double>(data.rows());
}

// JSON ------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const GngParams& p) {
    j = {{"max_nodes", p.max_nodes}, {"lambda_insert", p.lambda_insert}, {"eps_b", p.eps_b},
         {"eps_n", p.eps_n},         {"a_max", p.a_max},                 {"alpha", p.alpha},
         {"d_decay", p.d_decay},     {"epochs", p.epochs},               {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, GngParams& p) {
    j.at("max_nodes").get_to(p.max_nodes);
    j.at("lambda_insert").get_to(p.lambda_insert);
    j.at("eps_b").get_to(p.eps_b);
    j.at("eps_n").get_to(p.eps_n);
    j.at("a_max").get_to(p.a_max);
    j.at("alpha").get_to(p.alpha);
    j.at("d_decay").get_to(p.d_decay);
    j.at("epochs").get_to(p.epochs);
    j.at("seed").get_to(p.seed);
}

inline void to_json(nlohmann::json& j, const Codebook& cb) {
    auto nodes = nlohmann::json::array();
    for (const auto& n : cb.nodes) {
        nodes.push_back({{"id", n.id},
                         {"mean", {n.mean.x(), n.mean.y()}},
                         {"cov", {n.cov(0, 0), n.cov(0, 1), n.cov(1, 0), n.cov(1, 1)}},
                         {"count", n.count}});
    }
    auto edges = nlohmann::json::array();
    for (const auto& [a, b] : cb.edges) edges.push_back({a, b});
    j = {{"nodes", nodes}, {"edges", edges}, {"space_tag", space_tag_name(cb.space)}};
}

inline void from_json(const nlohmann::json& j, Codebook& cb) {
    cb = Codebook{};
    const auto tag = j.at("space_tag").get<std::string>();
    if (tag == "STATE") {
        cb.space = SpaceTag::State;
    } else if (tag == "DERIVATIVE") {
        cb.space = SpaceTag::Derivative;
    } else {
        throw ModelFormatError("codebook: unknown space_tag '" + tag + "'");
    }
    for (const auto& jn : j.at("nodes")) {
        CodebookNode n;
        n.id = jn.at("id").get<LetterId>();
        const auto m = jn.at("mean").get<std::vector<double>>();
        const auto c = jn.at("cov").get<std::vector<double>>();
        if (m.size() != 2 || c.size() != 4) throw ModelFormatError("codebook: node " + std::to_string(n.id) + " malformed");
        n.mean << m[0], m[1];
        n.cov << c[0], c[1], c[2], c[3];
        n.count = jn.at("count").get<std::size_t>();
        if (n.id != static_cast<LetterId>(cb.nodes.size())) throw ModelFormatError("codebook: node ids must be dense");
        cb.nodes.push_back(n);
    }
    if (cb.nodes.empty()) throw ModelFormatError("codebook: no nodes");
    for (const auto& e : j.at("edges")) {
        const auto a = e.at(0).get<LetterId>();
        const auto b = e.at(1).get<LetterId>();
        if (a < 0 || b < 0 || a >= static_cast<LetterId>(cb.nodes.size()) || b >= static_cast<LetterId>(cb.nodes.size())) {
            throw ModelFormatError("codebook: edge endpoint out of range");
        }
        cb.edges.emplace(std::min(a, b), std::max(a, b));
    }
}

} // namespace samjpf

#endif // SAMJPF_GNG_HPP
