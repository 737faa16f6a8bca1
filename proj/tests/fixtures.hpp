#ifndef SAMJPF_TESTS_FIXTURES_HPP
#define SAMJPF_TESTS_FIXTURES_HPP

#include <vector>

#include "samjpf/dbn_model.hpp"

namespace fixture {

using namespace samjpf;

/// Hand-built model whose words are given by their mean velocities. Word i
/// uses state letter i and derivative letter i; transitions are uniform
/// unless `stay` > 0, which puts that mass on the diagonal.
inline SwitchingDbnModel hand_model(const std::vector<Vec2>& velocities, double dt = 0.1, double state_var = 1e-2,
                                    double deriv_var = 1e-4, double stay = 0.0) {
    SwitchingDbnModel m;
    m.modality = Modality::XY;
    m.dt = dt;
    m.channel_names = {"x", "y"};
    m.norm_params = {{0.0, 1.0}, {0.0, 1.0}};
    const int k = static_cast<int>(velocities.size());
    m.state_codebook.space = SpaceTag::State;
    m.deriv_codebook.space = SpaceTag::Derivative;
    for (int i = 0; i < k; ++i) {
        m.state_codebook.nodes.push_back({i, Vec2(0.5, 0.5 + 0.01 * i), Mat2::Identity() * state_var, 1});
        m.deriv_codebook.nodes.push_back({i, velocities[static_cast<std::size_t>(i)], Mat2::Identity() * deriv_var, 1});
        m.dictionary.words.push_back({i, i, i, velocities[static_cast<std::size_t>(i)], 1});
    }
    m.dictionary.transition = Eigen::MatrixXd::Constant(k, k, (1.0 - stay) / k);
    m.dictionary.transition.diagonal().array() += stay;
    for (const auto& w : m.dictionary.words) {
        m.dynamics.push_back(build_word_dynamics(w, Mat2::Identity() * deriv_var, dt, DynamicsMode::Kinematic));
    }
    return m;
}

} // namespace fixture

#endif // SAMJPF_TESTS_FIXTURES_HPP
