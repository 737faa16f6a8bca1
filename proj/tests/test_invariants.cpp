#include <catch_amalgamated.hpp>

#include "fuzz.hpp"
#include "samjpf/scenario.hpp"

using namespace samjpf;

TEST_CASE("structural invariants hold over 10^4 fuzz cases") {
    const auto rep = fuzz::run(10000, 2024);
    CHECK(rep.cases == 10000);
    for (const auto& m : rep.messages) UNSCOPED_INFO(m);
    CHECK(rep.violations == 0);
}

TEST_CASE("theta is non-decreasing in the mean separation") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 500; ++trial) {
        const Mat2 c1 = fuzz::random_spd<2>(rng, 1e-3, 10.0);
        const Mat2 c2 = fuzz::random_spd<2>(rng, 1e-3, 10.0);
        Vec2 dir(g(rng), g(rng));
        dir.normalize();
        double prev = -1.0;
        for (double r = 0.0; r < 20.0; r += 0.25) {
            const double th = hellinger_from_bc(bhattacharyya_gaussian(Vec2::Zero(), c1, Vec2(r * dir), c2));
            if (th < prev - 1e-12) FAIL("theta decreased at r=" << r);
            prev = th;
        }
    }
}

TEST_CASE("training and filtering are deterministic under a fixed seed") {
    ScenarioSpec spec;
    spec.laps = 1;
    spec.seed = 9;
    const auto a = generate(spec);
    const auto b = generate(spec);
    const auto& s = a.agents[0].series;
    for (auto m : kAllModalities) {
        const auto m1 = train_model(s, m);
        const auto m2 = train_model(b.agents[0].series, m);
        CHECK(serialize_model(m1) == serialize_model(m2));
        const auto t1 = run_trace(m1, MjpfConfig{}, s, {});
        const auto t2 = run_trace(m2, MjpfConfig{}, s, {});
        REQUIRE(t1.samples.size() == t2.samples.size());
        bool same = true;
        for (std::size_t k = 0; k < t1.samples.size(); ++k) same = same && t1.samples[k].theta == t2.samples[k].theta;
        CHECK(same);
    }
}
