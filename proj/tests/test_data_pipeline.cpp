#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "samjpf/data_pipeline.hpp"

using namespace samjpf;
using Catch::Approx;

namespace {

SyncedSeries series_from(std::initializer_list<std::vector<double>> cols, double dt = 0.1) {
    SyncedSeries s;
    s.dt = dt;
    const auto n = static_cast<Eigen::Index>(cols.begin()->size());
    s.values.resize(n, static_cast<Eigen::Index>(cols.size()));
    Eigen::Index c = 0;
    for (const auto& col : cols) {
        s.names.push_back("c" + std::to_string(c));
        for (Eigen::Index k = 0; k < n; ++k) s.values(k, c) = col[static_cast<std::size_t>(k)];
        ++c;
    }
    return s;
}

SyncedSeries xy_series(const std::vector<double>& x, const std::vector<double>& y, double dt) {
    auto s = series_from({x, y}, dt);
    s.names = {"x", "y"};
    return s;
}

} // namespace

TEST_CASE("load_csv splits a table into channels") {
    const auto table = io::parse_csv("t,x,y\n0,1,2\n0.1,3,4\n0.2,5,6\n");
    CsvSchema schema;
    schema.channels = {{"x", "x"}, {"y", "y"}};
    const auto chans = parse_channels(table, schema);
    REQUIRE(chans.size() == 2);
    CHECK(chans[0].name == "x");
    CHECK(chans[0].samples.size() == 3);
    CHECK(chans[1].samples[2].value == 6.0);
    CHECK(chans[1].samples[1].t == Approx(0.1));
}

TEST_CASE("load_csv rejects bad input") {
    CsvSchema schema;
    schema.channels = {{"x", "x"}};
    SECTION("duplicated timestamp names the row") {
        const auto table = io::parse_csv("t,x\n0,1\n1,2\n1,3\n");
        try {
            parse_channels(table, schema);
            FAIL("expected a data error");
        } catch (const DataError& e) {
            CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("line 4"));
        }
    }
    SECTION("empty file") {
        CHECK_THROWS_MATCHES(parse_channels(io::parse_csv(""), schema), Error,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("2 samples")) ||
                                 Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("timestamp")));
    }
    SECTION("missing column") {
        CsvSchema s2;
        s2.channels = {{"power", "power"}};
        CHECK_THROWS_AS(parse_channels(io::parse_csv("t,x\n0,1\n1,2\n"), s2), SchemaError);
    }
}

TEST_CASE("load_series reads a file from disk") {
    const auto dir = std::filesystem::temp_directory_path() / "samjpf_dp_test";
    std::filesystem::create_directories(dir);
    io::write_file_atomic(dir / "a.csv", "t,x,y\n0,0,0\n0.5,1,2\n1.0,2,4\n");
    const auto s = load_series(dir / "a.csv", CsvSchema::for_modality(Modality::XY));
    CHECK(s.dt == Approx(0.5));
    CHECK(s.length() == 3);
    CHECK(s.values(2, s.column("y")) == Approx(4.0));
    std::filesystem::remove_all(dir);
}

TEST_CASE("synchronize interpolates onto a uniform grid") {
    SECTION("identical grid is an identity") {
        RawChannel a{"a", {{0, 1}, {0.1, 2}, {0.2, 3}}};
        RawChannel b{"b", {{0, 5}, {0.1, 6}, {0.2, 7}}};
        const auto s = synchronize({a, b}, 0.1);
        REQUIRE(s.length() == 3);
        CHECK(s.values(1, 0) == Approx(2.0));
        CHECK(s.values(2, 1) == Approx(7.0));
    }
    SECTION("linear signal at half step") {
        RawChannel a{"a", {{0, 0}, {1, 1}, {2, 2}}};
        const auto s = synchronize({a}, 0.5);
        REQUIRE(s.length() == 5);
        for (Eigen::Index k = 0; k < 5; ++k) CHECK(s.values(k, 0) == Approx(0.5 * k).margin(1e-12));
    }
    SECTION("disjoint ranges") {
        RawChannel a{"a", {{0, 0}, {10, 1}}};
        RawChannel b{"b", {{20, 0}, {30, 1}}};
        CHECK_THROWS_AS(synchronize({a, b}, 0.1), SyncError);
    }
    SECTION("non-positive dt") {
        RawChannel a{"a", {{0, 0}, {10, 1}}};
        CHECK_THROWS_AS(synchronize({a}, 0.0), ConfigError);
    }
}

TEST_CASE("synchronize is idempotent") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5, 5);
    RawChannel a{"a", {}};
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
        t += 0.05 + 0.1 * std::abs(u(rng)) / 5.0;
        a.samples.push_back({t, u(rng)});
    }
    const auto s1 = synchronize({a}, 0.1);
    const auto s2 = synchronize(to_channels(s1), 0.1);
    REQUIRE(s2.length() == s1.length());
    CHECK((s2.values - s1.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("normalize scales columns to [0,1]") {
    auto s = series_from({{0, 5, 10}, {0, 0.5, 1}});
    const auto n = normalize(s);
    CHECK(n.values(1, 0) == Approx(0.5));
    CHECK(n.values(2, 0) == Approx(1.0));
    CHECK((n.values.col(1) - s.values.col(1)).cwiseAbs().maxCoeff() < 1e-15);

    SECTION("test data reuses training parameters") {
        auto test = series_from({{12, 0}, {0.5, 0.5}});
        const auto t = apply_normalization(test, n.norm_params);
        CHECK(t.values(0, 0) == Approx(1.2));
    }
    SECTION("constant column is named") {
        auto c = series_from({{1, 1, 1}, {0, 1, 2}});
        CHECK_THROWS_MATCHES(normalize(c), NormalizationError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("c0")));
    }
    SECTION("denormalize round trip") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g(3.0, 40.0);
        std::vector<double> col(500);
        for (auto& v : col) v = g(rng);
        auto r = series_from({col});
        const auto back = denormalize(normalize(r));
        CHECK((back.values - r.values).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("generalized states are backward differences") {
    SECTION("constant velocity") {
        const auto g = estimate_generalized_states(xy_series({0, 1, 2, 3}, {0, 0, 0, 0}, 1.0), Modality::XY);
        REQUIRE(g.length() == 3);
        for (Eigen::Index k = 0; k < 3; ++k) CHECK(g.gs(k, 2) == Approx(1.0));
        CHECK(g.gs(0, 0) == 1.0); // first sample dropped
    }
    SECTION("constant signal") {
        const auto g = estimate_generalized_states(xy_series({4, 4, 4}, {2, 2, 2}, 0.1), Modality::XY);
        CHECK(g.derivatives().cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("scaled by 1/dt") {
        const auto g = estimate_generalized_states(xy_series({0, 1, 2}, {0, 0, 0}, 0.5), Modality::XY);
        CHECK(g.gs(0, 2) == Approx(2.0));
        CHECK(g.gs(1, 2) == Approx(2.0));
    }
    SECTION("too short") {
        CHECK_THROWS_AS(estimate_generalized_states(xy_series({0}, {0}, 0.1), Modality::XY), DataError);
    }
}

TEST_CASE("affine signals give exact derivatives", "[property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        const double dt = 0.05 + 0.1 * std::abs(u(rng));
        const int n = 10 + trial;
        std::vector<double> x(n), y(n);
        for (int k = 0; k < n; ++k) {
            x[k] = a + b * k * dt;
            y[k] = c + d * k * dt;
        }
        const auto g = estimate_generalized_states(xy_series(x, y, dt), Modality::XY);
        REQUIRE(g.length() == n - 1);
        CHECK((g.derivatives().col(0).array() - b).abs().maxCoeff() <= 1e-9);
        CHECK((g.derivatives().col(1).array() - d).abs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("select_modality picks the channel pair") {
    auto s = series_from({{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}});
    s.names = {"x", "y", "steering", "velocity", "power"};
    const auto vp = select_modality(s, Modality::VP);
    CHECK(vp.names == std::vector<std::string>{"velocity", "power"});
    CHECK(vp.values(1, 1) == 10.0);
    CHECK_THROWS_AS(select_modality(series_from({{1, 2}}), Modality::SV), SchemaError);
}
