#include <catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "samjpf/gaussian.hpp"

using namespace samjpf;
using Catch::Approx;

namespace {

using M1 = Eigen::Matrix<double, 1, 1>;

double bc1(double m1, double v1, double m2, double v2) {
    return bhattacharyya_gaussian(M1::Constant(m1), M1::Constant(v1), M1::Constant(m2), M1::Constant(v2));
}

} // namespace

TEST_CASE("closed-form coefficient agrees with numerical integration in 1-D") {
    CHECK(bc1(0, 1, 1, 1) == Approx(std::exp(-1.0 / 8.0)).margin(1e-12));
    CHECK(bc1(0, 1, 1, 1) == Approx(oracle::bc_numeric_1d(0, 1, 1, 1)).margin(1e-6));
    CHECK(hellinger_from_bc(bc1(0, 1, 1, 1)) == Approx(0.34278).margin(1e-5));
    CHECK(bc1(0, 1, 0, 4) == Approx(std::sqrt(0.8)).margin(1e-12));
    CHECK(bc1(0, 1, 0, 4) == Approx(oracle::bc_numeric_1d(0, 1, 0, 4)).margin(1e-6));
}

TEST_CASE("closed-form coefficient agrees with numerical integration in 2-D") {
    const Eigen::Vector2d z = Eigen::Vector2d::Zero();
    const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
    const double bc = bhattacharyya_gaussian(z, I, Eigen::Vector2d(1, 0), I);
    // unit separation under identity covariances: D = 1/8, as in 1-D
    CHECK(bc == Approx(std::exp(-0.125)).margin(1e-12));
    CHECK(bc == Approx(oracle::bc_numeric_2d(z, I, Eigen::Vector2d(1, 0), I)).margin(1e-6));

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 5; ++i) {
        const Eigen::Vector2d m1(u(rng), u(rng)), m2(u(rng), u(rng));
        const auto c1 = oracle::random_spd(rng), c2 = oracle::random_spd(rng);
        CHECK(bhattacharyya_gaussian(m1, c1, m2, c2) == Approx(oracle::bc_numeric_2d(m1, c1, m2, c2)).margin(1e-6));
    }
}

TEST_CASE("identical distributions have zero distance") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const Eigen::Vector2d m(i * 0.3, -i * 0.1);
        const auto c = oracle::random_spd(rng, 1e-4, 5.0);
        CHECK(hellinger_from_bc(bhattacharyya_gaussian(m, c, m, c)) <= 1e-9);
    }
}

TEST_CASE("coefficient is symmetric and Hellinger is monotone in separation", "[property]") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector2d m1(u(rng), u(rng)), m2(u(rng), u(rng));
        const auto c1 = oracle::random_spd(rng), c2 = oracle::random_spd(rng);
        CHECK(std::abs(bhattacharyya_gaussian(m1, c1, m2, c2) - bhattacharyya_gaussian(m2, c2, m1, c1)) <= 1e-12);
        const Eigen::Vector2d dir = (m2 - m1).normalized();
        double prev = -1.0;
        for (double s = 0.0; s < 6.0; s += 0.5) {
            const double th = hellinger_from_bc(bhattacharyya_gaussian(m1, c1, Eigen::Vector2d(m1 + s * dir), c2));
            CHECK(th >= prev - 1e-15);
            CHECK(th >= 0.0);
            CHECK(th <= 1.0);
            prev = th;
        }
    }
}

TEST_CASE("far apart distributions saturate") {
    const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
    CHECK(hellinger_from_bc(bhattacharyya_gaussian(Eigen::Vector2d(0, 0), I, Eigen::Vector2d(10, 0), I)) > 0.9);
    CHECK(hellinger_from_bc(bhattacharyya_gaussian(Eigen::Vector2d(0, 0), I, Eigen::Vector2d(1e6, 0), I)) == 1.0);
}

TEST_CASE("singular covariance is rejected") {
    const Eigen::Matrix2d z = Eigen::Matrix2d::Zero();
    CHECK_THROWS_AS(bhattacharyya_gaussian(Eigen::Vector2d(0, 0), z, Eigen::Vector2d(0, 0), z), NumericError);
}

TEST_CASE("log density matches the explicit formula") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto c = oracle::random_spd(rng);
        const Eigen::Vector2d x(0.3 * i - 2, 0.7);
        CHECK(gaussian_log_pdf(x, c) == Approx(std::log(oracle::normal_pdf_2d(x, Eigen::Vector2d::Zero(), c))).epsilon(1e-12));
    }
}
