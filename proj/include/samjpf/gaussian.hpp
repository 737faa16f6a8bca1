#ifndef SAMJPF_GAUSSIAN_HPP
#define SAMJPF_GAUSSIAN_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "samjpf/error.hpp"

namespace samjpf {

/// Bhattacharyya distance between two Gaussians of equal dimension.
template <typename V1, typename M1, typename V2, typename M2>
double bhattacharyya_distance(const Eigen::MatrixBase<V1>& mu1, const Eigen::MatrixBase<M1>& cov1,
                              const Eigen::MatrixBase<V2>& mu2, const Eigen::MatrixBase<M2>& cov2) {
    using Mat = Eigen::Matrix<double, M1::RowsAtCompileTime, M1::ColsAtCompileTime>;
    const Mat avg = 0.5 * (cov1 + cov2);
    const Eigen::LLT<Mat> llt(avg);
    const Eigen::LLT<Mat> llt1(cov1);
    const Eigen::LLT<Mat> llt2(cov2);
    if (llt.info() != Eigen::Success || llt1.info() != Eigen::Success || llt2.info() != Eigen::Success) {
        throw NumericError("bhattacharyya: covariance not positive definite");
    }
    const auto diff = (mu1 - mu2).eval();
    const double maha = diff.dot(llt.solve(diff));
    // log-determinants from the Cholesky diagonals
    auto logdet = [](const auto& l) { return 2.0 * l.matrixLLT().diagonal().array().log().sum(); };
    const double d = 0.125 * maha + 0.5 * (logdet(llt) - 0.5 * (logdet(llt1) + logdet(llt2)));
    return std::max(d, 0.0);
}

/// Bhattacharyya coefficient in (0, 1].
template <typename V1, typename M1, typename V2, typename M2>
double bhattacharyya_gaussian(const Eigen::MatrixBase<V1>& mu1, const Eigen::MatrixBase<M1>& cov1,
                              const Eigen::MatrixBase<V2>& mu2, const Eigen::MatrixBase<M2>& cov2) {
    return std::exp(-bhattacharyya_distance(mu1, cov1, mu2, cov2));
}

/// Hellinger distance from a Bhattacharyya coefficient.
inline double hellinger_from_bc(double bc) { return std::sqrt(std::clamp(1.0 - bc, 0.0, 1.0)); }

/// Returns `s` when it factors; otherwise clamps its eigenvalues to a small
/// floor relative to the largest one. Repairs round-off, not real errors.
template <typename M>
M repair_spd(const M& s) {
    const M sym = 0.5 * (s + s.transpose());
    if (Eigen::LLT<M>(sym).info() == Eigen::Success) return sym;
    const Eigen::SelfAdjointEigenSolver<M> es(sym);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) throw NumericError("repair_spd: eigen decomposition failed");
    const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const auto ev = es.eigenvalues().cwiseMax(top * 1e-12).eval();
    M out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

/// Log density of N(0, cov) at x.
template <typename V, typename M>
double gaussian_log_pdf(const Eigen::MatrixBase<V>& x, const Eigen::MatrixBase<M>& cov) {
    using Mat = Eigen::Matrix<double, M::RowsAtCompileTime, M::ColsAtCompileTime>;
    const Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericError("gaussian_log_pdf: covariance not positive definite");
    const double maha = x.dot(llt.solve(x));
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const auto n = static_cast<double>(x.size());
    return -0.5 * (maha + logdet + n * std::log(2.0 * std::numbers::pi));
}

} // namespace samjpf

#endif // SAMJPF_GAUSSIAN_HPP
