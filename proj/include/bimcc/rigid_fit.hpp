#ifndef BIMCC_RIGID_FIT_HPP
#define BIMCC_RIGID_FIT_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <span>

#include "bimcc/error.hpp"
#include "bimcc/point_cloud.hpp"

namespace bimcc {

/// Weighted Kabsch: returns the proper rigid transform (R, t) minimizing
/// sum_i w_i * ||R * source[i] + t - target[i]||^2.
///
/// Weighted centroids are subtracted, the weighted cross-covariance
/// H = sum w_i * s_i * t_i^T is decomposed as H = U S V^T, and
/// R = V * diag(1, 1, det(V U^T)) * U^T so det(R) = 1 always holds.
///
/// Throws InsufficientPairs for fewer than 3 pairs and
/// DegenerateConfiguration when the cross-covariance is rank-deficient
/// enough to leave the rotation ambiguous (e.g. collinear sources).
inline RigidTransform weighted_rigid_fit(std::span<const Vec3> source,
                                         std::span<const Vec3> target,
                                         std::span<const double> weights) {
    if (source.size() != target.size() || source.size() != weights.size())
        throw Error(ErrorCode::InvalidArgument, "source/target/weights length mismatch");
    if (source.size() < 3)
        throw Error(ErrorCode::InsufficientPairs,
                    "need at least 3 pairs, got " + std::to_string(source.size()));

    double weight_sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw Error(ErrorCode::InvalidArgument, "weights must be finite and positive");
        weight_sum += weights[i];
    }

    Vec3 centroid_s = Vec3::Zero(), centroid_t = Vec3::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double w = weights[i] / weight_sum;
        centroid_s += w * source[i];
        centroid_t += w * target[i];
    }

    Mat3 cross = Mat3::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double w = weights[i] / weight_sum;
        cross += w * (source[i] - centroid_s) * (target[i] - centroid_t).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= sv(0) * 1e-12)
        throw Error(ErrorCode::DegenerateConfiguration,
                    "weighted cross-covariance is rank-deficient; rotation is ambiguous");

    const Mat3 u = svd.matrixU(), v = svd.matrixV();
    const double flip = (v * u.transpose()).determinant();
    Mat3 rotation = v * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, flip < 0.0 ? -1.0 : 1.0) *
                    u.transpose();
    return RigidTransform(rotation, centroid_t - rotation * centroid_s);
}

}  // namespace bimcc

#endif  // BIMCC_RIGID_FIT_HPP
