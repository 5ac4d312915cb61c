#ifndef BIMCC_POINT_CLOUD_HPP
#define BIMCC_POINT_CLOUD_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "bimcc/error.hpp"

namespace bimcc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// An ordered set of 3D points, coordinates in millimeters.
struct PointCloud {
    std::vector<Vec3> points;
    std::string id;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Throws EmptyCloud / InvalidArgument unless the cloud is non-empty with
/// all-finite coordinates.
inline void require_valid_cloud(const PointCloud& cloud) {
    if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "point cloud has no points");
    for (const Vec3& p : cloud.points) {
        if (!is_finite(p))
            throw Error(ErrorCode::InvalidArgument, "point cloud contains a non-finite coordinate");
    }
}

/// Proper rigid transform: p -> R * p + t. The rotation is validated on
/// construction (orthonormal within 1e-9, det(R) = 1 within 1e-9); invalid
/// matrices are rejected, never renormalized.
class RigidTransform {
public:
    RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

    RigidTransform(const Mat3& rotation, const Vec3& translation)
        : rotation_(rotation), translation_(translation) {
        if (!rotation.allFinite() || !is_finite(translation))
            throw Error(ErrorCode::InvalidRotation, "non-finite transform entries");
        const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
        if (ortho > 1e-9)
            throw Error(ErrorCode::InvalidRotation,
                        "rotation is not orthonormal (||R^T R - I|| = " + std::to_string(ortho) + ")");
        const double det = rotation.determinant();
        if (std::abs(det - 1.0) > 1e-9)
            throw Error(ErrorCode::InvalidRotation,
                        "rotation determinant is " + std::to_string(det) + ", expected 1");
    }

    static RigidTransform identity() { return RigidTransform(); }

    /// Rotation of `angle_deg` degrees about `axis`, plus translation.
    static RigidTransform axis_angle(const Vec3& axis, double angle_deg, const Vec3& translation) {
        const double n = axis.norm();
        if (!(n > 0.0) || !is_finite(axis))
            throw Error(ErrorCode::InvalidArgument, "rotation axis must be a nonzero finite vector");
        const Eigen::AngleAxisd aa(angle_deg * kDegToRad, axis / n);
        return RigidTransform(aa.toRotationMatrix(), translation);
    }

    /// Euler-angle construction, degrees, composed as Rz(rz) * Ry(ry) * Rx(rx).
    static RigidTransform euler_deg(double rx, double ry, double rz, const Vec3& translation) {
        const Mat3 r = (Eigen::AngleAxisd(rz * kDegToRad, Vec3::UnitZ()) *
                        Eigen::AngleAxisd(ry * kDegToRad, Vec3::UnitY()) *
                        Eigen::AngleAxisd(rx * kDegToRad, Vec3::UnitX()))
                           .toRotationMatrix();
        return RigidTransform(r, translation);
    }

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

    /// this ∘ inner, i.e. apply `inner` first: R = R_this * R_inner,
    /// t = R_this * t_inner + t_this.
    RigidTransform compose(const RigidTransform& inner) const {
        return RigidTransform(rotation_ * inner.rotation_,
                              rotation_ * inner.translation_ + translation_);
    }

    RigidTransform inverse() const {
        return RigidTransform(rotation_.transpose(), -(rotation_.transpose() * translation_));
    }

private:
    static constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

    Mat3 rotation_;
    Vec3 translation_;
};

/// Maps every point by the transform; count and order are preserved.
inline PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
    PointCloud out;
    out.id = cloud.id;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.points.push_back(t.apply(p));
    return out;
}

/// Geodesic angle between two rotations, in degrees.
inline double rotation_angle_deg(const Mat3& a, const Mat3& b) {
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / 3.14159265358979323846;
}

}  // namespace bimcc

#endif  // BIMCC_POINT_CLOUD_HPP
