#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dexhil::geometry {

/// Rigid transform in SE(3). Translation in meters.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t);
  static Pose from_rotation(const Eigen::Matrix3d& r);
  /// Unit quaternion (w, x, y, z); normalized on construction.
  static Pose from_quaternion(double qw, double qx, double qy, double qz,
                              const Eigen::Vector3d& t);
  static Pose from_matrix(const Eigen::Matrix4d& m);

  Eigen::Matrix4d matrix() const;
  Eigen::Quaterniond quaternion() const;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

Eigen::Matrix3d rot_x(double angle);
Eigen::Matrix3d rot_y(double angle);
Eigen::Matrix3d rot_z(double angle);
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& unit_axis, double angle);

/// Rotation log map: axis * angle, angle in [0, pi].
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r);

/// True when r is orthonormal with det +1 within tol.
bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9);

struct PoseError {
  double position = 0.0;     // meters
  double orientation = 0.0;  // radians, rotation-log norm
};

/// Error of `actual` relative to `target`.
PoseError pose_error(const Pose& target, const Pose& actual);

/// Re-orthonormalizes a rotation that drifted numerically.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r);

}  // namespace dexhil::geometry
