#include "dexhil/geometry/pose.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace dexhil::geometry {

Pose Pose::from_translation(const Eigen::Vector3d& t) {
  Pose p;
  p.translation = t;
  return p;
}

Pose Pose::from_rotation(const Eigen::Matrix3d& r) {
  Pose p;
  p.rotation = r;
  return p;
}

Pose Pose::from_quaternion(double qw, double qx, double qy, double qz,
                           const Eigen::Vector3d& t) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  q.normalize();
  Pose p;
  p.rotation = q.toRotationMatrix();
  p.translation = t;
  return p;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Quaterniond Pose::quaternion() const {
  Eigen::Quaterniond q(rotation);
  if (q.w() < 0) q.coeffs() *= -1.0;
  return q.normalized();
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Eigen::Matrix3d rot_x(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitX()).toRotationMatrix();
}

Eigen::Matrix3d rot_y(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

Eigen::Matrix3d rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& unit_axis, double angle) {
  return Eigen::AngleAxisd(angle, unit_axis).toRotationMatrix();
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
  const double cos_angle = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  const Eigen::Vector3d vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0),
                            r(1, 0) - r(0, 1));
  if (angle < 1e-7) {
    // first-order: R ~ I + [w]x
    return 0.5 * vee;
  }
  if (M_PI - angle < 1e-6) {
    // near pi the skew part vanishes; recover the axis from the symmetric part
    Eigen::AngleAxisd aa(r);
    return aa.axis() * aa.angle();
  }
  return vee * (angle / (2.0 * std::sin(angle)));
}

bool is_rotation(const Eigen::Matrix3d& r, double tol) {
  const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

PoseError pose_error(const Pose& target, const Pose& actual) {
  PoseError e;
  e.position = (target.translation - actual.translation).norm();
  e.orientation = rotation_log(target.rotation * actual.rotation.transpose()).norm();
  return e;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

}  // namespace dexhil::geometry
