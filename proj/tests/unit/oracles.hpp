#pragma once

// Test-only reference implementations. They share no code with the library's
// math paths: rotations come from Rodrigues' formula written out here and
// products from plain loops.

#include <cmath>
#include <random>

#include <Eigen/Core>

#include "dexhil/geometry/chain.hpp"
#include "dexhil/geometry/pose.hpp"

namespace dexhil::test {

inline Eigen::Matrix4d matmul4(const double a[4][4], const double b[4][4]) {
  Eigen::Matrix4d out;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[i][k] * b[k][j];
      out(i, j) = s;
    }
  }
  return out;
}

inline Eigen::Matrix4d matmul4(const Eigen::Matrix4d& a, const Eigen::Matrix4d& b) {
  Eigen::Matrix4d out;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

inline Eigen::Matrix4d rodrigues4(const Eigen::Vector3d& axis, double angle) {
  const double x = axis.x(), y = axis.y(), z = axis.z();
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = t * x * x + c;
  m(0, 1) = t * x * y - s * z;
  m(0, 2) = t * x * z + s * y;
  m(1, 0) = t * x * y + s * z;
  m(1, 1) = t * y * y + c;
  m(1, 2) = t * y * z - s * x;
  m(2, 0) = t * x * z - s * y;
  m(2, 1) = t * y * z + s * x;
  m(2, 2) = t * z * z + c;
  return m;
}

inline Eigen::Matrix4d to4(const geometry::Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = p.rotation(i, j);
    m(i, 3) = p.translation[i];
  }
  return m;
}

/// Rigid inverse written out from the block formula.
inline Eigen::Matrix4d inv4(const Eigen::Matrix4d& m) {
  Eigen::Matrix4d out = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out(i, j) = m(j, i);
  }
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += out(i, k) * m(k, 3);
    out(i, 3) = -s;
  }
  return out;
}

inline Eigen::Matrix4d homogeneous_chain(const geometry::KinematicChain& c, const Eigen::VectorXd& q) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    m = matmul4(m, to4(c.joints[i].origin));
    m = matmul4(m, rodrigues4(c.joints[i].axis, q[static_cast<Eigen::Index>(i)]));
  }
  return matmul4(m, to4(c.tip));
}

inline geometry::Pose random_pose(std::mt19937_64& rng, double trans_scale = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  axis.normalize();
  const double angle = std::uniform_real_distribution<double>(-M_PI, M_PI)(rng);
  const Eigen::Matrix4d r = rodrigues4(axis, angle);
  geometry::Pose p;
  p.rotation = r.topLeftCorner<3, 3>();
  p.translation = Eigen::Vector3d(n(rng), n(rng), n(rng)) * trans_scale;
  return p;
}

}  // namespace dexhil::test
