#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dexhil/geometry/pose.hpp"

namespace dexhil::geometry {

/// Raised on vector/model size disagreement.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct JointLimits {
  double lower = -M_PI;
  double upper = M_PI;

  double clamp(double q) const { return q < lower ? lower : (q > upper ? upper : q); }
  bool contains(double q) const { return q >= lower && q <= upper; }
};

/// Revolute joint: static `origin` from the parent frame, then rotation about
/// `axis` (unit, expressed in the joint frame).
struct Joint {
  std::string name;
  Pose origin;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  JointLimits limits;
};

/// Serial chain of revolute joints ending at a fixed tip transform.
struct KinematicChain {
  std::vector<Joint> joints;
  Pose tip;

  std::size_t size() const { return joints.size(); }
};

/// Per-joint world frames produced by a forward pass; `frames[i]` is the frame
/// of joint i after its origin offset and before its own rotation.
struct ChainState {
  std::vector<Pose> frames;
  Pose tip;
};

ChainState forward_chain(const KinematicChain& chain, const Eigen::VectorXd& q,
                         const Pose& base = Pose::identity());

/// Geometric Jacobian (6 x n, linear rows first) of the tip in the base frame.
Eigen::Matrix<double, 6, Eigen::Dynamic> chain_jacobian(const KinematicChain& chain,
                                                        const ChainState& state);

/// d(tip position)/dq, 3 x n.
Eigen::Matrix<double, 3, Eigen::Dynamic> chain_position_jacobian(
    const KinematicChain& chain, const ChainState& state);

}  // namespace dexhil::geometry
