#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dexhil/geometry/chain.hpp"

namespace dexhil::geometry {

enum class FingerId : int { thumb = 0, index = 1, middle = 2, ring = 3, little = 4 };
inline constexpr int kFingerCount = 5;
const char* finger_name(FingerId f);

struct Finger {
  FingerId id = FingerId::index;
  KinematicChain chain;  // expressed in the hand base (EE) frame
};

/// Passive joint driven linearly by one actuated input.
struct CouplingEntry {
  std::size_t passive_joint = 0;     // index into the full joint vector
  std::size_t driving_actuated = 0;  // index into the actuated vector
  double ratio = 1.0;
};

/// Hand with coupled joints. The full joint vector concatenates the fingers'
/// chains in finger order; `actuated_joints[k]` is the full index of input k.
struct HandModel {
  std::string name = "hand";
  std::vector<Finger> fingers;  // thumb, index, middle, ring, little
  std::vector<std::size_t> actuated_joints;
  std::vector<CouplingEntry> coupling;
  Eigen::Vector3d palm_point = Eigen::Vector3d::Zero();

  std::size_t actuated_count() const { return actuated_joints.size(); }
  std::size_t joint_count() const;
  /// Offset of finger f's first joint in the full vector.
  std::size_t finger_offset(FingerId f) const;
  const Joint& joint(std::size_t full_index) const;
  JointLimits actuated_limits(std::size_t k) const;
  Eigen::VectorXd clamp_actuated(const Eigen::VectorXd& actuated) const;
  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

using JointConfiguration = Eigen::VectorXd;
using Fingertips = std::array<Eigen::Vector3d, kFingerCount>;

/// Passive joints = ratio * raw driving input, actuated entries copied through,
/// then every entry clamped to its limits.
JointConfiguration expand_coupling(const HandModel& model, const Eigen::VectorXd& actuated);

Fingertips fk_fingertips(const HandModel& model, const JointConfiguration& q);

/// Finger base (first joint origin) positions; fixed for a given model.
Fingertips finger_roots(const HandModel& model);

/// Fingertips plus d(tip)/d(actuated) for every finger; entries whose joint
/// saturated at a limit contribute zero.
struct FingertipJacobian {
  Fingertips tips;
  std::array<Eigen::Matrix<double, 3, Eigen::Dynamic>, kFingerCount> d_tip;
  JointConfiguration q;
  /// d q_full / d actuated (joint_count x m), zero where clamped.
  Eigen::MatrixXd d_q;
};

FingertipJacobian fingertip_jacobian(const HandModel& model, const Eigen::VectorXd& actuated);

/// Actuated layout of the default hand.
enum ActuatedIndex : int {
  kThumbAbduction = 0,
  kThumbFlexion = 1,
  kIndexMcp = 2,
  kMiddleMcp = 3,
  kRingMcp = 4,
  kLittleMcp = 5,
};

/// Desk hand: 5 fingers, 3 joints each; non-thumb PIP = 0.8 MCP, DIP = 0.6 MCP;
/// thumb abduction + flexion actuated with distal = 0.7 flexion. m = 6.
HandModel default_desk_hand();

}  // namespace dexhil::geometry
