#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dexhil/geometry/hand_model.hpp"

namespace dexhil::retarget {

using geometry::FingerId;
using geometry::kFingerCount;

inline constexpr int kKeypointCount = 21;
inline constexpr int kNetInputSize = 3 * kKeypointCount;
/// Keypoints are fed to the nets in decimetres.
inline constexpr double kInputScale = 10.0;

/// Keypoint index of finger f's joint j (0 root, 1 and 2 intermediate, 3 tip).
constexpr int keypoint_index(FingerId f, int j) { return 1 + 4 * static_cast<int>(f) + j; }

/// Parametric human hand: the robot hand scaled by 1/kappa, every non-thumb
/// finger gaining a spread joint at its root, thumb and MCP ranges wider than
/// the robot's.
struct HumanHandModel {
  double kappa = 0.8;
  std::array<geometry::KinematicChain, kFingerCount> fingers;
};

HumanHandModel default_human_hand(const geometry::HandModel& robot, double kappa = 0.8);

/// Curl in [0,1] and abduction per finger; index 0 is the thumb.
struct HumanPoseParams {
  std::array<double, kFingerCount> curl{};
  std::array<double, kFingerCount> abduction{};
};

enum class PoseKind { random, open, power, pinch };
const char* pose_kind_name(PoseKind k);

struct HumanHandSample {
  std::array<Eigen::Vector3d, kKeypointCount> keypoints;  // metres, wrist frame
  PoseKind kind = PoseKind::random;
  int pinch_finger = -1;
  HumanPoseParams params;
  /// Robot actuated vector generating the same pose under the kappa scaling.
  Eigen::Matrix<double, 6, 1> q_true = Eigen::Matrix<double, 6, 1>::Zero();

  const Eigen::Vector3d& root(FingerId f) const { return keypoints[keypoint_index(f, 0)]; }
  const Eigen::Vector3d& tip(FingerId f) const { return keypoints[keypoint_index(f, 3)]; }
  /// Root-to-tip vector r_i.
  Eigen::Vector3d finger_vector(FingerId f) const { return tip(f) - root(f); }
  /// Extension d_i = |r_i|.
  double extension(FingerId f) const { return finger_vector(f).norm(); }
  Eigen::VectorXd net_input() const;
  bool valid() const;
};

/// Human joint values for the given parameters, per finger chain.
std::array<Eigen::VectorXd, kFingerCount> human_joint_values(const HumanPoseParams& p);

HumanHandSample make_human_sample(const HumanHandModel& model, const geometry::HandModel& robot,
                                  const HumanPoseParams& params, PoseKind kind = PoseKind::random);

/// Straight-finger root-to-tip length of finger f.
double human_finger_length(const HumanHandModel& model, FingerId f);

struct SynthOptions {
  double open_fraction = 0.1;
  double power_fraction = 0.2;
  double pinch_fraction = 0.3;  // remainder is uniformly random poses
};

/// Solves thumb curl/abduction and finger curl so that the thumb and finger
/// `f` tips meet; returns the parameters with `gap_open` curl backed off.
HumanPoseParams solve_pinch(const HumanHandModel& model, FingerId f, HumanPoseParams start,
                            double gap_open = 0.0);

std::vector<HumanHandSample> synth_human_dataset(std::uint64_t seed, std::size_t count,
                                                 const SynthOptions& options = {});

/// Canonical poses used by tests and the scripted expert.
HumanHandSample open_hand_sample();
HumanHandSample power_grasp_sample(double curl = 0.9);
HumanHandSample pinch_sample(FingerId f, double gap_open = 0.0);

Eigen::MatrixXd stack_inputs(const std::vector<const HumanHandSample*>& batch);

}  // namespace dexhil::retarget
