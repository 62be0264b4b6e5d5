#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <json.hpp>

#include "dexhil/geometry/arm_model.hpp"
#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/policy/observation.hpp"
#include "dexhil/teleop/scheduler.hpp"

namespace dexhil::sim {

using policy::TaskId;
using teleop::Outcome;

inline constexpr double kTickSeconds = 1.0 / 90.0;

struct TaskSpec {
  TaskId task = TaskId::tissue_extraction;
  long tick_limit = 540;
  /// Object spawn box: tissue edge centre, or sphere centre x/y with z from
  /// the stand height plus the radius.
  Eigen::Vector3d spawn_min{0.28, -0.04, 0.09};
  Eigen::Vector3d spawn_max{0.32, 0.04, 0.11};
  double radius_min = 0.026;
  double radius_max = 0.032;
  double stand_height = 0.07;

  // tissue
  double edge_half_length = 0.03;
  double pinch_threshold = 0.008;
  double pinch_gap_max = 0.016;
  double approach_zone = 0.03;
  double approach_gap = 0.025;
  double extraction_length = 0.2;
  double success_extraction = 0.5;

  // plush
  double cage_radius_factor = 1.2;
  double cage_arc = 2.0943951023931953;  // 120 degrees
  int cage_min_tips = 3;
  double palm_margin = 0.03;
  double plush_zone_margin = 0.05;
  double approach_open_mcp = 0.5;
  double lift_height = 0.1;
  /// A grasped sphere drops once the mean finger MCP opens this far.
  double release_margin = 0.2;

  /// Hand-frame points the object is grasped at; the observation reports the
  /// object relative to them.
  Eigen::Vector3d pinch_point_hand{0.075, 0.024, -0.0635};
  Eigen::Vector3d cage_center_hand{0.0475, 0.0, -0.0325};

  double arm_rate = 1.5;   // rad/s
  double hand_rate = 4.0;  // rad/s

  static TaskSpec tissue();
  static TaskSpec plush();
  static TaskSpec for_task(TaskId t);
  void validate(const geometry::ArmModel& arm) const;
  nlohmann::json to_json() const;
};

struct SimState {
  TaskId task = TaskId::tissue_extraction;
  Eigen::VectorXd q_arm;
  Eigen::VectorXd hand;
  long tick = 0;
  Outcome outcome = Outcome::running;

  // tissue: edge centre, extraction in [0, 1]
  Eigen::Vector3d edge_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d edge_spawn = Eigen::Vector3d::Zero();
  double extraction = 0.0;
  bool held = false;
  bool in_zone = false;
  bool armed = false;
  Eigen::Vector3d last_pinch_mid = Eigen::Vector3d::Zero();

  // plush
  Eigen::Vector3d sphere_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d sphere_spawn = Eigen::Vector3d::Zero();
  double radius = 0.03;
  bool grasped = false;
  bool dropped = false;
  Eigen::Vector3d grasp_offset = Eigen::Vector3d::Zero();  // hand frame
  double grasp_mcp = 0.0;  // mean finger MCP when the cage closed

  bool operator==(const SimState&) const = default;
};

struct CageReport {
  int tips_inside = 0;
  double arc = 0.0;  // angular coverage of the inside tips about the hand axis
  double palm_distance = 0.0;
  bool caged = false;
};

/// Tips within factor * r of the centre, covering more than `cage_arc`
/// around the hand's finger axis, with the palm within r + palm_margin.
CageReport cage_test(const geometry::Fingertips& tips_world, const Eigen::Vector3d& palm_world,
                     const geometry::Pose& ee, const Eigen::Vector3d& center, double radius, const TaskSpec& spec);

double distance_to_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Success is sticky; failure on tick-limit exhaustion or a drop after a grasp.
Outcome check_success(const SimState& s, const TaskSpec& spec);

/// Kinematic desk environment for one task. Deterministic given the reset seed
/// and command sequence.
class SimEnv : public teleop::ControlledEnv {
 public:
  SimEnv(TaskSpec spec, geometry::ArmModel arm, geometry::HandModel hand);

  void reset(std::uint64_t seed);
  void set_state(const SimState& s);
  const SimState& state() const { return state_; }
  const TaskSpec& spec() const { return spec_; }
  const geometry::ArmModel& arm() const { return arm_; }
  const geometry::HandModel& hand_model() const { return hand_; }

  Eigen::VectorXd observe() const override;
  Eigen::VectorXd q_arm() const override { return state_.q_arm; }
  Eigen::VectorXd hand() const override { return state_.hand; }
  geometry::Pose ee_pose() const override;
  /// Joints move toward the (clamped) targets by at most rate * dt, then the
  /// task predicates update.
  void step(const Eigen::VectorXd& arm_cmd, const Eigen::VectorXd& hand_cmd) override;
  Outcome outcome() const override { return state_.outcome; }

  geometry::Fingertips tips_world() const;
  Eigen::Vector3d palm_world() const;
  /// Task grasp point (pinch point or cage centre) in the base frame.
  Eigen::Vector3d grasp_point_world() const;
  /// Object position reported to the policy.
  Eigen::Vector3d object_position() const;
  double thumb_index_gap() const;
  /// Lift height above spawn (plush) or extracted length (tissue), metres.
  double lifted_distance() const;

 private:
  void update_tissue(const geometry::Pose& ee, const geometry::Fingertips& tips);
  void update_plush(const geometry::Pose& ee, const geometry::Fingertips& tips);

  TaskSpec spec_;
  geometry::ArmModel arm_;
  geometry::HandModel hand_;
  SimState state_;
};

nlohmann::json state_to_json(const SimState& s);

}  // namespace dexhil::sim
