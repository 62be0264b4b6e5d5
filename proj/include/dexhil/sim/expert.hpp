#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Core>

#include "dexhil/retarget/human_hand.hpp"
#include "dexhil/retarget/retarget_net.hpp"
#include "dexhil/sim/sim_env.hpp"
#include "dexhil/teleop/scheduler.hpp"

namespace dexhil::sim {

struct ExpertConfig {
  double speed = 0.12;  // m/s of the grasp-point goal
  double pregrasp_height = 0.05;
  double close_time = 0.4;  // s from open to grasp posture
  double settle_tolerance = 0.003;
  double lift_margin = 0.03;  // lift past the success height by this much
  double regrasp_wait = 0.25;  // s closed without a hold before retrying

  // demo variation (zero for the clean oracle)
  double via_offset = 0.0;    // half width of a random via point before the pregrasp
  double speed_jitter = 0.0;  // speed scaled by U(1 - j, 1 + j) per episode
  double close_jitter = 0.0;  // close_time scaled likewise
  double tremor = 0.0;        // m, per-frame marker noise
  double aim_error = 0.0;     // m, per-episode grasp target offset, U(-e, e) per axis
  double close_lead = 0.0;    // s, start closing up to this long before the descent ends

  // failure predictor
  double stall_window = 0.5;      // s
  double stall_progress = 0.002;  // potential must drop this much per window
  double closure_threshold = 0.5;  // rad of finger MCP
  double align_tolerance = 0.015;  // m, grasp point to target
  double monitor_delay = 0.0;      // s before the predictor may fire
};

/// Phase machine producing grasp-point goals and a hand closure level from the
/// privileged environment state. Time-driven: update(t) is idempotent per t.
class ExpertPlanner {
 public:
  enum class Phase { retreat, via, approach, descend, close, lift, done };

  ExpertPlanner(const SimEnv& env, const ExpertConfig& cfg, std::uint64_t seed,
                const Eigen::Vector3d& grasp_point_hand);

  /// Picks the starting phase from the current state.
  void start(double t);
  void update(double t);

  Phase phase() const { return phase_; }
  const Eigen::Vector3d& goal() const { return goal_; }
  double closure() const { return alpha_; }
  /// EE pose placing the grasp point at the goal with the home orientation.
  geometry::Pose goal_ee() const;

 private:
  Eigen::Vector3d target_point() const;
  Eigen::Vector3d actual_point() const;
  bool hand_open_enough() const;
  void enter(Phase p, double t);

  const SimEnv* env_;
  ExpertConfig cfg_;
  Eigen::Vector3d grasp_point_hand_;
  Eigen::Matrix3d rotation_;
  double speed_;
  double close_time_;
  Eigen::Vector3d via_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d aim_ = Eigen::Vector3d::Zero();
  double lead_ = 0.0;
  Phase phase_ = Phase::approach;
  double phase_start_ = 0.0;
  double last_t_ = -1.0;
  Eigen::Vector3d goal_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d lift_from_ = Eigen::Vector3d::Zero();
  double alpha_ = 0.0;
};

const char* phase_name(ExpertPlanner::Phase p);

/// Task progress potential: falls while the grasp point closes in, the hand
/// closes around the object and the object rises.
double progress_potential(const SimEnv& env);

/// Fires on a stalled potential or on closing the hand away from the target.
class FailurePredictor {
 public:
  explicit FailurePredictor(ExpertConfig cfg) : cfg_(cfg) {}
  /// Returns a reason once tripped.
  std::optional<std::string> observe(const SimEnv& env, double t);
  void reset() { history_.clear(); }

 private:
  ExpertConfig cfg_;
  std::deque<std::pair<double, double>> history_;
};

/// The oracle operator: watches the policy, takes over when the predictor
/// trips (or from the start for demonstrations) and then drives the marker
/// and hand streams to completion.
class ScriptedExpert : public teleop::HumanSource {
 public:
  ScriptedExpert(const SimEnv& env, const retarget::RetargetNet* net, ExpertConfig cfg, std::uint64_t seed,
                 bool control_from_start, geometry::Pose robot_cube = geometry::Pose::identity());

  std::optional<bool> wants_control(double t) override;
  std::optional<teleop::MarkerFrame> marker(double t) override;
  std::optional<retarget::HumanHandSample> hand(double t) override;

  bool in_control() const { return in_control_; }
  std::optional<double> trigger_time() const { return trigger_time_; }
  const std::string& trigger_reason() const { return reason_; }
  const ExpertPlanner& planner() const { return planner_; }

  /// Hand-frame grasp point of the retargeted grasp posture for the task.
  static Eigen::Vector3d grasp_point_for(const SimEnv& env, const retarget::RetargetNet* net);
  /// Human pose for a closure level in [0, 1].
  static retarget::HumanHandSample hand_for(TaskId task, double closure);

 private:
  const SimEnv& env_;
  ExpertConfig cfg_;
  ExpertPlanner planner_;
  FailurePredictor predictor_;
  geometry::Pose robot_cube_;
  geometry::Pose virtual_marker_;
  std::optional<teleop::AnchorState> anchor_;
  bool control_from_start_;
  bool in_control_ = false;
  std::optional<double> trigger_time_;
  std::string reason_;
  std::mt19937_64 rng_;
};

/// Policy source that replays the planner through IK and retargeting: an
/// oracle policy used to check the predictor stays quiet on good behaviour.
class PlannerPolicy : public teleop::PolicySource {
 public:
  PlannerPolicy(const SimEnv& env, const retarget::RetargetNet* net, ExpertConfig cfg, int horizon = 8);
  std::optional<Eigen::VectorXd> infer(const Eigen::VectorXd& obs) override;

 private:
  const SimEnv& env_;
  const retarget::RetargetNet* net_;
  ExpertPlanner planner_;
  int horizon_;
  long calls_ = 0;
  Eigen::VectorXd seed_q_;
};

}  // namespace dexhil::sim
