#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "dexhil/geometry/arm_model.hpp"
#include "dexhil/retarget/human_hand.hpp"
#include "dexhil/retarget/retarget_net.hpp"
#include "dexhil/teleop/intervention.hpp"
#include "dexhil/teleop/marker.hpp"

namespace dexhil::teleop {

/// Integer clock: one unit is 1/180 s. Policy every 9 units (20 Hz), arm every
/// 6 (30 Hz), hand every 2 (90 Hz). Within one instant: intervention events,
/// policy, arm, then hand (which steps the env and logs).
inline constexpr int kClockHz = 180;
inline constexpr int kPolicyPeriod = 9;
inline constexpr int kArmPeriod = 6;
inline constexpr int kHandPeriod = 2;
inline constexpr int kArmDof = 6;
inline constexpr int kHandDof = 6;

inline double unit_time(long unit) { return static_cast<double>(unit) / kClockHz; }

enum class Outcome { running, success, failure };
const char* outcome_name(Outcome o);

/// What the scheduler needs from an environment. step() is one 90 Hz tick.
class ControlledEnv {
 public:
  virtual ~ControlledEnv() = default;
  virtual Eigen::VectorXd observe() const = 0;
  virtual Eigen::VectorXd q_arm() const = 0;
  virtual Eigen::VectorXd hand() const = 0;
  virtual geometry::Pose ee_pose() const = 0;
  virtual void step(const Eigen::VectorXd& arm_cmd, const Eigen::VectorXd& hand_cmd) = 0;
  virtual Outcome outcome() const = 0;
};

class PolicySource {
 public:
  virtual ~PolicySource() = default;
  /// Raw chunk of H steps, each arm (6) then hand (6). nullopt when starved.
  virtual std::optional<Eigen::VectorXd> infer(const Eigen::VectorXd& obs) = 0;
};

/// Operator (or oracle) inputs.
class HumanSource {
 public:
  virtual ~HumanSource() = default;
  /// Desired control flag at time t; nullopt leaves the mode alone.
  virtual std::optional<bool> wants_control(double /*t*/) { return std::nullopt; }
  virtual std::optional<MarkerFrame> marker(double t) = 0;
  virtual std::optional<retarget::HumanHandSample> hand(double t) = 0;
};

struct SchedulerConfig {
  int horizon = 8;
  /// Hand ticks a chunk may be exhausted before a stale fault is logged.
  int stale_limit = 3;
  long max_hand_ticks = 540;
  bool stop_on_outcome = true;
  geometry::Pose robot_cube;
  geometry::IkOptions ik;
};

struct TickRecord {
  long tick = 0;  // hand tick index
  double time = 0.0;
  Eigen::VectorXd obs;  // before the command is applied
  Eigen::VectorXd arm;  // executed command
  Eigen::VectorXd hand;
  int intervention = 0;
  CommandSource source = CommandSource::policy;
  bool stale = false;
};

struct EpisodeLog {
  std::vector<TickRecord> ticks;
  long policy_inferences = 0;
  long discarded_inferences = 0;  // produced while intervening
  long arm_ticks = 0;
  long hand_ticks = 0;
  std::vector<Transition> transitions;
  /// Per intervention: EE pose at the trigger and the first mapped EE command.
  std::vector<geometry::Pose> takeover_actual;
  std::vector<geometry::Pose> takeover_mapped;
  /// Human EE targets per arm tick while intervening.
  std::vector<geometry::Pose> human_ee_targets;
  std::vector<long> stale_faults;
  Outcome outcome = Outcome::running;
};

class Scheduler {
 public:
  /// `human` and `retarget` may be null when nobody can take over.
  Scheduler(ControlledEnv& env, PolicySource& policy, HumanSource* human, const geometry::ArmModel& arm,
            const retarget::RetargetNet* retarget, SchedulerConfig cfg = {});

  /// One clock unit through every loop due at it. False once the episode ended.
  bool advance();
  bool finished() const { return finished_; }
  long unit() const { return unit_; }

  // Loop bodies, exposed for the wall-clock runner.
  void intervention_events(long unit);
  Eigen::VectorXd policy_observation() const { return env_.observe(); }
  void install_chunk(long unit, std::optional<Eigen::VectorXd> chunk);
  void policy_tick(long unit);
  void arm_tick(long unit);
  void hand_tick(long unit);

  /// Key toggle from an operator; applied at the next instant.
  void request_toggle() { toggle_requested_ = true; }
  const InterventionState& intervention() const { return state_; }
  const EpisodeLog& log() const { return log_; }
  EpisodeLog take_log();
  PolicySource& policy() { return policy_; }

 private:
  void set_mode(bool control, long unit);

  ControlledEnv& env_;
  PolicySource& policy_;
  HumanSource* human_;
  const geometry::ArmModel& arm_;
  const retarget::RetargetNet* retarget_;
  SchedulerConfig cfg_;

  InterventionState state_;
  std::optional<Eigen::VectorXd> chunk_;
  long chunk_unit_ = 0;
  int stale_ticks_ = 0;
  ControlCommand policy_cmd_;
  ControlCommand human_cmd_;
  bool toggle_requested_ = false;
  bool finished_ = false;
  long unit_ = 0;
  EpisodeLog log_;
};

/// Deterministic simulated-clock run until the episode ends, the tick budget
/// is spent or `max_units` clock units pass (when positive).
EpisodeLog run_scheduler(ControlledEnv& env, PolicySource& policy, HumanSource* human,
                         const geometry::ArmModel& arm, const retarget::RetargetNet* retarget,
                         const SchedulerConfig& cfg = {}, long max_units = 0);

/// Zero-order-hold step k of a raw chunk, split into arm and hand.
ControlCommand chunk_command(const Eigen::VectorXd& chunk, int horizon, double position);

}  // namespace dexhil::teleop
