#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/retarget/human_hand.hpp"
#include "dexhil/sim/sim_env.hpp"
#include "dexhil/teleop/scheduler.hpp"

namespace dexhil::service {

inline constexpr int kBridgeProtocolVersion = 1;

/// Operator input arriving over the bridge. Marker deltas accumulate into a
/// virtual cube pose; finger curls go through the human hand model so the
/// retargeting net sees real keypoints.
class BridgeHuman : public teleop::HumanSource {
 public:
  explicit BridgeHuman(const geometry::HandModel& robot_hand);

  /// Back to autonomous with the cube at the origin; curls are kept.
  void reset_episode();
  void toggle();
  void add_marker_delta(const teleop::MarkerDelta& d);
  /// Curls in [0, 1], thumb first.
  void set_curls(const std::array<double, 5>& curls);

  std::optional<bool> wants_control(double t) override;
  std::optional<teleop::MarkerFrame> marker(double t) override;
  std::optional<retarget::HumanHandSample> hand(double t) override;

  /// True once every toggle so far has been handed to the scheduler.
  bool toggles_applied() const;
  teleop::MarkerFrame current_marker() const;

 private:
  mutable std::mutex mutex_;
  retarget::HumanHandModel model_;
  geometry::HandModel robot_;
  bool desired_ = false;
  long toggles_ = 0;
  long toggles_seen_ = 0;
  teleop::MarkerFrame marker_;
  double last_t_ = 0.0;
  std::array<double, 5> curls_{};
  std::optional<retarget::HumanHandSample> sample_;
};

/// Parses client lines and applies them to a BridgeHuman. Returns the frame
/// to send back (an error frame for anything rejected, nothing otherwise).
class BridgeSession {
 public:
  explicit BridgeSession(BridgeHuman& human) : human_(human) {}
  std::optional<nlohmann::json> handle_line(const std::string& line);
  long accepted() const { return accepted_; }
  long rejected() const { return rejected_; }

 private:
  BridgeHuman& human_;
  long accepted_ = 0;
  long rejected_ = 0;
};

nlohmann::json error_frame(const std::string& message);
nlohmann::json welcome_frame(policy::TaskId task, const std::string& policy_ref);
nlohmann::json state_frame(long seq, int episode, const teleop::Scheduler& s, const sim::SimState& state);
nlohmann::json episode_end_frame(int episode, teleop::Outcome outcome, long interventions);

}  // namespace dexhil::service
