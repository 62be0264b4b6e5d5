#include "dexhil/teleop/intervention.hpp"

namespace dexhil::teleop {

const char* mode_name(Mode m) { return m == Mode::intervening ? "intervening" : "autonomous"; }

const char* source_name(CommandSource s) { return s == CommandSource::human ? "human" : "policy"; }

void InterventionState::trigger(double timestamp, const geometry::Pose& ee_now, const MarkerFrame& marker_now,
                                const geometry::Pose& robot_cube) {
  if (mode_ != Mode::autonomous) throw ProtocolError("trigger while already intervening");
  mode_ = Mode::intervening;
  anchor_ = AnchorState{ee_now, marker_now.pose, robot_cube};
  transitions_.push_back({timestamp, mode_});
}

void InterventionState::release(double timestamp) {
  if (mode_ != Mode::intervening) throw ProtocolError("release without an active intervention");
  mode_ = Mode::autonomous;
  anchor_.reset();
  transitions_.push_back({timestamp, mode_});
}

const ControlCommand& multiplex(const InterventionState& state, const ControlCommand& u_policy,
                                const ControlCommand& u_human) {
  return state.flag() == 1 ? u_human : u_policy;
}

}  // namespace dexhil::teleop
