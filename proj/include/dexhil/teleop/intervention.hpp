#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dexhil/teleop/anchor.hpp"
#include "dexhil/teleop/marker.hpp"

namespace dexhil::teleop {

enum class Mode { autonomous, intervening };
const char* mode_name(Mode m);

class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Transition {
  double timestamp = 0.0;
  Mode mode = Mode::autonomous;
};

class InterventionState {
 public:
  Mode mode() const { return mode_; }
  /// I_t
  int flag() const { return mode_ == Mode::intervening ? 1 : 0; }
  const std::optional<AnchorState>& anchor() const { return anchor_; }
  const std::vector<Transition>& transitions() const { return transitions_; }

  /// Captures the anchor from the current EE pose and the latest marker frame.
  void trigger(double timestamp, const geometry::Pose& ee_now, const MarkerFrame& marker_now,
               const geometry::Pose& robot_cube);
  void release(double timestamp);

 private:
  Mode mode_ = Mode::autonomous;
  std::optional<AnchorState> anchor_;
  std::vector<Transition> transitions_;
};

enum class CommandSource { policy, human };
const char* source_name(CommandSource s);

struct ControlCommand {
  Eigen::VectorXd arm;
  Eigen::VectorXd hand;
  CommandSource source = CommandSource::policy;
};

/// u_human when I_t = 1, otherwise u_policy.
const ControlCommand& multiplex(const InterventionState& state, const ControlCommand& u_policy,
                                const ControlCommand& u_human);

}  // namespace dexhil::teleop
