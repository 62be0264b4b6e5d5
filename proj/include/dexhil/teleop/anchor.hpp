#pragma once

#include "dexhil/geometry/pose.hpp"

namespace dexhil::teleop {

struct AnchorState {
  geometry::Pose ee0;         // robot base frame, at the trigger instant
  geometry::Pose marker0;     // camera frame, at the trigger instant
  geometry::Pose robot_cube;  // constant cube-to-EE extrinsic
};

/// T_EE = T_EE0 (T_rc)^-1 (T_M0)^-1 T_M T_rc
geometry::Pose map_marker_to_ee(const AnchorState& anchor, const geometry::Pose& marker);

/// Marker pose that maps to `ee` under `anchor`; the inverse of map_marker_to_ee.
geometry::Pose marker_for_ee(const AnchorState& anchor, const geometry::Pose& ee);

}  // namespace dexhil::teleop
