#include "dexhil/teleop/anchor.hpp"

namespace dexhil::teleop {

using geometry::inverse;

geometry::Pose map_marker_to_ee(const AnchorState& a, const geometry::Pose& marker) {
  return a.ee0 * inverse(a.robot_cube) * inverse(a.marker0) * marker * a.robot_cube;
}

geometry::Pose marker_for_ee(const AnchorState& a, const geometry::Pose& ee) {
  return a.marker0 * a.robot_cube * inverse(a.ee0) * ee * inverse(a.robot_cube);
}

}  // namespace dexhil::teleop
