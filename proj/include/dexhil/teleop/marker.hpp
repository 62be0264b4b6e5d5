#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexhil/geometry/pose.hpp"

namespace dexhil::teleop {

/// Cube pose in the camera frame.
struct MarkerFrame {
  double timestamp = 0.0;
  geometry::Pose pose;
};

class MarkerStreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {t, qw, qx, qy, qz, x, y, z}
nlohmann::json marker_to_json(const MarkerFrame& f);
MarkerFrame marker_from_json(const nlohmann::json& j);

/// Throws MarkerStreamError unless timestamps strictly increase.
void validate_stream(const std::vector<MarkerFrame>& frames);

std::vector<MarkerFrame> read_marker_file(const std::filesystem::path& path);
void write_marker_file(const std::filesystem::path& path, const std::vector<MarkerFrame>& frames);

/// Relative cube motion: translation in the camera frame, roll/pitch/yaw
/// applied in the cube frame (R <- R Rz(yaw) Ry(pitch) Rx(roll)).
struct MarkerDelta {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double droll = 0.0, dpitch = 0.0, dyaw = 0.0;
};

MarkerFrame apply_delta(const MarkerFrame& f, const MarkerDelta& d, double timestamp);

/// Latest frame at or before a query time over a validated stream.
class MarkerReplay {
 public:
  explicit MarkerReplay(std::vector<MarkerFrame> frames);
  std::optional<MarkerFrame> at(double t) const;
  const std::vector<MarkerFrame>& frames() const { return frames_; }

 private:
  std::vector<MarkerFrame> frames_;
};

}  // namespace dexhil::teleop
