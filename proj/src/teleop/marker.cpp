#include "dexhil/teleop/marker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dexhil::teleop {

nlohmann::json marker_to_json(const MarkerFrame& f) {
  const Eigen::Quaterniond q = f.pose.quaternion();
  return {{"t", f.timestamp}, {"qw", q.w()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()},
          {"x", f.pose.translation.x()}, {"y", f.pose.translation.y()}, {"z", f.pose.translation.z()}};
}

MarkerFrame marker_from_json(const nlohmann::json& j) {
  try {
    MarkerFrame f;
    f.timestamp = j.at("t").get<double>();
    f.pose = geometry::Pose::from_quaternion(j.at("qw").get<double>(), j.at("qx").get<double>(),
                                             j.at("qy").get<double>(), j.at("qz").get<double>(),
                                             {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()});
    if (!f.pose.rotation.allFinite() || !f.pose.translation.allFinite() || !std::isfinite(f.timestamp)) {
      throw MarkerStreamError("marker frame: non-finite value");
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw MarkerStreamError(std::string("marker frame: ") + e.what());
  }
}

void validate_stream(const std::vector<MarkerFrame>& frames) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw MarkerStreamError("marker stream: timestamp " + std::to_string(frames[i].timestamp) + " at line " +
                              std::to_string(i + 1) + " does not increase");
    }
  }
}

std::vector<MarkerFrame> read_marker_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MarkerStreamError("cannot open marker file " + path.string());
  std::vector<MarkerFrame> frames;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MarkerStreamError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    frames.push_back(marker_from_json(j));
  }
  validate_stream(frames);
  return frames;
}

void write_marker_file(const std::filesystem::path& path, const std::vector<MarkerFrame>& frames) {
  validate_stream(frames);
  std::ofstream out(path);
  if (!out) throw MarkerStreamError("cannot write marker file " + path.string());
  for (const MarkerFrame& f : frames) out << marker_to_json(f).dump() << '\n';
}

MarkerFrame apply_delta(const MarkerFrame& f, const MarkerDelta& d, double timestamp) {
  MarkerFrame out;
  out.timestamp = timestamp;
  out.pose.translation = f.pose.translation + Eigen::Vector3d(d.dx, d.dy, d.dz);
  out.pose.rotation = geometry::orthonormalize(f.pose.rotation * geometry::rot_z(d.dyaw) *
                                               geometry::rot_y(d.dpitch) * geometry::rot_x(d.droll));
  return out;
}

MarkerReplay::MarkerReplay(std::vector<MarkerFrame> frames) : frames_(std::move(frames)) { validate_stream(frames_); }

std::optional<MarkerFrame> MarkerReplay::at(double t) const {
  auto it = std::upper_bound(frames_.begin(), frames_.end(), t,
                             [](double v, const MarkerFrame& f) { return v < f.timestamp; });
  if (it == frames_.begin()) return std::nullopt;
  return *std::prev(it);
}

}  // namespace dexhil::teleop
