#include "dexhil/sim/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dexhil::sim {

namespace {

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
std::vector<double> vec3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

double arc_coverage(std::vector<double> angles) {
  if (angles.size() < 2) return 0.0;
  std::sort(angles.begin(), angles.end());
  double gap = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double next = i + 1 < angles.size() ? angles[i + 1] : angles[0] + 2.0 * M_PI;
    gap = std::max(gap, next - angles[i]);
  }
  return 2.0 * M_PI - gap;
}

double mean_finger_mcp(const Eigen::VectorXd& hand) {
  return hand.segment(geometry::kIndexMcp, 4).mean();
}

}  // namespace

TaskSpec TaskSpec::tissue() { return TaskSpec{}; }

TaskSpec TaskSpec::plush() {
  TaskSpec s;
  s.task = TaskId::plush_grasp;
  s.spawn_min = {0.28, -0.04, 0.0};
  s.spawn_max = {0.32, 0.04, 0.0};
  return s;
}

TaskSpec TaskSpec::for_task(TaskId t) { return t == TaskId::plush_grasp ? plush() : tissue(); }

void TaskSpec::validate(const geometry::ArmModel& arm) const {
  if (tick_limit < 1) throw std::invalid_argument("task spec: tick_limit must be >= 1");
  if ((spawn_min.array() > spawn_max.array()).any() || radius_min <= 0.0 || radius_min > radius_max) {
    throw std::invalid_argument("task spec: empty spawn range");
  }
  const Eigen::Vector3d lo(spawn_min.x(), spawn_min.y(), std::max(spawn_min.z(), stand_height));
  const Eigen::Vector3d hi(spawn_max.x(), spawn_max.y(), std::max(spawn_max.z(), stand_height + radius_max));
  if (!arm.workspace.contains(lo) || !arm.workspace.contains(hi)) {
    throw std::invalid_argument("task spec: spawn range leaves the arm workspace");
  }
  if (pinch_threshold <= 0 || pinch_gap_max <= 0 || extraction_length <= 0 || cage_min_tips < 1 ||
      arm_rate <= 0 || hand_rate <= 0) {
    throw std::invalid_argument("task spec: thresholds and rates must be positive");
  }
}

nlohmann::json TaskSpec::to_json() const {
  return {{"task", policy::task_name(task)},
          {"tick_limit", tick_limit},
          {"spawn_min", vec3(spawn_min)},
          {"spawn_max", vec3(spawn_max)},
          {"radius", {radius_min, radius_max}},
          {"stand_height", stand_height},
          {"edge_half_length", edge_half_length},
          {"pinch_threshold", pinch_threshold},
          {"pinch_gap_max", pinch_gap_max},
          {"approach_zone", approach_zone},
          {"approach_gap", approach_gap},
          {"extraction_length", extraction_length},
          {"success_extraction", success_extraction},
          {"cage_radius_factor", cage_radius_factor},
          {"cage_arc", cage_arc},
          {"cage_min_tips", cage_min_tips},
          {"palm_margin", palm_margin},
          {"lift_height", lift_height},
          {"release_margin", release_margin},
          {"arm_rate", arm_rate},
          {"hand_rate", hand_rate}};
}

double distance_to_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

CageReport cage_test(const geometry::Fingertips& tips, const Eigen::Vector3d& palm, const geometry::Pose& ee,
                     const Eigen::Vector3d& center, double radius, const TaskSpec& spec) {
  CageReport r;
  const Eigen::Vector3d ay = ee.rotation.col(1);
  const Eigen::Vector3d az = ee.rotation.col(2);
  std::vector<double> angles;
  for (const Eigen::Vector3d& t : tips) {
    const Eigen::Vector3d d = t - center;
    if (d.norm() <= spec.cage_radius_factor * radius) angles.push_back(std::atan2(d.dot(az), d.dot(ay)));
  }
  r.tips_inside = static_cast<int>(angles.size());
  r.arc = arc_coverage(angles);
  r.palm_distance = (palm - center).norm();
  r.caged = r.tips_inside >= spec.cage_min_tips && r.arc > spec.cage_arc &&
            r.palm_distance <= radius + spec.palm_margin;
  return r;
}

Outcome check_success(const SimState& s, const TaskSpec& spec) {
  if (s.outcome == Outcome::success) return Outcome::success;
  if (s.task == TaskId::tissue_extraction) {
    if (s.extraction > spec.success_extraction) return Outcome::success;
  } else {
    if (s.grasped && s.sphere_center.z() > s.sphere_spawn.z() + spec.lift_height) return Outcome::success;
    if (s.dropped) return Outcome::failure;
  }
  if (s.tick >= spec.tick_limit) return Outcome::failure;
  return Outcome::running;
}

SimEnv::SimEnv(TaskSpec spec, geometry::ArmModel arm, geometry::HandModel hand)
    : spec_(std::move(spec)), arm_(std::move(arm)), hand_(std::move(hand)) {
  arm_.validate();
  hand_.validate();
  spec_.validate(arm_);
  reset(0);
}

void SimEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SimState s;
  s.task = spec_.task;
  s.q_arm = arm_.home;
  s.hand = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hand_.actuated_count()));
  const double x = uniform(spec_.spawn_min.x(), spec_.spawn_max.x());
  const double y = uniform(spec_.spawn_min.y(), spec_.spawn_max.y());
  if (spec_.task == TaskId::tissue_extraction) {
    s.edge_center = {x, y, uniform(spec_.spawn_min.z(), spec_.spawn_max.z())};
    s.edge_spawn = s.edge_center;
  } else {
    s.radius = uniform(spec_.radius_min, spec_.radius_max);
    s.sphere_center = {x, y, spec_.stand_height + s.radius};
    s.sphere_spawn = s.sphere_center;
  }
  state_ = s;
}

void SimEnv::set_state(const SimState& s) {
  if (s.task != spec_.task || s.q_arm.size() != arm_.home.size() ||
      s.hand.size() != static_cast<Eigen::Index>(hand_.actuated_count())) {
    throw std::invalid_argument("set_state: state does not match this environment");
  }
  state_ = s;
}

geometry::Pose SimEnv::ee_pose() const { return geometry::fk_ee(arm_, state_.q_arm); }

geometry::Fingertips SimEnv::tips_world() const {
  const geometry::Pose ee = ee_pose();
  geometry::Fingertips t = geometry::fk_fingertips(hand_, geometry::expand_coupling(hand_, state_.hand));
  for (auto& p : t) p = ee.apply(p);
  return t;
}

Eigen::Vector3d SimEnv::palm_world() const { return ee_pose().apply(hand_.palm_point); }

Eigen::Vector3d SimEnv::grasp_point_world() const {
  return ee_pose().apply(spec_.task == TaskId::tissue_extraction ? spec_.pinch_point_hand : spec_.cage_center_hand);
}

Eigen::Vector3d SimEnv::object_position() const {
  return spec_.task == TaskId::tissue_extraction ? state_.edge_center : state_.sphere_center;
}

double SimEnv::thumb_index_gap() const {
  const geometry::Fingertips t = tips_world();
  return (t[0] - t[1]).norm();
}

double SimEnv::lifted_distance() const {
  if (spec_.task == TaskId::tissue_extraction) return state_.extraction * spec_.extraction_length;
  return state_.sphere_center.z() - state_.sphere_spawn.z();
}

Eigen::VectorXd SimEnv::observe() const {
  policy::ObservationFeatures f;
  f.q_arm = state_.q_arm;
  f.hand = state_.hand;
  f.ee_position = ee_pose().translation;
  f.object = object_position();
  f.grasp_point = grasp_point_world();
  if (spec_.task == TaskId::tissue_extraction) {
    f.size = spec_.edge_half_length;
    f.progress = state_.extraction;
    f.held = state_.held;
  } else {
    f.size = state_.radius;
    f.progress = std::clamp(lifted_distance() / spec_.lift_height, 0.0, 1.5);
    f.held = state_.grasped;
  }
  f.task = spec_.task;
  return policy::make_observation(f);
}

void SimEnv::step(const Eigen::VectorXd& arm_cmd, const Eigen::VectorXd& hand_cmd) {
  if (arm_cmd.size() != state_.q_arm.size() || hand_cmd.size() != state_.hand.size()) {
    throw std::invalid_argument("step: command has the wrong size");
  }
  const double da = spec_.arm_rate * kTickSeconds;
  const double dh = spec_.hand_rate * kTickSeconds;
  const Eigen::VectorXd qa = arm_.clamp(arm_cmd);
  const Eigen::VectorXd qh = hand_.clamp_actuated(hand_cmd);
  state_.q_arm += (qa - state_.q_arm).cwiseMax(-da).cwiseMin(da);
  state_.hand += (qh - state_.hand).cwiseMax(-dh).cwiseMin(dh);
  ++state_.tick;

  const geometry::Pose ee = ee_pose();
  geometry::Fingertips tips = geometry::fk_fingertips(hand_, geometry::expand_coupling(hand_, state_.hand));
  for (auto& p : tips) p = ee.apply(p);
  if (state_.outcome != Outcome::failure) {  // success is sticky; the object keeps moving
    if (spec_.task == TaskId::tissue_extraction) {
      update_tissue(ee, tips);
    } else {
      update_plush(ee, tips);
    }
  }
  state_.outcome = check_success(state_, spec_);
}

void SimEnv::update_tissue(const geometry::Pose& ee, const geometry::Fingertips& tips) {
  SimState& s = state_;
  const Eigen::Vector3d half(0.0, spec_.edge_half_length, 0.0);
  auto edge_dist = [&](const Eigen::Vector3d& p) {
    return distance_to_segment(p, s.edge_center - half, s.edge_center + half);
  };
  const double gap = (tips[0] - tips[1]).norm();
  const bool in_zone = edge_dist(ee.apply(spec_.pinch_point_hand)) < spec_.approach_zone;
  if (in_zone && !s.in_zone) s.armed = gap > spec_.approach_gap;
  if (!in_zone) s.armed = false;
  s.in_zone = in_zone;

  const Eigen::Vector3d mid = 0.5 * (tips[0] + tips[1]);
  const bool held = s.armed && gap <= spec_.pinch_gap_max && edge_dist(tips[0]) <= spec_.pinch_threshold &&
                    edge_dist(tips[1]) <= spec_.pinch_threshold;
  if (held && s.held) {
    // the sheet follows the fingers sideways; only upward motion pulls it out
    const Eigen::Vector3d d = mid - s.last_pinch_mid;
    s.edge_center.x() += d.x();
    s.edge_center.y() += d.y();
    s.extraction = std::min(1.0, s.extraction + std::max(0.0, d.z()) / spec_.extraction_length);
    s.edge_center.z() = s.edge_spawn.z() + s.extraction * spec_.extraction_length;
  }
  s.held = held;
  s.last_pinch_mid = mid;
}

void SimEnv::update_plush(const geometry::Pose& ee, const geometry::Fingertips& tips) {
  SimState& s = state_;
  const Eigen::Vector3d palm = ee.apply(hand_.palm_point);
  if (s.grasped) {
    s.sphere_center = ee.apply(s.grasp_offset);
    // closing further keeps the hold; opening the fingers lets go
    if (mean_finger_mcp(s.hand) < s.grasp_mcp - spec_.release_margin) {
      s.grasped = false;
      s.dropped = true;
      // falls back onto the stand, or to the table when carried off it
      const bool over_stand = (s.sphere_center.head<2>() - s.sphere_spawn.head<2>()).norm() < 0.05;
      s.sphere_center.z() = over_stand ? s.sphere_spawn.z() : s.radius;
    }
    return;
  }
  const bool in_zone = (palm - s.sphere_center).norm() < s.radius + spec_.plush_zone_margin;
  if (in_zone && !s.in_zone) s.armed = mean_finger_mcp(s.hand) < spec_.approach_open_mcp;
  if (!in_zone) s.armed = false;
  s.in_zone = in_zone;
  if (s.armed && cage_test(tips, palm, ee, s.sphere_center, s.radius, spec_).caged) {
    s.grasped = true;
    s.grasp_offset = geometry::inverse(ee).apply(s.sphere_center);
    s.grasp_mcp = mean_finger_mcp(s.hand);
  }
}

nlohmann::json state_to_json(const SimState& s) {
  nlohmann::json j = {{"task", policy::task_name(s.task)},
                      {"tick", s.tick},
                      {"outcome", teleop::outcome_name(s.outcome)},
                      {"q_arm", vec(s.q_arm)},
                      {"hand", vec(s.hand)}};
  if (s.task == TaskId::tissue_extraction) {
    j["edge_center"] = vec3(s.edge_center);
    j["extraction"] = s.extraction;
    j["held"] = s.held;
  } else {
    j["sphere_center"] = vec3(s.sphere_center);
    j["radius"] = s.radius;
    j["grasped"] = s.grasped;
    j["dropped"] = s.dropped;
  }
  return j;
}

}  // namespace dexhil::sim
