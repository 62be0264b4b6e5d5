#pragma once

#include <string>

#include <Eigen/Core>
#include <json.hpp>

namespace dexhil::policy {

enum class TaskId : int { tissue_extraction = 0, plush_grasp = 1 };
inline constexpr int kTaskCount = 2;

const char* task_name(TaskId t);
/// Accepts the full names plus the short forms "tissue"/"pinch" and "plush".
TaskId task_from_name(const std::string& name);

/// Fixed observation layout shared by both tasks. Object features are the
/// tissue edge centre or the sphere centre; `size` is the edge half length
/// or the sphere radius; `progress` is extraction or lift height / 0.1 m.
struct ObservationLayout {
  static constexpr int q_arm = 0;        // 6
  static constexpr int hand = 6;         // 6 actuated
  static constexpr int ee_position = 12;  // 3, base frame
  static constexpr int object = 15;      // 3, base frame
  static constexpr int object_rel = 18;  // 3, object - grasp point
  static constexpr int size = 21;
  static constexpr int progress = 22;
  static constexpr int held = 23;
  static constexpr int task = 24;  // one-hot, kTaskCount
  static constexpr int dim = 26;
};

struct ObservationFeatures {
  Eigen::VectorXd q_arm;  // 6
  Eigen::VectorXd hand;   // 6
  Eigen::Vector3d ee_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d object = Eigen::Vector3d::Zero();
  Eigen::Vector3d grasp_point = Eigen::Vector3d::Zero();
  double size = 0.0;
  double progress = 0.0;
  bool held = false;
  TaskId task = TaskId::tissue_extraction;
};

/// Throws std::invalid_argument on wrong sizes or non-finite values.
Eigen::VectorXd make_observation(const ObservationFeatures& f);

/// Field names, offsets and widths; shipped next to every dataset.
nlohmann::json observation_schema();

}  // namespace dexhil::policy
