#include "dexhil/policy/observation.hpp"

#include <stdexcept>

namespace dexhil::policy {

const char* task_name(TaskId t) {
  switch (t) {
    case TaskId::tissue_extraction: return "tissue_extraction";
    case TaskId::plush_grasp: return "plush_grasp";
  }
  return "?";
}

TaskId task_from_name(const std::string& name) {
  if (name == "tissue_extraction" || name == "tissue" || name == "pinch") return TaskId::tissue_extraction;
  if (name == "plush_grasp" || name == "plush") return TaskId::plush_grasp;
  throw std::invalid_argument("unknown task '" + name + "'");
}

Eigen::VectorXd make_observation(const ObservationFeatures& f) {
  using L = ObservationLayout;
  if (f.q_arm.size() != 6 || f.hand.size() != 6) {
    throw std::invalid_argument("observation: q_arm and hand must have 6 entries");
  }
  Eigen::VectorXd o = Eigen::VectorXd::Zero(L::dim);
  o.segment<6>(L::q_arm) = f.q_arm;
  o.segment<6>(L::hand) = f.hand;
  o.segment<3>(L::ee_position) = f.ee_position;
  o.segment<3>(L::object) = f.object;
  o.segment<3>(L::object_rel) = f.object - f.grasp_point;
  o[L::size] = f.size;
  o[L::progress] = f.progress;
  o[L::held] = f.held ? 1.0 : 0.0;
  o[L::task + static_cast<int>(f.task)] = 1.0;
  if (!o.allFinite()) throw std::invalid_argument("observation: non-finite feature");
  return o;
}

nlohmann::json observation_schema() {
  using L = ObservationLayout;
  auto field = [](const char* name, int offset, int width, const char* unit) {
    return nlohmann::json{{"name", name}, {"offset", offset}, {"width", width}, {"unit", unit}};
  };
  return {{"dim", L::dim},
          {"fields",
           {field("q_arm", L::q_arm, 6, "rad"), field("hand_actuated", L::hand, 6, "rad"),
            field("ee_position", L::ee_position, 3, "m"), field("object_position", L::object, 3, "m"),
            field("object_minus_grasp_point", L::object_rel, 3, "m"), field("object_size", L::size, 1, "m"),
            field("progress", L::progress, 1, "1"), field("held", L::held, 1, "flag"),
            field("task_one_hot", L::task, kTaskCount, "flag")}},
          {"tasks", {task_name(TaskId::tissue_extraction), task_name(TaskId::plush_grasp)}}};
}

}  // namespace dexhil::policy
