#include "dexhil/geometry/model_io.hpp"

#include <fstream>

namespace dexhil::geometry {

using nlohmann::json;

namespace {

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ModelFormatError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_version(const json& j, const char* kind) {
  if (!j.contains("schema_version")) {
    throw ModelFormatError(std::string(kind) + " model is missing schema_version");
  }
  if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
    throw ModelFormatError(std::string(kind) + " model has unsupported schema_version " +
                           j.at("schema_version").dump());
  }
}

json joint_to_json(const Joint& jt) {
  return json{{"name", jt.name},
              {"origin", pose_to_json(jt.origin)},
              {"axis", vec3(jt.axis)},
              {"limits", json::array({jt.limits.lower, jt.limits.upper})}};
}

Joint joint_from_json(const json& j) {
  Joint jt;
  jt.name = j.value("name", "");
  jt.origin = j.contains("origin") ? pose_from_json(j.at("origin")) : Pose::identity();
  jt.axis = vec3_from(j.at("axis"));
  const json& lim = j.at("limits");
  jt.limits = {lim.at(0).get<double>(), lim.at(1).get<double>()};
  return jt;
}

json chain_to_json(const KinematicChain& c) {
  json joints = json::array();
  for (const Joint& jt : c.joints) joints.push_back(joint_to_json(jt));
  return json{{"joints", joints}, {"tip", pose_to_json(c.tip)}};
}

KinematicChain chain_from_json(const json& j) {
  KinematicChain c;
  for (const json& jt : j.at("joints")) c.joints.push_back(joint_from_json(jt));
  c.tip = j.contains("tip") ? pose_from_json(j.at("tip")) : Pose::identity();
  return c;
}

FingerId finger_from_name(const std::string& n) {
  for (int i = 0; i < kFingerCount; ++i) {
    if (n == finger_name(static_cast<FingerId>(i))) return static_cast<FingerId>(i);
  }
  throw ModelFormatError("unknown finger '" + n + "'");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelFormatError("model file " + path.string() + ": " + e.what());
  }
}

}  // namespace

json pose_to_json(const Pose& p) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(json::array({p.rotation(r, 0), p.rotation(r, 1), p.rotation(r, 2)}));
  }
  return json{{"rotation", rows}, {"translation", vec3(p.translation)}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  if (j.contains("translation")) p.translation = vec3_from(j.at("translation"));
  if (j.contains("rotation")) {
    const json& rows = j.at("rotation");
    if (!rows.is_array() || rows.size() != 3) throw ModelFormatError("rotation must be 3x3");
    for (int r = 0; r < 3; ++r) p.rotation.row(r) = vec3_from(rows[static_cast<std::size_t>(r)]);
  } else if (j.contains("rpy")) {
    const Eigen::Vector3d rpy = vec3_from(j.at("rpy"));
    p.rotation = rot_z(rpy.z()) * rot_y(rpy.y()) * rot_x(rpy.x());
  }
  if (!is_rotation(p.rotation, 1e-9)) throw ModelFormatError("pose rotation is not orthonormal");
  return p;
}

json arm_to_json(const ArmModel& arm) {
  json home = json::array();
  for (Eigen::Index i = 0; i < arm.home.size(); ++i) home.push_back(arm.home[i]);
  return json{{"schema_version", kModelSchemaVersion},
              {"kind", "arm"},
              {"name", arm.name},
              {"chain", chain_to_json(arm.chain)},
              {"home", home},
              {"workspace", {{"min", vec3(arm.workspace.min)}, {"max", vec3(arm.workspace.max)}}}};
}

ArmModel arm_from_json(const json& j) {
  check_version(j, "arm");
  try {
    ArmModel arm;
    arm.name = j.value("name", "arm");
    arm.chain = chain_from_json(j.at("chain"));
    const json& home = j.at("home");
    arm.home.resize(static_cast<Eigen::Index>(home.size()));
    for (std::size_t i = 0; i < home.size(); ++i) {
      arm.home[static_cast<Eigen::Index>(i)] = home[i].get<double>();
    }
    arm.workspace.min = vec3_from(j.at("workspace").at("min"));
    arm.workspace.max = vec3_from(j.at("workspace").at("max"));
    arm.validate();
    return arm;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("arm model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("arm model: ") + e.what());
  }
}

json hand_to_json(const HandModel& hand) {
  json fingers = json::array();
  for (const Finger& f : hand.fingers) {
    fingers.push_back(json{{"name", finger_name(f.id)}, {"chain", chain_to_json(f.chain)}});
  }
  json coupling = json::array();
  for (const CouplingEntry& c : hand.coupling) {
    coupling.push_back(json{{"passive_joint", c.passive_joint},
                            {"driving_actuated", c.driving_actuated},
                            {"ratio", c.ratio}});
  }
  return json{{"schema_version", kModelSchemaVersion},
              {"kind", "hand"},
              {"name", hand.name},
              {"fingers", fingers},
              {"actuated_joints", hand.actuated_joints},
              {"coupling", coupling},
              {"palm_point", vec3(hand.palm_point)}};
}

HandModel hand_from_json(const json& j) {
  check_version(j, "hand");
  try {
    HandModel hand;
    hand.name = j.value("name", "hand");
    for (const json& f : j.at("fingers")) {
      hand.fingers.push_back(
          Finger{finger_from_name(f.at("name").get<std::string>()), chain_from_json(f.at("chain"))});
    }
    hand.actuated_joints = j.at("actuated_joints").get<std::vector<std::size_t>>();
    for (const json& c : j.at("coupling")) {
      hand.coupling.push_back({c.at("passive_joint").get<std::size_t>(),
                               c.at("driving_actuated").get<std::size_t>(),
                               c.at("ratio").get<double>()});
    }
    if (j.contains("palm_point")) hand.palm_point = vec3_from(j.at("palm_point"));
    hand.validate();
    return hand;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("hand model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("hand model: ") + e.what());
  }
}

ArmModel load_arm_model(const std::filesystem::path& path) { return arm_from_json(read_json(path)); }

HandModel load_hand_model(const std::filesystem::path& path) {
  return hand_from_json(read_json(path));
}

void save_model(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ModelFormatError("cannot write model file " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace dexhil::geometry
