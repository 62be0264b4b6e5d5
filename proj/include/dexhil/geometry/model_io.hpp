#pragma once

#include <filesystem>

#include <json.hpp>

#include "dexhil/geometry/arm_model.hpp"
#include "dexhil/geometry/hand_model.hpp"

namespace dexhil::geometry {

inline constexpr int kModelSchemaVersion = 1;

/// Raised for malformed or unsupported model documents.
class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json arm_to_json(const ArmModel& arm);
ArmModel arm_from_json(const nlohmann::json& j);

nlohmann::json hand_to_json(const HandModel& hand);
HandModel hand_from_json(const nlohmann::json& j);

ArmModel load_arm_model(const std::filesystem::path& path);
HandModel load_hand_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace dexhil::geometry
