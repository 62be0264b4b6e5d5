#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dexhil/nn/mlp.hpp"

namespace dexhil::nn {

inline constexpr int kCheckpointSchemaVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named networks plus free-form metadata. Saved as JSON with per-layer shape
/// information and a SHA-256 content hash that is verified on load.
struct Checkpoint {
  std::string kind;
  std::map<std::string, MlpParams> networks;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);

std::string content_hash(const Checkpoint& c);

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dexhil::nn
