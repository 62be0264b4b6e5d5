#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dexhil/policy/observation.hpp"

namespace dexhil::service {

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required earlier artifact is missing; the message names the command
/// that produces it.
class PrerequisiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// runs/<name>/ layout.
struct RunPaths {
  std::filesystem::path root;

  static std::string tag(policy::TaskId task, std::uint64_t seed);
  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path retarget() const { return root / "retarget"; }
  std::filesystem::path demos(policy::TaskId task, std::uint64_t seed) const;
  std::filesystem::path warmup(policy::TaskId task, std::uint64_t seed) const;
  std::filesystem::path round(int i, policy::TaskId task, std::uint64_t seed) const;
  /// "warmup" or "round_<i>".
  std::filesystem::path policy_dir(const std::string& ref, policy::TaskId task, std::uint64_t seed) const;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// manifest.json: SHA-256 of every other file below `dir`, the config hash
/// and the producing command. No timestamps, so reruns reproduce it.
nlohmann::json write_manifest(const std::filesystem::path& dir, const std::string& config_hash,
                              const std::string& command, const nlohmann::json& extra = {});
/// Throws ArtifactError when a listed file is missing or changed.
nlohmann::json verify_manifest(const std::filesystem::path& dir);

/// Throws PrerequisiteError unless `dir` holds a manifest.
void require_artifact(const std::filesystem::path& dir, const std::string& producer);

}  // namespace dexhil::service
