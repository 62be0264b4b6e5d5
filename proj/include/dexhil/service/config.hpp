#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexhil/hil/pipeline.hpp"

namespace dexhil::service {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { oracle, human };
const char* run_mode_name(RunMode m);

struct RetargetTrainConfig {
  std::uint64_t init_seed = 1;
  std::uint64_t dataset_seed = 101;
  int dataset_size = 2000;
  int stage1_steps = 2500;
  int stage2_steps = 1500;
};

/// One declarative file drives every CLI command. The pipeline block is a
/// template; task and seed come from the lists.
struct RunConfig {
  std::string name = "default";
  std::vector<policy::TaskId> tasks = {policy::TaskId::tissue_extraction};
  std::vector<std::uint64_t> seeds = {1};
  int rounds = 3;
  RunMode mode = RunMode::oracle;
  hil::PipelineConfig pipeline = hil::PipelineConfig::defaults(policy::TaskId::tissue_extraction);
  RetargetTrainConfig retarget;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;
  hil::PipelineConfig pipeline_for(policy::TaskId task, std::uint64_t seed) const;
};

}  // namespace dexhil::service
