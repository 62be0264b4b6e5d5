#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dexhil/policy/fm_train.hpp"
#include "dexhil/policy/observation.hpp"
#include "dexhil/teleop/scheduler.hpp"

namespace dexhil::hil {

enum class Category : int { offline = 0, autonomous = 1, intervention = 2 };
inline constexpr int kCategoryCount = 3;
const char* category_name(Category c);
Category category_from_name(const std::string& name);

struct TrajectoryRecord {
  std::string episode;
  long t = 0;  // hand tick index
  Eigen::VectorXd obs;
  Eigen::VectorXd q_arm;   // executed arm command
  Eigen::VectorXd q_hand;  // executed actuated hand command
  int intervention = 0;
  Category category = Category::offline;
  int round = 0;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct Episode {
  std::string id;
  policy::TaskId task = policy::TaskId::tissue_extraction;
  int round = 0;
  bool offline = false;
  teleop::Outcome outcome = teleop::Outcome::running;
  std::uint64_t spawn_seed = 0;
  std::vector<TrajectoryRecord> records;

  bool success() const { return outcome == teleop::Outcome::success; }
  /// Maximal runs of I_t = 1 as [first, last] tick indices.
  std::vector<std::pair<long, long>> intervention_windows() const;
};

/// Builds records from a scheduler log. Offline episodes are all I_t = 0,
/// category offline; online ticks are labelled by their flag.
Episode episode_from_log(const teleop::EpisodeLog& log, const std::string& id, policy::TaskId task, int round,
                         bool offline, std::uint64_t spawn_seed);

using CategoryCounts = std::array<long, kCategoryCount>;

struct Dataset {
  std::vector<Episode> episodes;

  std::size_t record_count() const;
  CategoryCounts counts() const;
  /// D_i = D_{i-1} + D_i'; records are copied unchanged.
  static Dataset aggregate(const Dataset& previous, const Dataset& fresh);
};

/// Observation / chunk pairs. Chunk k of record t is the command at t + k
/// within the same episode, the last command repeated past the end.
/// `weights` indexed by category; empty means unweighted.
policy::FmDataset to_fm_dataset(const Dataset& d, int horizon, const std::vector<double>& weights = {});

nlohmann::json record_to_json(const TrajectoryRecord& r);
TrajectoryRecord record_from_json(const nlohmann::json& j);

/// One JSONL file per episode plus manifest.json with categories, counts and
/// SHA-256 of every file. Returns the manifest.
nlohmann::json write_dataset(const std::filesystem::path& dir, const Dataset& d, const nlohmann::json& extra = {});
/// Verifies hashes against the manifest.
Dataset read_dataset(const std::filesystem::path& dir);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dexhil::hil
