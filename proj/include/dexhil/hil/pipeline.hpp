#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexhil/geometry/arm_model.hpp"
#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/hil/dataset.hpp"
#include "dexhil/hil/training.hpp"
#include "dexhil/hil/weighting.hpp"
#include "dexhil/policy/fm_policy.hpp"
#include "dexhil/retarget/retarget_net.hpp"
#include "dexhil/sim/expert.hpp"
#include "dexhil/sim/sim_env.hpp"

namespace dexhil::hil {

/// Samples a fresh chunk from the flow-matching policy on every inference,
/// starting the flow from x0 ~ N(0, noise_scale^2 I).
class FmPolicySource : public teleop::PolicySource {
 public:
  FmPolicySource(const policy::FmPolicy& p, std::uint64_t seed, double noise_scale = 1.0)
      : policy_(p), rng_(seed), noise_scale_(noise_scale) {}
  std::optional<Eigen::VectorXd> infer(const Eigen::VectorXd& obs) override;

 private:
  const policy::FmPolicy& policy_;
  std::mt19937_64 rng_;
  double noise_scale_;
};

/// Spawn streams: demonstrations, held-out demonstrations; evaluation is 1
/// and round i rolls out on 1 + i.
inline constexpr int kDemoStream = 0;
inline constexpr int kHoldoutStream = 500;

struct PipelineConfig {
  policy::TaskId task = policy::TaskId::tissue_extraction;
  std::uint64_t seed = 1;
  int warmup_demos = 60;
  int episodes_per_round = 10;
  int eval_episodes = 20;
  int max_attempts = 40;  // rollouts per round before the round is flagged partial
  bool weighted = true;   // false: plain aggregation (all w = 1)
  double rollout_noise = 0.5;  // scale of the flow start noise when deployed
  WeightingConfig weighting;
  policy::PolicyConfig policy;
  policy::FmHyper warmup_hyper;
  policy::FmHyper update_hyper;
  sim::ExpertConfig demo_expert;   // offline demonstrations
  sim::ExpertConfig intervenor;    // online oracle
  teleop::SchedulerConfig scheduler;

  static PipelineConfig defaults(policy::TaskId task);
  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct RoundMetrics {
  int round = 0;
  int successes = 0;  // of the policy being rolled out, over eval_episodes
  int eval_episodes = 0;
  int collected = 0;
  int attempts = 0;
  bool partial = false;
  bool uniform_fallback = false;  // no intervention data: weights fell back to 1
  long interventions = 0;
  long intervention_ticks = 0;
  CategoryCounts counts{};
  std::array<double, kCategoryCount> weights{};
  std::size_t dataset_records = 0;
  TrainLog train;

  double success_rate() const { return eval_episodes ? static_cast<double>(successes) / eval_episodes : 0.0; }
  nlohmann::json to_json(bool with_loss = true) const;
};

struct RoundState {
  int round = 0;
  Dataset data;  // D^i
  Dataset fresh;  // D^{i,'}
  policy::FmPolicy policy;  // pi_i
  RoundMetrics metrics;
};

/// Everything the loop needs besides the policy and data: models, the
/// retargeting net and the environment for the configured task.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, geometry::ArmModel arm, geometry::HandModel hand, retarget::RetargetNet net);

  const PipelineConfig& config() const { return cfg_; }
  sim::SimEnv& env() { return env_; }
  const retarget::RetargetNet& retarget() const { return net_; }

  /// Scripted demonstrations from the start of each episode; only successful
  /// ones are kept.
  Dataset collect_demos(int count, int stream = kDemoStream);
  policy::FmPolicy warmup(const Dataset& d0, TrainLog* log = nullptr) const;

  /// k successes over `episodes` deterministic spawns of the evaluation set.
  int evaluate(const policy::FmPolicy& p, int episodes, std::uint64_t salt = 0);

  /// One online episode of `p` with the oracle watching.
  Episode rollout(const policy::FmPolicy& p, int round, int attempt, teleop::EpisodeLog* log = nullptr);

  /// Produces one online episode; the default is rollout() with the oracle.
  using RolloutFn = std::function<Episode(int round, int attempt)>;

  /// Evaluate pi_{i-1}, collect filtered successes, aggregate and update.
  RoundState run_round(int round, const policy::FmPolicy& previous, const Dataset& data,
                       const RolloutFn& rollout_fn = {});

  std::vector<double> weights_for(const Dataset& d, bool* fallback = nullptr) const;

  const geometry::ArmModel& arm() const { return arm_; }
  /// Spawn seed of evaluation episode k.
  std::uint64_t eval_seed(int k, std::uint64_t salt = 0) const { return spawn_seed(1, k) + salt * 7777777ULL; }
  /// Spawn seed of online attempt `attempt` in `round`.
  std::uint64_t rollout_seed(int round, int attempt) const { return spawn_seed(1 + round, 1000 + attempt); }

  Eigen::VectorXd joint_lower() const;
  Eigen::VectorXd joint_upper() const;

 private:
  std::uint64_t spawn_seed(int stream, long k) const;

  PipelineConfig cfg_;
  geometry::ArmModel arm_;
  geometry::HandModel hand_;
  retarget::RetargetNet net_;
  sim::SimEnv env_;
};

}  // namespace dexhil::hil
