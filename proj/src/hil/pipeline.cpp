#include "dexhil/hil/pipeline.hpp"

#include <stdexcept>

#include "dexhil/hil/filter.hpp"

namespace dexhil::nn {
NLOHMANN_JSON_SERIALIZE_ENUM(OptimizerKind, {{OptimizerKind::sgd, "sgd"}, {OptimizerKind::adam, "adam"}})
}  // namespace dexhil::nn

namespace dexhil::policy {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PolicyConfig, obs_dim, action_dim, horizon, encoder_hidden,
                                                context_dim, velocity_hidden, sample_steps, relative_to_proprio)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FmHyper, steps, batch_size, learning_rate, final_lr_fraction,
                                                optimizer, seed, head_only)
}  // namespace dexhil::policy

namespace dexhil::sim {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExpertConfig, speed, pregrasp_height, close_time, settle_tolerance,
                                                lift_margin, regrasp_wait, via_offset, speed_jitter, close_jitter,
                                                tremor, aim_error, close_lead, stall_window, stall_progress, closure_threshold,
                                                align_tolerance, monitor_delay)
}  // namespace dexhil::sim

namespace dexhil::hil {

namespace {

// Rejects keys the default object does not have.
void check_keys(const nlohmann::json& j, const nlohmann::json& reference, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!reference.contains(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
    if (reference[k].is_object() && !k.empty() && k != "weighting") check_keys(v, reference[k], where + "." + k);
  }
}

}  // namespace

std::optional<Eigen::VectorXd> FmPolicySource::infer(const Eigen::VectorXd& obs) {
  std::normal_distribution<double> n(0.0, noise_scale_);
  Eigen::VectorXd x0(policy_.config.chunk_size());
  for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = noise_scale_ > 0.0 ? n(rng_) : 0.0;
  return policy::integrate_from(policy_, obs, x0);
}

PipelineConfig PipelineConfig::defaults(policy::TaskId task) {
  PipelineConfig c;
  c.task = task;
  c.policy.relative_to_proprio = true;
  c.policy.encoder_hidden = {256};
  c.policy.context_dim = 64;
  c.warmup_hyper.steps = 3000;
  c.warmup_hyper.learning_rate = 1e-3;
  c.warmup_hyper.final_lr_fraction = 0.1;
  c.update_hyper.steps = 2000;
  c.update_hyper.learning_rate = 5e-4;
  c.update_hyper.final_lr_fraction = 0.1;
  c.demo_expert.via_offset = 0.03;
  c.demo_expert.speed_jitter = 0.3;
  c.demo_expert.close_jitter = 0.2;
  c.demo_expert.aim_error = 0.005;
  c.demo_expert.close_lead = 0.2;
  return c;
}

void PipelineConfig::validate() const {
  if (warmup_demos < 1 || episodes_per_round < 1 || eval_episodes < 1 || max_attempts < episodes_per_round)
    throw std::invalid_argument("pipeline counts must be >= 1 and max_attempts >= episodes_per_round");
  if (!(rollout_noise >= 0.0)) throw std::invalid_argument("rollout_noise must be >= 0");
  if (policy.horizon != scheduler.horizon) throw std::invalid_argument("policy and scheduler horizons differ");
  policy.validate();
  weighting.validate();
  for (const policy::FmHyper* h : {&warmup_hyper, &update_hyper})
    if (h->steps < 1 || h->batch_size < 1 || !(h->learning_rate > 0.0))
      throw std::invalid_argument("training hyperparameters must be positive");
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json w = {{"p_intervention", weighting.p_intervention}};
  if (weighting.target) w["target"] = *weighting.target;
  return {{"task", policy::task_name(task)},
          {"seed", seed},
          {"warmup_demos", warmup_demos},
          {"episodes_per_round", episodes_per_round},
          {"eval_episodes", eval_episodes},
          {"max_attempts", max_attempts},
          {"weighted", weighted},
          {"rollout_noise", rollout_noise},
          {"weighting", w},
          {"policy", policy},
          {"warmup_hyper", warmup_hyper},
          {"update_hyper", update_hyper},
          {"demo_expert", demo_expert},
          {"intervenor", intervenor},
          {"scheduler",
           {{"horizon", scheduler.horizon},
            {"stale_limit", scheduler.stale_limit},
            {"max_hand_ticks", scheduler.max_hand_ticks}}}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  const policy::TaskId task = policy::task_from_name(j.value("task", std::string("tissue")));
  PipelineConfig c = defaults(task);
  check_keys(j, c.to_json(), "pipeline");
  try {
    c.seed = j.value("seed", c.seed);
    c.warmup_demos = j.value("warmup_demos", c.warmup_demos);
    c.episodes_per_round = j.value("episodes_per_round", c.episodes_per_round);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    c.weighted = j.value("weighted", c.weighted);
    c.rollout_noise = j.value("rollout_noise", c.rollout_noise);
    if (j.contains("weighting")) {
      const auto& w = j["weighting"];
      c.weighting.p_intervention = w.value("p_intervention", c.weighting.p_intervention);
      if (w.contains("target")) c.weighting.target = w["target"].get<std::array<double, kCategoryCount>>();
    }
    if (j.contains("policy")) c.policy = j["policy"].get<policy::PolicyConfig>();
    if (j.contains("warmup_hyper")) c.warmup_hyper = j["warmup_hyper"].get<policy::FmHyper>();
    if (j.contains("update_hyper")) c.update_hyper = j["update_hyper"].get<policy::FmHyper>();
    // defaults for missing fields come from the task defaults, not the struct
    if (j.contains("demo_expert")) {
      nlohmann::json merged = c.demo_expert;
      merged.update(j["demo_expert"]);
      c.demo_expert = merged.get<sim::ExpertConfig>();
    }
    if (j.contains("intervenor")) c.intervenor = j["intervenor"].get<sim::ExpertConfig>();
    if (j.contains("scheduler")) {
      const auto& s = j["scheduler"];
      c.scheduler.horizon = s.value("horizon", c.scheduler.horizon);
      c.scheduler.stale_limit = s.value("stale_limit", c.scheduler.stale_limit);
      c.scheduler.max_hand_ticks = s.value("max_hand_ticks", c.scheduler.max_hand_ticks);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("pipeline config: ") + ex.what());
  }
  c.validate();
  return c;
}

nlohmann::json RoundMetrics::to_json(bool with_loss) const {
  nlohmann::json j = {{"round", round},
                      {"successes", successes},
                      {"eval_episodes", eval_episodes},
                      {"success_rate", success_rate()},
                      {"collected", collected},
                      {"attempts", attempts},
                      {"partial", partial},
                      {"uniform_fallback", uniform_fallback},
                      {"interventions", interventions},
                      {"intervention_ticks", intervention_ticks},
                      {"counts", {{"offline", counts[0]}, {"autonomous", counts[1]}, {"intervention", counts[2]}}},
                      {"weights", {{"offline", weights[0]}, {"autonomous", weights[1]}, {"intervention", weights[2]}}},
                      {"dataset_records", dataset_records},
                      {"loss_head10", train.head_mean(10)},
                      {"loss_plateau", train.plateau_mean()}};
  if (with_loss) j["loss"] = train.loss;
  return j;
}

Pipeline::Pipeline(PipelineConfig cfg, geometry::ArmModel arm, geometry::HandModel hand, retarget::RetargetNet net)
    : cfg_(std::move(cfg)),
      arm_(std::move(arm)),
      hand_(std::move(hand)),
      net_(std::move(net)),
      env_(sim::TaskSpec::for_task(cfg_.task), arm_, hand_) {
  cfg_.validate();
  cfg_.scheduler.max_hand_ticks = std::min(cfg_.scheduler.max_hand_ticks, env_.spec().tick_limit);
}

std::uint64_t Pipeline::spawn_seed(int stream, long k) const {
  return cfg_.seed * 1000003ULL + static_cast<std::uint64_t>(stream) * 10007ULL + static_cast<std::uint64_t>(k);
}

Eigen::VectorXd Pipeline::joint_lower() const {
  Eigen::VectorXd v(teleop::kArmDof + teleop::kHandDof);
  for (int j = 0; j < teleop::kArmDof; ++j) v[j] = arm_.chain.joints[j].limits.lower;
  for (int k = 0; k < teleop::kHandDof; ++k) v[teleop::kArmDof + k] = hand_.actuated_limits(k).lower;
  return v;
}

Eigen::VectorXd Pipeline::joint_upper() const {
  Eigen::VectorXd v(teleop::kArmDof + teleop::kHandDof);
  for (int j = 0; j < teleop::kArmDof; ++j) v[j] = arm_.chain.joints[j].limits.upper;
  for (int k = 0; k < teleop::kHandDof; ++k) v[teleop::kArmDof + k] = hand_.actuated_limits(k).upper;
  return v;
}

namespace {

class Idle : public teleop::PolicySource {
 public:
  std::optional<Eigen::VectorXd> infer(const Eigen::VectorXd&) override { return std::nullopt; }
};

}  // namespace

Dataset Pipeline::collect_demos(int count, int stream) {
  Dataset d;
  long k = 0;
  const long budget = 4L * count + 10;
  while (static_cast<int>(d.episodes.size()) < count && k < budget) {
    const std::uint64_t s = spawn_seed(stream, k++);
    env_.reset(s);
    sim::ScriptedExpert expert(env_, &net_, cfg_.demo_expert, s, true, cfg_.scheduler.robot_cube);
    Idle idle;
    const auto log = teleop::run_scheduler(env_, idle, &expert, arm_, &net_, cfg_.scheduler);
    if (log.outcome != teleop::Outcome::success) continue;
    d.episodes.push_back(
        episode_from_log(log, (stream == kDemoStream ? "demo_" : "demo" + std::to_string(stream) + "_") +
                                             std::to_string(d.episodes.size()),
                         cfg_.task, 0, true, s));
  }
  if (static_cast<int>(d.episodes.size()) < count)
    throw std::runtime_error("scripted demonstrations failed too often");
  return d;
}

policy::FmPolicy Pipeline::warmup(const Dataset& d0, TrainLog* log) const {
  policy::FmHyper h = cfg_.warmup_hyper;
  h.seed = cfg_.seed * 7919ULL + h.seed;
  return warmup_train(d0, cfg_.policy, h, joint_lower(), joint_upper(), cfg_.seed, log);
}

int Pipeline::evaluate(const policy::FmPolicy& p, int episodes, std::uint64_t salt) {
  int ok = 0;
  for (int k = 0; k < episodes; ++k) {
    const std::uint64_t s = eval_seed(k, salt);
    env_.reset(s);
    FmPolicySource src(p, s ^ 0x5eedULL, cfg_.rollout_noise);
    const auto log = teleop::run_scheduler(env_, src, nullptr, arm_, &net_, cfg_.scheduler);
    ok += log.outcome == teleop::Outcome::success;
  }
  return ok;
}

Episode Pipeline::rollout(const policy::FmPolicy& p, int round, int attempt, teleop::EpisodeLog* out) {
  const std::uint64_t s = rollout_seed(round, attempt);
  env_.reset(s);
  FmPolicySource src(p, s ^ 0x5eedULL, cfg_.rollout_noise);
  sim::ScriptedExpert expert(env_, &net_, cfg_.intervenor, s, false, cfg_.scheduler.robot_cube);
  auto log = teleop::run_scheduler(env_, src, &expert, arm_, &net_, cfg_.scheduler);
  Episode e = episode_from_log(log, "r" + std::to_string(round) + "_a" + std::to_string(attempt), cfg_.task,
                               round, false, s);
  if (out) *out = std::move(log);
  return e;
}

std::vector<double> Pipeline::weights_for(const Dataset& d, bool* fallback) const {
  if (fallback) *fallback = false;
  if (!cfg_.weighted) return {};
  const CategoryCounts n = d.counts();
  try {
    const auto w = compute_weights(n, cfg_.weighting);
    return {w.begin(), w.end()};
  } catch (const WeightingError&) {
    // Only the missing-intervention case is recoverable: train unweighted.
    if (n[static_cast<int>(Category::intervention)] != 0) throw;
    if (fallback) *fallback = true;
    return {};
  }
}

RoundState Pipeline::run_round(int round, const policy::FmPolicy& previous, const Dataset& data,
                               const RolloutFn& rollout_fn) {
  if (round < 1) throw std::invalid_argument("rounds are numbered from 1");
  RoundState st;
  st.round = round;
  RoundMetrics& m = st.metrics;
  m.round = round;
  m.eval_episodes = cfg_.eval_episodes;
  m.successes = evaluate(previous, cfg_.eval_episodes);

  for (int a = 0; a < cfg_.max_attempts && m.collected < cfg_.episodes_per_round; ++a) {
    teleop::EpisodeLog log;
    const Episode e = rollout_fn ? rollout_fn(round, a) : rollout(previous, round, a, &log);
    ++m.attempts;
    const Episode kept = filter_episode(e);
    if (kept.records.empty()) continue;
    m.interventions += static_cast<long>(e.intervention_windows().size());
    for (const TrajectoryRecord& r : e.records) m.intervention_ticks += r.intervention;
    st.fresh.episodes.push_back(kept);
    ++m.collected;
  }
  m.partial = m.collected < cfg_.episodes_per_round;
  st.data = Dataset::aggregate(data, st.fresh);
  m.counts = st.data.counts();
  m.dataset_records = st.data.record_count();

  const std::vector<double> w = weights_for(st.data, &m.uniform_fallback);
  for (int c = 0; c < kCategoryCount; ++c) m.weights[c] = w.empty() ? 1.0 : w[c];
  policy::FmHyper h = cfg_.update_hyper;
  h.seed = cfg_.seed * 7919ULL + 104729ULL * static_cast<std::uint64_t>(round) + h.seed;
  st.policy = weighted_update(previous, st.data, w, h, &m.train);
  return st;
}

}  // namespace dexhil::hil
