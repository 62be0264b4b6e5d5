#include "dexhil/service/commands.hpp"

#include <fstream>
#include <sstream>

#include "dexhil/geometry/arm_model.hpp"
#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/hil/pipeline.hpp"
#include "dexhil/nn/checkpoint.hpp"
#include "dexhil/retarget/human_hand.hpp"
#include "dexhil/service/session.hpp"

namespace dexhil::service {

namespace fs = std::filesystem;

namespace {

constexpr int kHoldoutDemos = 10;
constexpr std::uint64_t kLossSeed = 0x401d;

struct Models {
  geometry::ArmModel arm = geometry::default_desk_arm();
  geometry::HandModel hand = geometry::default_desk_hand();
};

const Models& models() {
  static const Models m;
  return m;
}

hil::Pipeline make_pipeline(const CommandContext& c, policy::TaskId task, std::uint64_t seed,
                            const retarget::RetargetNet& net) {
  return hil::Pipeline(c.config.pipeline_for(task, seed), models().arm, models().hand, net);
}

std::string tag_line(policy::TaskId task, std::uint64_t seed) {
  return std::string(policy::task_name(task)) + " seed " + std::to_string(seed);
}

policy::FmPolicy load_policy(const CommandContext& c, const std::string& ref, policy::TaskId task,
                             std::uint64_t seed) {
  const fs::path dir = c.paths.policy_dir(ref, task, seed);
  const std::string producer = ref == "warmup" ? "warmup" : "round --i " + ref.substr(6);
  require_artifact(dir, producer);
  verify_manifest(dir);
  return policy::from_checkpoint(nn::load_checkpoint(dir / "policy.json"));
}

nlohmann::json train_metrics(const hil::TrainLog& log) {
  return {{"steps", log.loss.size()}, {"loss_head10", log.head_mean(10)}, {"loss_plateau", log.plateau_mean()}};
}

/// D^{i} as stored: demos followed by the fresh data of rounds 1..i.
hil::Dataset stored_dataset(const CommandContext& c, int upto, policy::TaskId task, std::uint64_t seed) {
  hil::Dataset d = hil::read_dataset(c.paths.demos(task, seed) / "data");
  for (int k = 1; k <= upto; ++k)
    d = hil::Dataset::aggregate(d, hil::read_dataset(c.paths.round(k, task, seed) / "data"));
  return d;
}

}  // namespace

CommandContext::CommandContext(RunConfig cfg, const fs::path& runs_dir, std::ostream* o)
    : config(std::move(cfg)), out(o) {
  config.validate();
  paths.root = runs_dir / config.name;
  config_hash = config.hash();
  const fs::path snap = paths.config();
  if (fs::exists(snap)) {
    const RunConfig stored = RunConfig::from_json(read_json(snap));
    if (stored.hash() != config_hash)
      throw ConfigError(paths.root.string() + " was created with a different config; pick another name");
  } else {
    write_json(snap, config.to_json());
  }
}

void CommandContext::say(const std::string& line) const {
  if (out) *out << line << std::endl;
}

void cmd_train_retarget(const CommandContext& c, int stage) {
  if (stage < 0 || stage > 2) throw std::invalid_argument("--stage must be 1 or 2");
  const auto& rc = c.config.retarget;
  const fs::path dir = c.paths.retarget();
  fs::create_directories(dir);
  const auto data = retarget::synth_human_dataset(rc.dataset_seed, static_cast<std::size_t>(rc.dataset_size));
  retarget::TrainHyper h;
  h.seed = rc.init_seed;
  nlohmann::json report = fs::exists(dir / "report.json") ? read_json(dir / "report.json") : nlohmann::json::object();

  if (stage != 2) {
    retarget::RetargetNet net = retarget::make_retarget_net(models().hand, rc.init_seed);
    h.steps = rc.stage1_steps;
    const auto r = retarget::train_stage1(net, models().hand, data, {}, h);
    nn::save_checkpoint(dir / "stage1.json", retarget::to_checkpoint(net));
    report["stage1_final_loss"] = r.final_loss();
    fs::remove(dir / "retarget.json");
    report.erase("stage2_final_loss");
    c.say("retarget stage 1: final loss " + std::to_string(r.final_loss()));
  }
  if (stage != 1) {
    if (!fs::exists(dir / "stage1.json")) throw PrerequisiteError("missing stage 1; run `train-retarget --stage 1` first");
    retarget::RetargetNet net = retarget::from_checkpoint(nn::load_checkpoint(dir / "stage1.json"));
    h.steps = rc.stage2_steps;
    const auto r = retarget::train_stage2(net, models().hand, data, {}, h);
    nn::save_checkpoint(dir / "retarget.json", retarget::to_checkpoint(net));
    report["stage2_final_loss"] = r.final_loss();
    c.say("retarget stage 2: final loss " + std::to_string(r.final_loss()));
  }
  write_json(dir / "report.json", report);
  write_manifest(dir, c.config_hash, "train-retarget");
}

retarget::RetargetNet load_retarget(const CommandContext& c) {
  const fs::path dir = c.paths.retarget();
  if (!fs::exists(dir / "retarget.json"))
    throw PrerequisiteError("missing " + (dir / "retarget.json").string() + "; run `train-retarget` first");
  verify_manifest(dir);
  return retarget::from_checkpoint(nn::load_checkpoint(dir / "retarget.json"));
}

void cmd_collect_demos(const CommandContext& c) {
  const auto net = load_retarget(c);
  for (auto task : c.config.tasks) {
    for (auto seed : c.config.seeds) {
      hil::Pipeline pipe = make_pipeline(c, task, seed, net);
      const hil::Dataset d = pipe.collect_demos(c.config.pipeline.warmup_demos);
      const fs::path dir = c.paths.demos(task, seed);
      fs::remove_all(dir);
      hil::write_dataset(dir / "data", d);
      write_manifest(dir, c.config_hash, "collect-demos",
                     {{"task", policy::task_name(task)}, {"seed", seed}, {"episodes", d.episodes.size()},
                      {"records", d.record_count()}});
      c.say(tag_line(task, seed) + ": " + std::to_string(d.episodes.size()) + " demos, " +
            std::to_string(d.record_count()) + " records");
    }
  }
}

void cmd_warmup(const CommandContext& c) {
  const auto net = load_retarget(c);
  for (auto task : c.config.tasks) {
    for (auto seed : c.config.seeds) {
      const fs::path demos = c.paths.demos(task, seed);
      require_artifact(demos, "collect-demos");
      verify_manifest(demos);
      hil::Pipeline pipe = make_pipeline(c, task, seed, net);
      hil::TrainLog log;
      const hil::Dataset d0 = hil::read_dataset(demos / "data");
      const policy::FmPolicy pi0 = pipe.warmup(d0, &log);
      const int k = pipe.evaluate(pi0, c.config.pipeline.eval_episodes);
      // fresh demonstrations the policy never saw, scored with the same draws
      const hil::Dataset holdout = pipe.collect_demos(kHoldoutDemos, hil::kHoldoutStream);
      const double heldout = hil::dataset_fm_loss(pi0, holdout, kLossSeed);
      const double train = hil::dataset_fm_loss(pi0, d0, kLossSeed);

      const fs::path dir = c.paths.warmup(task, seed);
      fs::remove_all(dir);
      fs::create_directories(dir);
      nn::save_checkpoint(dir / "policy.json", policy::to_checkpoint(pi0));
      nlohmann::json m = {{"round", 0},
                          {"policy_successes", k},
                          {"eval_episodes", c.config.pipeline.eval_episodes},
                          {"train", train_metrics(log)},
                          {"train_fm_loss", train},
                          {"heldout_fm_loss", heldout},
                          {"heldout_demos", kHoldoutDemos}};
      write_json(dir / "metrics.json", m);
      write_json(dir / "loss.json", log.loss);
      write_manifest(dir, c.config_hash, "warmup", {{"task", policy::task_name(task)}, {"seed", seed}});
      c.say(tag_line(task, seed) + ": warmup " + std::to_string(k) + "/" +
            std::to_string(c.config.pipeline.eval_episodes) + ", held-out loss " + std::to_string(heldout));
    }
  }
}

void cmd_round(const CommandContext& c, int i, int port, const std::function<bool()>& stop) {
  if (i < 1) throw std::invalid_argument("--i must be >= 1");
  if (i > c.config.rounds)
    throw ConfigError("round " + std::to_string(i) + " exceeds the configured " + std::to_string(c.config.rounds));
  const auto net = load_retarget(c);
  const std::string prev_ref = i == 1 ? "warmup" : "round_" + std::to_string(i - 1);
  // Check every prerequisite before spending time on any task.
  for (auto task : c.config.tasks)
    for (auto seed : c.config.seeds) {
      require_artifact(c.paths.demos(task, seed), "collect-demos");
      for (int k = 1; k < i; ++k) require_artifact(c.paths.round(k, task, seed), "round --i " + std::to_string(k));
      load_policy(c, prev_ref, task, seed);
    }

  std::unique_ptr<HumanSession> human;
  for (auto task : c.config.tasks) {
    for (auto seed : c.config.seeds) {
      hil::Pipeline pipe = make_pipeline(c, task, seed, net);
      const policy::FmPolicy prev = load_policy(c, prev_ref, task, seed);
      const hil::Dataset data = stored_dataset(c, i - 1, task, seed);

      hil::Pipeline::RolloutFn rollout;
      if (c.config.mode == RunMode::human) {
        human = std::make_unique<HumanSession>(port, task, prev_ref, models().hand);
        c.say("bridge listening on port " + std::to_string(human->server().port()));
        rollout = [&](int round, int attempt) { return human->run_episode(pipe, prev, round, attempt, stop); };
      }
      hil::RoundState st = pipe.run_round(i, prev, data, rollout);
      human.reset();
      const int k = pipe.evaluate(st.policy, c.config.pipeline.eval_episodes);

      const fs::path dir = c.paths.round(i, task, seed);
      fs::remove_all(dir);
      fs::create_directories(dir);
      nn::save_checkpoint(dir / "policy.json", policy::to_checkpoint(st.policy));
      hil::write_dataset(dir / "data", st.fresh);
      nlohmann::json m = st.metrics.to_json(false);
      // successes in the round metrics belong to pi_{i-1}
      m["previous_successes"] = m["successes"];
      m.erase("successes");
      m.erase("success_rate");
      m["policy_successes"] = k;
      m["train_steps"] = st.metrics.train.loss.size();
      write_json(dir / "metrics.json", m);
      write_json(dir / "loss.json", st.metrics.train.loss);
      write_manifest(dir, c.config_hash, "round --i " + std::to_string(i),
                     {{"task", policy::task_name(task)}, {"seed", seed}, {"mode", run_mode_name(c.config.mode)}});
      c.say(tag_line(task, seed) + ": round " + std::to_string(i) + " collected " +
            std::to_string(st.metrics.collected) + "/" + std::to_string(st.metrics.attempts) + " attempts, pi_" +
            std::to_string(i) + " " + std::to_string(k) + "/" + std::to_string(c.config.pipeline.eval_episodes) +
            (st.metrics.partial ? " (partial round)" : ""));
    }
  }
}

std::vector<EvalResult> cmd_eval(const CommandContext& c, const std::string& policy_ref, int episodes) {
  if (episodes < 1) throw std::invalid_argument("--episodes must be >= 1");
  const auto net = load_retarget(c);
  std::vector<EvalResult> results;
  for (auto task : c.config.tasks)
    for (auto seed : c.config.seeds) load_policy(c, policy_ref, task, seed);
  for (auto task : c.config.tasks) {
    for (auto seed : c.config.seeds) {
      hil::Pipeline pipe = make_pipeline(c, task, seed, net);
      const int k = pipe.evaluate(load_policy(c, policy_ref, task, seed), episodes);
      results.push_back({task, seed, k, episodes});
      const fs::path dir = c.paths.root / "eval" / policy_ref / RunPaths::tag(task, seed);
      fs::remove_all(dir);
      write_json(dir / "result.json", {{"policy", policy_ref},
                                       {"task", policy::task_name(task)},
                                       {"seed", seed},
                                       {"successes", k},
                                       {"episodes", episodes}});
      write_manifest(dir, c.config_hash, "eval --policy " + policy_ref);
      c.say(tag_line(task, seed) + ": " + std::to_string(k) + "/" + std::to_string(episodes));
    }
  }
  return results;
}

fs::path cmd_replay(const CommandContext& c, const std::string& policy_ref, policy::TaskId task,
                    std::uint64_t seed, int episode, fs::path out) {
  if (episode < 0) throw std::invalid_argument("--episode must be >= 0");
  const auto net = load_retarget(c);
  const policy::FmPolicy pol = load_policy(c, policy_ref, task, seed);
  hil::Pipeline pipe = make_pipeline(c, task, seed, net);
  // Same spawn and sampling seed as evaluation episode `episode`.
  const std::uint64_t s = pipe.eval_seed(episode);
  pipe.env().reset(s);
  hil::FmPolicySource src(pol, s ^ 0x5eedULL, pipe.config().rollout_noise);
  teleop::Scheduler sched(pipe.env(), src, nullptr, pipe.arm(), &pipe.retarget(), pipe.config().scheduler);
  std::vector<nlohmann::json> states;
  while (!sched.finished()) {
    const long before = sched.log().hand_ticks;
    sched.advance();
    if (sched.log().hand_ticks != before) states.push_back(sim::state_to_json(pipe.env().state()));
  }
  const teleop::EpisodeLog log = sched.take_log();
  const hil::Episode e = hil::episode_from_log(log, "eval_" + std::to_string(episode), task, 0, false, s);

  if (out.empty())
    out = c.paths.root / "replay" / policy_ref / (RunPaths::tag(task, seed) + "_ep" + std::to_string(episode) + ".jsonl");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw ArtifactError("cannot write " + out.string());
  f << nlohmann::json{{"type", "header"},
                      {"policy", policy_ref},
                      {"task", policy::task_name(task)},
                      {"seed", seed},
                      {"episode", episode},
                      {"spawn_seed", s},
                      {"config_hash", c.config_hash},
                      {"spec", pipe.env().spec().to_json()}}
           .dump()
    << '\n';
  for (std::size_t k = 0; k < e.records.size(); ++k)
    f << nlohmann::json{{"type", "tick"}, {"record", hil::record_to_json(e.records[k])}, {"state", states.at(k)}}.dump()
      << '\n';
  f << nlohmann::json{{"type", "end"}, {"outcome", teleop::outcome_name(log.outcome)}, {"ticks", e.records.size()}}
           .dump()
    << '\n';
  c.say(tag_line(task, seed) + ": episode " + std::to_string(episode) + " " + teleop::outcome_name(log.outcome) +
        ", " + std::to_string(e.records.size()) + " ticks -> " + out.string());
  return out;
}

void cmd_serve_ui(const CommandContext& c, const std::string& policy_ref, policy::TaskId task, std::uint64_t seed,
                  int port, int episodes, const std::function<bool()>& stop) {
  if (c.config.mode != RunMode::human) throw ConfigError("serve-ui needs mode \"human\" in the config");
  if (episodes < 1) throw std::invalid_argument("--episodes must be >= 1");
  const auto net = load_retarget(c);
  const policy::FmPolicy pol = load_policy(c, policy_ref, task, seed);
  hil::Pipeline pipe = make_pipeline(c, task, seed, net);
  HumanSession session(port, task, policy_ref, models().hand);
  c.say("bridge listening on port " + std::to_string(session.server().port()));

  hil::Dataset d;
  for (int k = 0; k < episodes && !(stop && stop()); ++k) {
    hil::Episode e = session.run_episode(pipe, pol, 0, k, stop);
    c.say("episode " + std::to_string(k) + ": " + teleop::outcome_name(e.outcome) + ", " +
          std::to_string(e.intervention_windows().size()) + " interventions");
    d.episodes.push_back(std::move(e));
  }
  const fs::path dir = c.paths.root / "ui" / policy_ref / RunPaths::tag(task, seed);
  fs::remove_all(dir);
  hil::write_dataset(dir / "data", d);
  write_manifest(dir, c.config_hash, "serve-ui --policy " + policy_ref);
}

}  // namespace dexhil::service
