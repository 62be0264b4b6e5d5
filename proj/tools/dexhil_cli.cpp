#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "dexhil/service/commands.hpp"

using namespace dexhil;

namespace {

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

enum Exit { ok = 0, failure = 1, config_error = 2, missing_prerequisite = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dexhil: desk-scale human-in-the-loop training runs"};
  app.require_subcommand(1);
  std::string config_path;
  std::string runs_dir = "runs";
  app.add_option("-c,--config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--runs", runs_dir, "directory holding runs/<name>/")->capture_default_str();

  auto* show = app.add_subcommand("config", "print the resolved config and its hash");

  int stage = 0;
  auto* retarget = app.add_subcommand("train-retarget", "train the hand retargeting nets");
  retarget->add_option("--stage", stage, "1 or 2 (default: both)")->check(CLI::Range(1, 2));

  auto* demos = app.add_subcommand("collect-demos", "scripted offline demonstrations per task and seed");
  auto* warmup = app.add_subcommand("warmup", "train pi_0 on the demonstrations");

  int round_i = 0;
  int port = 8765;
  auto* round = app.add_subcommand("round", "one online round: evaluate, collect, aggregate, update");
  round->add_option("--i", round_i, "round index, from 1")->required()->check(CLI::PositiveNumber);
  round->add_option("--port", port, "bridge port in human mode")->capture_default_str();

  std::string policy_ref;
  int episodes = 20;
  auto* eval = app.add_subcommand("eval", "success count of a stored policy");
  eval->add_option("--policy", policy_ref, "warmup or round_<i>")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes")->capture_default_str();

  std::string task_name;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int episode = 0;
  std::string out;
  auto* replay = app.add_subcommand("replay", "export one evaluation episode as JSONL");
  replay->add_option("--policy", policy_ref, "warmup or round_<i>")->required();
  replay->add_option("--task", task_name, "task (default: first in config)");
  replay->add_option("--seed", seed, "seed (default: first in config)")->each([&](const std::string&) {
    seed_given = true;
  });
  replay->add_option("--episode", episode, "evaluation episode index")->capture_default_str();
  replay->add_option("--out", out, "output file");

  int ui_episodes = 1;
  auto* serve = app.add_subcommand("serve-ui", "operator bridge (line-delimited JSON over TCP)");
  serve->add_option("--policy", policy_ref, "warmup or round_<i>")->required();
  serve->add_option("--task", task_name, "task (default: first in config)");
  serve->add_option("--seed", seed, "seed (default: first in config)")->each([&](const std::string&) {
    seed_given = true;
  });
  serve->add_option("--port", port, "listen port on 127.0.0.1")->capture_default_str();
  serve->add_option("--episodes", ui_episodes, "episodes to serve")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto stop = [] { return g_stop.load(); };

  try {
    service::RunConfig cfg = service::RunConfig::load(config_path);
    if (show->parsed()) {
      std::cout << cfg.to_json().dump(2) << "\nhash " << cfg.hash() << std::endl;
      return ok;
    }
    const policy::TaskId task = task_name.empty() ? cfg.tasks.front() : policy::task_from_name(task_name);
    if (!seed_given) seed = cfg.seeds.front();
    service::CommandContext ctx(cfg, runs_dir, &std::cout);

    if (retarget->parsed()) service::cmd_train_retarget(ctx, stage);
    if (demos->parsed()) service::cmd_collect_demos(ctx);
    if (warmup->parsed()) service::cmd_warmup(ctx);
    if (round->parsed()) service::cmd_round(ctx, round_i, port, stop);
    if (eval->parsed()) service::cmd_eval(ctx, policy_ref, episodes);
    if (replay->parsed()) service::cmd_replay(ctx, policy_ref, task, seed, episode, out);
    if (serve->parsed()) service::cmd_serve_ui(ctx, policy_ref, task, seed, port, ui_episodes, stop);
  } catch (const service::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return config_error;
  } catch (const service::PrerequisiteError& e) {
    std::cerr << "missing prerequisite: " << e.what() << std::endl;
    return missing_prerequisite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return failure;
  }
  return ok;
}
