#include "dexhil/service/session.hpp"

#include <chrono>
#include <thread>

#include "dexhil/teleop/realtime.hpp"

namespace dexhil::service {

HumanSession::HumanSession(int port, policy::TaskId task, std::string policy_ref, const geometry::HandModel& hand)
    : human_(hand), session_(human_), task_(task), policy_ref_(std::move(policy_ref)) {
  server_ = std::make_unique<BridgeServer>(
      port,
      [this](const std::string& line) {
        std::lock_guard<std::mutex> lock(session_mutex_);
        return session_.handle_line(line);
      },
      [this] { server_->send(welcome_frame(task_, policy_ref_)); });
}

hil::Episode HumanSession::run_episode(hil::Pipeline& pipe, const policy::FmPolicy& p, int round, int attempt,
                                       const std::function<bool()>& stop,
                                       const std::function<void(const teleop::Scheduler&)>& inspect,
                                       double time_scale) {
  const std::uint64_t seed = pipe.rollout_seed(round, attempt);
  pipe.env().reset(seed);
  human_.reset_episode();
  hil::FmPolicySource src(p, seed ^ 0x5eedULL, pipe.config().rollout_noise);
  teleop::Scheduler sched(pipe.env(), src, &human_, pipe.arm(), &pipe.retarget(), pipe.config().scheduler);

  const int index = episodes_++;
  long seq = 0;
  long last_slot = -1;
  int last_flag = 0;
  sim::SimEnv& env = pipe.env();
  teleop::RealtimeRunner runner(
      sched,
      [&](const teleop::Scheduler& s) {
        if (inspect) inspect(s);
        // A toggle that arrived after this tick's mode check shows up next tick.
        if (!human_.toggles_applied()) return;
        const long slot = s.log().hand_ticks * teleop::kHandPeriod / 9;
        const int flag = s.intervention().flag();
        if (slot == last_slot && flag == last_flag && !s.finished()) return;
        last_slot = slot;
        last_flag = flag;
        server_->send(state_frame(seq++, index, s, env.state()));
      },
      time_scale);
  runner.start();
  while (runner.running()) {
    if (stop && stop()) {
      runner.stop();
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  runner.wait();
  teleop::EpisodeLog log = sched.take_log();
  hil::Episode e = hil::episode_from_log(log, "r" + std::to_string(round) + "_h" + std::to_string(attempt), task_,
                                         round, false, seed);
  server_->send(episode_end_frame(index, log.outcome, static_cast<long>(e.intervention_windows().size())));
  return e;
}

}  // namespace dexhil::service
