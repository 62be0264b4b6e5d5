#pragma once

#include <functional>
#include <memory>
#include <string>

#include "dexhil/hil/pipeline.hpp"
#include "dexhil/service/bridge.hpp"
#include "dexhil/service/bridge_server.hpp"

namespace dexhil::service {

/// A bridge server plus the operator it feeds, reused across episodes.
class HumanSession {
 public:
  HumanSession(int port, policy::TaskId task, std::string policy_ref, const geometry::HandModel& hand);

  BridgeServer& server() { return *server_; }
  BridgeHuman& human() { return human_; }
  const BridgeSession& session() const { return session_; }

  /// One wall-clock episode of `p` with the operator able to take over.
  /// State frames go out at 20 Hz and right after every mode change.
  /// `inspect` runs under the scheduler lock after each hand tick.
  hil::Episode run_episode(hil::Pipeline& pipe, const policy::FmPolicy& p, int round, int attempt,
                           const std::function<bool()>& stop = {},
                           const std::function<void(const teleop::Scheduler&)>& inspect = {},
                           double time_scale = 1.0);

 private:
  BridgeHuman human_;
  BridgeSession session_;
  std::mutex session_mutex_;
  policy::TaskId task_;
  std::string policy_ref_;
  int episodes_ = 0;
  std::unique_ptr<BridgeServer> server_;
};

}  // namespace dexhil::service
