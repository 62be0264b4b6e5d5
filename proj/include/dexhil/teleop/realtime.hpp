#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "dexhil/teleop/scheduler.hpp"

namespace dexhil::teleop {

/// Wall-clock mode: policy, arm and hand loops on their own threads. Every
/// scheduler mutation happens under one mutex; policy inference itself runs
/// outside it on an observation snapshot.
class RealtimeRunner {
 public:
  /// `on_hand_tick` runs under the lock after every hand tick.
  RealtimeRunner(Scheduler& scheduler, std::function<void(const Scheduler&)> on_hand_tick = {},
                 double time_scale = 1.0);
  ~RealtimeRunner();
  RealtimeRunner(const RealtimeRunner&) = delete;
  RealtimeRunner& operator=(const RealtimeRunner&) = delete;

  void start();
  void stop();
  bool running() const { return running_; }
  /// Blocks until the episode ends or stop() is called.
  void wait();

  /// Runs `f` with the scheduler locked.
  void with_lock(const std::function<void(Scheduler&)>& f);

 private:
  void loop(int period, int which);

  Scheduler& scheduler_;
  std::function<void(const Scheduler&)> on_hand_tick_;
  double time_scale_;
  std::mutex mutex_;
  std::atomic<bool> running_{false};
  std::thread threads_[3];
};

}  // namespace dexhil::teleop
