#include "dexhil/teleop/realtime.hpp"

#include <chrono>

namespace dexhil::teleop {

RealtimeRunner::RealtimeRunner(Scheduler& scheduler, std::function<void(const Scheduler&)> on_hand_tick,
                               double time_scale)
    : scheduler_(scheduler), on_hand_tick_(std::move(on_hand_tick)), time_scale_(time_scale) {}

RealtimeRunner::~RealtimeRunner() { stop(); }

void RealtimeRunner::start() {
  if (running_.exchange(true)) return;
  threads_[0] = std::thread(&RealtimeRunner::loop, this, kPolicyPeriod, 0);
  threads_[1] = std::thread(&RealtimeRunner::loop, this, kArmPeriod, 1);
  threads_[2] = std::thread(&RealtimeRunner::loop, this, kHandPeriod, 2);
}

void RealtimeRunner::stop() {
  running_ = false;
  wait();
}

void RealtimeRunner::wait() {
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
}

void RealtimeRunner::with_lock(const std::function<void(Scheduler&)>& f) {
  std::lock_guard<std::mutex> lock(mutex_);
  f(scheduler_);
}

void RealtimeRunner::loop(int period, int which) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto unit = std::chrono::duration<double>(1.0 / (kClockHz * time_scale_));
  for (long u = 0; running_; u += period) {
    std::this_thread::sleep_until(t0 + std::chrono::duration_cast<clock::duration>(unit * u));
    if (!running_) break;
    if (which == 0) {
      Eigen::VectorXd obs;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        if (scheduler_.finished()) break;
        obs = scheduler_.policy_observation();
      }
      auto chunk = scheduler_.policy().infer(obs);
      std::lock_guard<std::mutex> lock(mutex_);
      scheduler_.install_chunk(u, std::move(chunk));
    } else {
      std::lock_guard<std::mutex> lock(mutex_);
      if (scheduler_.finished()) break;
      if (which == 1) {
        scheduler_.arm_tick(u);
      } else {
        scheduler_.intervention_events(u);
        scheduler_.hand_tick(u);
        if (on_hand_tick_) on_hand_tick_(scheduler_);
      }
    }
  }
  if (which == 2) running_ = false;
}

}  // namespace dexhil::teleop
