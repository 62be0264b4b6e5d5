#include "dexhil/teleop/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dexhil::teleop {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::running: return "running";
    case Outcome::success: return "success";
    case Outcome::failure: return "failure";
  }
  return "?";
}

ControlCommand chunk_command(const Eigen::VectorXd& chunk, int horizon, double position) {
  const int A = kArmDof + kHandDof;
  if (horizon < 1 || chunk.size() != static_cast<Eigen::Index>(horizon) * A) {
    throw std::invalid_argument("chunk_command: chunk size does not match the horizon");
  }
  position = std::clamp(position, 0.0, static_cast<double>(horizon - 1));
  const int k0 = static_cast<int>(std::floor(position));
  const int k1 = std::min(k0 + 1, horizon - 1);
  const double a = position - k0;
  ControlCommand c;
  c.source = CommandSource::policy;
  c.arm = (1.0 - a) * chunk.segment(k0 * A, kArmDof) + a * chunk.segment(k1 * A, kArmDof);
  c.hand = chunk.segment(k0 * A + kArmDof, kHandDof);
  return c;
}

Scheduler::Scheduler(ControlledEnv& env, PolicySource& policy, HumanSource* human, const geometry::ArmModel& arm,
                     const retarget::RetargetNet* retarget, SchedulerConfig cfg)
    : env_(env), policy_(policy), human_(human), arm_(arm), retarget_(retarget), cfg_(std::move(cfg)) {
  if (cfg_.horizon < 1 || cfg_.stale_limit < 0) throw std::invalid_argument("scheduler: bad config");
  policy_cmd_ = {env_.q_arm(), env_.hand(), CommandSource::policy};
  human_cmd_ = {env_.q_arm(), env_.hand(), CommandSource::human};
}

void Scheduler::set_mode(bool control, long unit) {
  const double t = unit_time(unit);
  if (control == (state_.flag() == 1)) return;
  if (control) {
    if (human_ == nullptr) throw ProtocolError("takeover requested without a human source");
    const std::optional<MarkerFrame> m = human_->marker(t);
    if (!m) throw ProtocolError("takeover requested before any marker frame arrived");
    const geometry::Pose ee = env_.ee_pose();
    state_.trigger(t, ee, *m, cfg_.robot_cube);
    human_cmd_ = {env_.q_arm(), env_.hand(), CommandSource::human};
    log_.takeover_actual.push_back(ee);
    log_.takeover_mapped.push_back(map_marker_to_ee(*state_.anchor(), m->pose));
  } else {
    state_.release(t);
  }
  log_.transitions = state_.transitions();
}

void Scheduler::intervention_events(long unit) {
  if (toggle_requested_) {
    toggle_requested_ = false;
    set_mode(state_.flag() == 0, unit);
  }
  if (human_ != nullptr) {
    if (const std::optional<bool> want = human_->wants_control(unit_time(unit))) set_mode(*want, unit);
  }
}

void Scheduler::install_chunk(long unit, std::optional<Eigen::VectorXd> chunk) {
  if (!chunk) return;
  if (chunk->size() != static_cast<Eigen::Index>(cfg_.horizon) * (kArmDof + kHandDof)) {
    throw std::invalid_argument("scheduler: policy chunk has the wrong size");
  }
  ++log_.policy_inferences;
  if (state_.flag() == 1) ++log_.discarded_inferences;
  chunk_ = std::move(chunk);
  chunk_unit_ = unit;
  stale_ticks_ = 0;
}

void Scheduler::policy_tick(long unit) { install_chunk(unit, policy_.infer(env_.observe())); }

void Scheduler::arm_tick(long unit) {
  ++log_.arm_ticks;
  if (chunk_) {
    const double pos = static_cast<double>(unit - chunk_unit_) / kHandPeriod;
    policy_cmd_.arm = chunk_command(*chunk_, cfg_.horizon, pos).arm;
  }
  if (state_.flag() == 1) {
    const std::optional<MarkerFrame> m = human_->marker(unit_time(unit));
    if (m) {
      const geometry::Pose target = map_marker_to_ee(*state_.anchor(), m->pose);
      log_.human_ee_targets.push_back(target);
      try {
        human_cmd_.arm = geometry::ik_solve(arm_, target, human_cmd_.arm, cfg_.ik).q;
      } catch (const geometry::UnreachableTarget& e) {
        human_cmd_.arm = e.best_q;
      }
    }
  }
}

void Scheduler::hand_tick(long unit) {
  const long tick = log_.hand_ticks++;
  bool stale = false;
  if (chunk_) {
    const long steps = (unit - chunk_unit_) / kHandPeriod;
    if (steps >= cfg_.horizon) {
      ++stale_ticks_;
      stale = true;
      if (stale_ticks_ > cfg_.stale_limit) log_.stale_faults.push_back(tick);
    }
    policy_cmd_.hand = chunk_command(*chunk_, cfg_.horizon, static_cast<double>(steps)).hand;
  }
  if (state_.flag() == 1 && retarget_ != nullptr) {
    if (const auto s = human_->hand(unit_time(unit))) human_cmd_.hand = retarget::retarget(*retarget_, *s);
  }

  TickRecord r;
  r.tick = tick;
  r.time = unit_time(unit);
  r.obs = env_.observe();
  const ControlCommand& u = multiplex(state_, policy_cmd_, human_cmd_);
  r.arm = u.arm;
  r.hand = u.hand;
  r.source = u.source;
  r.intervention = state_.flag();
  r.stale = stale && r.intervention == 0;
  env_.step(u.arm, u.hand);
  log_.ticks.push_back(std::move(r));
  log_.outcome = env_.outcome();
  if ((cfg_.stop_on_outcome && log_.outcome != Outcome::running) || log_.hand_ticks >= cfg_.max_hand_ticks) {
    finished_ = true;
  }
}

bool Scheduler::advance() {
  if (finished_) return false;
  const long u = unit_;
  intervention_events(u);
  if (u % kPolicyPeriod == 0) policy_tick(u);
  if (u % kArmPeriod == 0) arm_tick(u);
  if (u % kHandPeriod == 0) hand_tick(u);
  ++unit_;
  return !finished_;
}

EpisodeLog Scheduler::take_log() {
  log_.transitions = state_.transitions();
  return std::move(log_);
}

EpisodeLog run_scheduler(ControlledEnv& env, PolicySource& policy, HumanSource* human, const geometry::ArmModel& arm,
                         const retarget::RetargetNet* retarget, const SchedulerConfig& cfg, long max_units) {
  Scheduler s(env, policy, human, arm, retarget, cfg);
  while (s.advance()) {
    if (max_units > 0 && s.unit() >= max_units) break;
  }
  return s.take_log();
}

}  // namespace dexhil::teleop
