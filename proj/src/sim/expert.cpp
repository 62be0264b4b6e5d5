#include "dexhil/sim/expert.hpp"

#include <algorithm>
#include <cmath>

namespace dexhil::sim {

namespace {

using Phase = ExpertPlanner::Phase;

const geometry::HandModel& robot_hand() {
  static const geometry::HandModel h = geometry::default_desk_hand();
  return h;
}

const retarget::HumanHandModel& human_hand() {
  static const retarget::HumanHandModel h = retarget::default_human_hand(robot_hand());
  return h;
}

const retarget::HumanPoseParams& grasp_params(TaskId task) {
  static const retarget::HumanPoseParams pinch = retarget::pinch_sample(geometry::FingerId::index).params;
  static const retarget::HumanPoseParams power = retarget::power_grasp_sample(0.9).params;
  return task == TaskId::tissue_extraction ? pinch : power;
}

double finger_mcp_mean(const Eigen::VectorXd& hand) { return hand.segment(geometry::kIndexMcp, 4).mean(); }

/// Closure-like scalar of the executed hand for the task, in [0, 1].
double hand_closure(const SimEnv& env) {
  const Eigen::VectorXd& h = env.state().hand;
  if (env.spec().task == TaskId::tissue_extraction) {
    return std::clamp(h[geometry::kIndexMcp] / std::max(1e-6, retarget::pinch_sample(geometry::FingerId::index).q_true[geometry::kIndexMcp]), 0.0, 1.0);
  }
  return std::clamp(finger_mcp_mean(h) / 1.8, 0.0, 1.0);
}

bool holding(const SimEnv& env) {
  return env.spec().task == TaskId::tissue_extraction ? env.state().held : env.state().grasped;
}

double success_lift(const TaskSpec& spec) {
  return spec.task == TaskId::tissue_extraction ? spec.success_extraction * spec.extraction_length
                                                : spec.lift_height;
}

Eigen::Vector3d move_toward(const Eigen::Vector3d& from, const Eigen::Vector3d& to, double step) {
  const Eigen::Vector3d d = to - from;
  const double n = d.norm();
  return n <= step ? to : Eigen::Vector3d(from + d * (step / n));
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::retreat: return "retreat";
    case Phase::via: return "via";
    case Phase::approach: return "approach";
    case Phase::descend: return "descend";
    case Phase::close: return "close";
    case Phase::lift: return "lift";
    case Phase::done: return "done";
  }
  return "?";
}

ExpertPlanner::ExpertPlanner(const SimEnv& env, const ExpertConfig& cfg, std::uint64_t seed,
                             const Eigen::Vector3d& grasp_point_hand)
    : env_(&env), cfg_(cfg), grasp_point_hand_(grasp_point_hand) {
  rotation_ = geometry::fk_ee(env.arm(), env.arm().home).rotation;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  speed_ = cfg.speed * (1.0 + cfg.speed_jitter * u(rng));
  close_time_ = cfg.close_time * (1.0 + cfg.close_jitter * u(rng));
  via_ = Eigen::Vector3d(u(rng), u(rng), 0.5 * (1.0 + u(rng))) * cfg.via_offset;
  aim_ = Eigen::Vector3d(u(rng), u(rng), u(rng)) * cfg.aim_error;
  lead_ = 0.5 * (1.0 + u(rng)) * cfg.close_lead;
}

Eigen::Vector3d ExpertPlanner::target_point() const {
  const SimState& s = env_->state();
  return env_->spec().task == TaskId::tissue_extraction ? s.edge_center : s.sphere_center;
}

Eigen::Vector3d ExpertPlanner::actual_point() const { return env_->ee_pose().apply(grasp_point_hand_); }

bool ExpertPlanner::hand_open_enough() const { return hand_closure(*env_) < 0.15; }

geometry::Pose ExpertPlanner::goal_ee() const {
  geometry::Pose p;
  p.rotation = rotation_;
  p.translation = goal_ - rotation_ * grasp_point_hand_;
  return p;
}

void ExpertPlanner::enter(Phase p, double t) {
  phase_ = p;
  phase_start_ = t;
  if (p == Phase::lift) lift_from_ = goal_;
}

void ExpertPlanner::start(double t) {
  last_t_ = t;
  goal_ = actual_point();
  alpha_ = hand_closure(*env_);
  if (holding(*env_)) {
    enter(Phase::lift, t);
  } else if (!hand_open_enough()) {
    enter(Phase::retreat, t);
  } else if (cfg_.via_offset > 0.0) {
    enter(Phase::via, t);
  } else {
    enter(Phase::approach, t);
  }
}

void ExpertPlanner::update(double t) {
  if (last_t_ < 0.0) start(t);
  const double dt = t - last_t_;
  if (dt <= 0.0) return;
  last_t_ = t;

  const Eigen::Vector3d object = target_point() + aim_;
  const Eigen::Vector3d pregrasp = object + Eigen::Vector3d(0.0, 0.0, cfg_.pregrasp_height);
  const double err = (actual_point() - goal_).norm();
  Eigen::Vector3d target = goal_;
  double alpha_target = 0.0;

  switch (phase_) {
    case Phase::retreat: {
      target = Eigen::Vector3d(goal_.x(), goal_.y(), std::max(goal_.z(), pregrasp.z()));
      if (alpha_ <= 0.0 && (goal_ - target).norm() < 1e-9 && err < 0.01) enter(Phase::approach, t);
      break;
    }
    case Phase::via:
      target = pregrasp + via_;
      if ((goal_ - target).norm() < 1e-9) enter(Phase::approach, t);
      break;
    case Phase::approach:
      target = pregrasp;
      if ((goal_ - target).norm() < 1e-9 && err < 0.01 && alpha_ <= 0.0) enter(Phase::descend, t);
      break;
    case Phase::descend:
      target = object;
      if (((goal_ - target).norm() < 1e-9 && err < cfg_.settle_tolerance) ||
          (lead_ > 0.0 && (goal_ - target).norm() < speed_ * lead_))
        enter(Phase::close, t);
      break;
    case Phase::close:
      target = lead_ > 0.0 ? object : goal_;
      alpha_target = 1.0;
      if (holding(*env_)) {
        enter(Phase::lift, t);
      } else if (alpha_ >= 1.0 && t - phase_start_ > close_time_ + cfg_.regrasp_wait) {
        enter(Phase::retreat, t);
      }
      break;
    case Phase::lift:
      alpha_target = 1.0;
      target = lift_from_ + Eigen::Vector3d(0.0, 0.0, success_lift(env_->spec()) + cfg_.lift_margin);
      if (env_->outcome() == Outcome::success) {
        if ((goal_ - target).norm() < 1e-9) enter(Phase::done, t);
      } else if (!holding(*env_)) {
        enter(Phase::retreat, t);
      }
      break;
    case Phase::done:
      alpha_target = 1.0;
      break;
  }
  if (phase_ == Phase::lift || phase_ == Phase::done || phase_ == Phase::close) alpha_target = 1.0;
  if (phase_ == Phase::retreat || phase_ == Phase::via || phase_ == Phase::approach || phase_ == Phase::descend) {
    alpha_target = 0.0;
  }
  goal_ = move_toward(goal_, target, speed_ * dt);
  const double da = dt / close_time_;
  alpha_ = alpha_target > alpha_ ? std::min(alpha_target, alpha_ + da) : std::max(alpha_target, alpha_ - da);
}

double progress_potential(const SimEnv& env) {
  const TaskSpec& spec = env.spec();
  const SimState& s = env.state();
  const double remaining = success_lift(spec) - env.lifted_distance();
  if (holding(env)) return remaining;
  const double d = (env.grasp_point_world() - env.object_position()).norm();
  double closure_left;
  if (spec.task == TaskId::tissue_extraction) {
    closure_left = 0.3 * env.thumb_index_gap();
  } else {
    closure_left = 0.02 * std::max(0.0, 1.8 - finger_mcp_mean(s.hand));
  }
  return remaining + d + closure_left;
}

std::optional<std::string> FailurePredictor::observe(const SimEnv& env, double t) {
  if (t < cfg_.monitor_delay) return std::nullopt;
  if (!holding(env)) {
    const double closure = env.spec().task == TaskId::tissue_extraction ? env.state().hand[geometry::kIndexMcp]
                                                                        : finger_mcp_mean(env.state().hand);
    const double misalign = (env.grasp_point_world() - env.object_position()).norm();
    if (closure > cfg_.closure_threshold && misalign > cfg_.align_tolerance) return "premature_closure";
  }
  const double phi = progress_potential(env);
  history_.emplace_back(t, phi);
  while (t - history_.front().first > cfg_.stall_window + 1e-9) history_.pop_front();
  if (t - history_.front().first >= cfg_.stall_window - 1e-9 && history_.front().second - phi < cfg_.stall_progress) {
    return "stall";
  }
  return std::nullopt;
}

Eigen::Vector3d ScriptedExpert::grasp_point_for(const SimEnv& env, const retarget::RetargetNet* net) {
  if (env.spec().task == TaskId::plush_grasp) return env.spec().cage_center_hand;
  const retarget::HumanHandSample s = hand_for(TaskId::tissue_extraction, 1.0);
  const Eigen::VectorXd act = net != nullptr ? retarget::retarget(*net, s) : Eigen::VectorXd(s.q_true);
  const geometry::Fingertips tips =
      geometry::fk_fingertips(env.hand_model(), geometry::expand_coupling(env.hand_model(), act));
  return 0.5 * (tips[0] + tips[1]);
}

retarget::HumanHandSample ScriptedExpert::hand_for(TaskId task, double closure) {
  const double a = std::clamp(closure, 0.0, 1.0);
  const retarget::HumanPoseParams& g = grasp_params(task);
  retarget::HumanPoseParams p;
  for (std::size_t f = 0; f < retarget::kFingerCount; ++f) {
    p.curl[f] = a * g.curl[f];
    p.abduction[f] = a * g.abduction[f];
  }
  const retarget::PoseKind kind = a <= 0.0   ? retarget::PoseKind::open
                                  : task == TaskId::tissue_extraction ? retarget::PoseKind::pinch
                                                                      : retarget::PoseKind::power;
  retarget::HumanHandSample s = retarget::make_human_sample(human_hand(), robot_hand(), p, kind);
  if (kind == retarget::PoseKind::pinch) s.pinch_finger = static_cast<int>(geometry::FingerId::index);
  return s;
}

ScriptedExpert::ScriptedExpert(const SimEnv& env, const retarget::RetargetNet* net, ExpertConfig cfg,
                               std::uint64_t seed, bool control_from_start, geometry::Pose robot_cube)
    : env_(env),
      cfg_(cfg),
      planner_(env, cfg, seed, grasp_point_for(env, net)),
      predictor_(cfg),
      robot_cube_(robot_cube),
      control_from_start_(control_from_start),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  virtual_marker_ = geometry::Pose::from_translation({0.0, 0.0, 0.6});
}

std::optional<bool> ScriptedExpert::wants_control(double t) {
  if (in_control_) {
    planner_.update(t);
    return true;
  }
  std::optional<std::string> why;
  if (control_from_start_) {
    why = "demonstration";
  } else {
    why = predictor_.observe(env_, t);
  }
  if (!why) return std::nullopt;
  in_control_ = true;
  trigger_time_ = t;
  reason_ = *why;
  anchor_ = teleop::AnchorState{env_.ee_pose(), virtual_marker_, robot_cube_};
  planner_.start(t);
  return true;
}

std::optional<teleop::MarkerFrame> ScriptedExpert::marker(double t) {
  if (!in_control_) return teleop::MarkerFrame{t, virtual_marker_};
  planner_.update(t);
  geometry::Pose goal = planner_.goal_ee();
  if (cfg_.tremor > 0.0) {
    std::normal_distribution<double> n(0.0, cfg_.tremor);
    goal.translation += Eigen::Vector3d(n(rng_), n(rng_), n(rng_));
  }
  return teleop::MarkerFrame{t, teleop::marker_for_ee(*anchor_, goal)};
}

std::optional<retarget::HumanHandSample> ScriptedExpert::hand(double t) {
  if (in_control_) planner_.update(t);
  return hand_for(env_.spec().task, in_control_ ? planner_.closure() : 0.0);
}

PlannerPolicy::PlannerPolicy(const SimEnv& env, const retarget::RetargetNet* net, ExpertConfig cfg, int horizon)
    : env_(env),
      net_(net),
      planner_(env, cfg, 0, ScriptedExpert::grasp_point_for(env, net)),
      horizon_(horizon) {}

std::optional<Eigen::VectorXd> PlannerPolicy::infer(const Eigen::VectorXd&) {
  const double t = static_cast<double>(calls_++) / 20.0;
  if (calls_ == 1) {
    planner_.start(t);
    seed_q_ = env_.q_arm();
  }
  planner_.update(t);
  ExpertPlanner ahead = planner_;
  Eigen::VectorXd chunk(horizon_ * 12);
  Eigen::VectorXd q = seed_q_;
  for (int k = 0; k < horizon_; ++k) {
    ahead.update(t + k / 90.0);
    try {
      q = geometry::ik_solve(env_.arm(), ahead.goal_ee(), q).q;
    } catch (const geometry::UnreachableTarget& e) {
      q = e.best_q;
    }
    const retarget::HumanHandSample s = ScriptedExpert::hand_for(env_.spec().task, ahead.closure());
    chunk.segment(k * 12, 6) = q;
    chunk.segment(k * 12 + 6, 6) = net_ != nullptr ? retarget::retarget(*net_, s) : Eigen::VectorXd(s.q_true);
    if (k == 0) seed_q_ = q;
  }
  return chunk;
}

}  // namespace dexhil::sim
