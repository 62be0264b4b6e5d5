#include "dexhil/retarget/human_hand.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace dexhil::retarget {

using geometry::ChainState;
using geometry::forward_chain;
using geometry::HandModel;
using geometry::Joint;
using geometry::KinematicChain;
using geometry::Pose;

namespace {

// human flexion per unit curl: MCP, PIP, DIP share the robot coupling ratios
constexpr double kMcpPerCurl = 2.0;
constexpr double kThumbAbdPerCurl = 2.0;
constexpr double kThumbFlexPerCurl = 1.2;
constexpr double kThumbDistalRatio = 0.7;

Pose scaled(const Pose& p, double s) {
  Pose out = p;
  out.translation *= s;
  return out;
}

const HumanHandModel& shared_human() {
  static const HumanHandModel m = default_human_hand(geometry::default_desk_hand());
  return m;
}

const HandModel& shared_robot() {
  static const HandModel h = geometry::default_desk_hand();
  return h;
}

}  // namespace

const char* pose_kind_name(PoseKind k) {
  switch (k) {
    case PoseKind::random: return "random";
    case PoseKind::open: return "open";
    case PoseKind::power: return "power";
    case PoseKind::pinch: return "pinch";
  }
  return "?";
}

HumanHandModel default_human_hand(const HandModel& robot, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (robot.fingers.size() != static_cast<std::size_t>(kFingerCount)) {
    throw std::invalid_argument("human hand needs a five-finger robot template");
  }
  HumanHandModel h;
  h.kappa = kappa;
  const double s = 1.0 / kappa;
  for (int f = 0; f < kFingerCount; ++f) {
    const KinematicChain& rc = robot.fingers[static_cast<std::size_t>(f)].chain;
    KinematicChain c;
    if (f == 0) {
      for (const Joint& rj : rc.joints) {
        Joint j = rj;
        j.origin = scaled(rj.origin, s);
        j.limits = {-1.0, 3.0};
        c.joints.push_back(j);
      }
    } else {
      Joint spread;
      spread.name = rc.joints[0].name + "_spread";
      spread.origin = scaled(rc.joints[0].origin, s);
      spread.axis = Eigen::Vector3d::UnitZ();
      spread.limits = {-0.5, 0.5};
      c.joints.push_back(spread);
      for (std::size_t k = 0; k < rc.joints.size(); ++k) {
        Joint j = rc.joints[k];
        j.origin = k == 0 ? Pose::identity() : scaled(rc.joints[k].origin, s);
        j.limits = {-0.5, 3.0};
        c.joints.push_back(j);
      }
    }
    c.tip = scaled(rc.tip, s);
    h.fingers[static_cast<std::size_t>(f)] = c;
  }
  return h;
}

std::array<Eigen::VectorXd, kFingerCount> human_joint_values(const HumanPoseParams& p) {
  std::array<Eigen::VectorXd, kFingerCount> out;
  const double ct = p.curl[0];
  const double flex = kThumbFlexPerCurl * ct;
  out[0] = Eigen::Vector3d(kThumbAbdPerCurl * ct + p.abduction[0], flex, kThumbDistalRatio * flex);
  for (int f = 1; f < kFingerCount; ++f) {
    const double mcp = kMcpPerCurl * p.curl[static_cast<std::size_t>(f)];
    Eigen::VectorXd q(4);
    q << p.abduction[static_cast<std::size_t>(f)], mcp, 0.8 * mcp, 0.6 * mcp;
    out[static_cast<std::size_t>(f)] = q;
  }
  return out;
}

HumanHandSample make_human_sample(const HumanHandModel& model, const HandModel& robot,
                                  const HumanPoseParams& params, PoseKind kind) {
  HumanHandSample s;
  s.kind = kind;
  s.params = params;
  s.keypoints[0] = Eigen::Vector3d::Zero();
  const auto q = human_joint_values(params);
  for (int f = 0; f < kFingerCount; ++f) {
    const ChainState st = forward_chain(model.fingers[static_cast<std::size_t>(f)], q[static_cast<std::size_t>(f)]);
    const auto fid = static_cast<FingerId>(f);
    if (f == 0) {
      s.keypoints[keypoint_index(fid, 0)] = st.frames[0].translation;
      s.keypoints[keypoint_index(fid, 1)] = st.frames[1].translation;
      s.keypoints[keypoint_index(fid, 2)] = st.frames[2].translation;
    } else {
      s.keypoints[keypoint_index(fid, 0)] = st.frames[0].translation;
      s.keypoints[keypoint_index(fid, 1)] = st.frames[2].translation;
      s.keypoints[keypoint_index(fid, 2)] = st.frames[3].translation;
    }
    s.keypoints[keypoint_index(fid, 3)] = st.tip.translation;
  }
  Eigen::VectorXd act(6);
  act << q[0][0], q[0][1], q[1][1], q[2][1], q[3][1], q[4][1];
  s.q_true = robot.clamp_actuated(act);
  return s;
}

double human_finger_length(const HumanHandModel& model, FingerId f) {
  const KinematicChain& c = model.fingers[static_cast<std::size_t>(f)];
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.size()));
  const ChainState st = forward_chain(c, zero);
  return (st.tip.translation - st.frames[0].translation).norm();
}

Eigen::VectorXd HumanHandSample::net_input() const {
  Eigen::VectorXd x(kNetInputSize);
  for (int k = 0; k < kKeypointCount; ++k) x.segment<3>(3 * k) = kInputScale * keypoints[static_cast<std::size_t>(k)];
  return x;
}

bool HumanHandSample::valid() const {
  for (const auto& k : keypoints) {
    if (!k.allFinite()) return false;
  }
  for (int f = 0; f < kFingerCount; ++f) {
    if (!(extension(static_cast<FingerId>(f)) > 0.0)) return false;
  }
  return true;
}

Eigen::MatrixXd stack_inputs(const std::vector<const HumanHandSample*>& batch) {
  Eigen::MatrixXd x(kNetInputSize, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) x.col(static_cast<Eigen::Index>(b)) = batch[b]->net_input();
  return x;
}

HumanPoseParams solve_pinch(const HumanHandModel& model, FingerId f, HumanPoseParams p,
                            double gap_open) {
  const auto fi = static_cast<std::size_t>(f);
  auto residual = [&](const HumanPoseParams& pp) {
    const auto q = human_joint_values(pp);
    const Eigen::Vector3d t = forward_chain(model.fingers[0], q[0]).tip.translation;
    const Eigen::Vector3d g = forward_chain(model.fingers[fi], q[fi]).tip.translation;
    return Eigen::Vector3d(t - g);
  };
  auto get = [&](const HumanPoseParams& pp) { return Eigen::Vector3d(pp.curl[0], pp.abduction[0], pp.curl[fi]); };
  auto set = [&](HumanPoseParams& pp, const Eigen::Vector3d& v) {
    pp.curl[0] = std::clamp(v[0], 0.0, 1.0);
    pp.abduction[0] = std::clamp(v[1], -0.3, 0.3);
    pp.curl[fi] = std::clamp(v[2], 0.0, 1.0);
  };
  const double h = 1e-6;
  for (int it = 0; it < 40; ++it) {
    const Eigen::Vector3d r = residual(p);
    if (r.norm() < 1e-6) break;
    Eigen::Matrix3d jac;
    const Eigen::Vector3d v = get(p);
    for (int k = 0; k < 3; ++k) {
      HumanPoseParams pp = p;
      Eigen::Vector3d vk = v;
      vk[k] += h;
      set(pp, vk);
      jac.col(k) = (residual(pp) - r) / h;
    }
    Eigen::Matrix3d a = jac.transpose() * jac;
    a.diagonal().array() += 1e-6;
    set(p, v - a.ldlt().solve(jac.transpose() * r));
  }
  p.curl[fi] = std::max(0.0, p.curl[fi] - gap_open);
  return p;
}

std::vector<HumanHandSample> synth_human_dataset(std::uint64_t seed, std::size_t count,
                                                 const SynthOptions& options) {
  if (count == 0) throw std::invalid_argument("synth_human_dataset: count must be positive");
  const HumanHandModel& model = shared_human();
  const HandModel& robot = shared_robot();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  std::vector<HumanHandSample> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    HumanPoseParams p;
    PoseKind kind = PoseKind::random;
    int pinch_finger = -1;
    const double pick = u01(rng);
    if (pick < options.open_fraction) {
      kind = PoseKind::open;
      for (int f = 0; f < kFingerCount; ++f) {
        p.curl[static_cast<std::size_t>(f)] = uni(0.0, 0.05);
        p.abduction[static_cast<std::size_t>(f)] = uni(-0.05, 0.05);
      }
    } else if (pick < options.open_fraction + options.power_fraction) {
      kind = PoseKind::power;
      p.curl[0] = uni(0.5, 0.9);
      p.abduction[0] = uni(-0.3, 0.3);
      for (int f = 1; f < kFingerCount; ++f) {
        p.curl[static_cast<std::size_t>(f)] = uni(0.6, 1.0);
        p.abduction[static_cast<std::size_t>(f)] = uni(-0.1, 0.1);
      }
    } else if (pick < options.open_fraction + options.power_fraction + options.pinch_fraction) {
      kind = PoseKind::pinch;
      pinch_finger = 1 + static_cast<int>(rng() % 3);
      for (int f = 1; f < kFingerCount; ++f) {
        p.curl[static_cast<std::size_t>(f)] = uni(0.0, 0.5);
        p.abduction[static_cast<std::size_t>(f)] = uni(-0.1, 0.1);
      }
      p.curl[0] = 0.4;
      p.abduction[0] = 0.1;
      p.curl[static_cast<std::size_t>(pinch_finger)] = 0.5;
      p = solve_pinch(model, static_cast<FingerId>(pinch_finger), p, uni(0.0, 0.05));
    } else {
      for (int f = 0; f < kFingerCount; ++f) {
        p.curl[static_cast<std::size_t>(f)] = u01(rng);
        p.abduction[static_cast<std::size_t>(f)] = uni(-0.3, 0.3);
      }
    }
    HumanHandSample s = make_human_sample(model, robot, p, kind);
    s.pinch_finger = pinch_finger;
    out.push_back(std::move(s));
  }
  return out;
}

HumanHandSample open_hand_sample() {
  return make_human_sample(shared_human(), shared_robot(), HumanPoseParams{}, PoseKind::open);
}

HumanHandSample power_grasp_sample(double curl) {
  HumanPoseParams p;
  p.curl.fill(curl);
  p.curl[0] = 0.7 * curl;
  return make_human_sample(shared_human(), shared_robot(), p, PoseKind::power);
}

HumanHandSample pinch_sample(FingerId f, double gap_open) {
  HumanPoseParams p;
  p.curl[0] = 0.4;
  p.abduction[0] = 0.1;
  p.curl[static_cast<std::size_t>(f)] = 0.5;
  p = solve_pinch(shared_human(), f, p, gap_open);
  HumanHandSample s = make_human_sample(shared_human(), shared_robot(), p, PoseKind::pinch);
  s.pinch_finger = static_cast<int>(f);
  return s;
}

}  // namespace dexhil::retarget
