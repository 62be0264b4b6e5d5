#include "dexhil/geometry/hand_model.hpp"

#include <set>
#include <stdexcept>

namespace dexhil::geometry {

const char* finger_name(FingerId f) {
  switch (f) {
    case FingerId::thumb: return "thumb";
    case FingerId::index: return "index";
    case FingerId::middle: return "middle";
    case FingerId::ring: return "ring";
    case FingerId::little: return "little";
  }
  return "?";
}

std::size_t HandModel::joint_count() const {
  std::size_t n = 0;
  for (const Finger& f : fingers) n += f.chain.size();
  return n;
}

std::size_t HandModel::finger_offset(FingerId id) const {
  std::size_t off = 0;
  for (const Finger& f : fingers) {
    if (f.id == id) return off;
    off += f.chain.size();
  }
  throw std::out_of_range(std::string("hand has no finger ") + finger_name(id));
}

const Joint& HandModel::joint(std::size_t full_index) const {
  std::size_t off = 0;
  for (const Finger& f : fingers) {
    if (full_index < off + f.chain.size()) return f.chain.joints[full_index - off];
    off += f.chain.size();
  }
  throw std::out_of_range("hand joint index out of range");
}

JointLimits HandModel::actuated_limits(std::size_t k) const {
  return joint(actuated_joints.at(k)).limits;
}

Eigen::VectorXd HandModel::clamp_actuated(const Eigen::VectorXd& actuated) const {
  if (static_cast<std::size_t>(actuated.size()) != actuated_count()) {
    throw DimensionError("clamp_actuated: expected " + std::to_string(actuated_count()) +
                         " values, got " + std::to_string(actuated.size()));
  }
  Eigen::VectorXd out = actuated;
  for (std::size_t k = 0; k < actuated_count(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out[i] = actuated_limits(k).clamp(actuated[i]);
  }
  return out;
}

void HandModel::validate() const {
  if (fingers.size() != kFingerCount) throw std::invalid_argument("hand needs 5 fingers");
  for (int i = 0; i < kFingerCount; ++i) {
    if (static_cast<int>(fingers[static_cast<std::size_t>(i)].id) != i) {
      throw std::invalid_argument("fingers must be ordered thumb, index, middle, ring, little");
    }
  }
  const std::size_t n = joint_count();
  std::set<std::size_t> actuated(actuated_joints.begin(), actuated_joints.end());
  if (actuated.size() != actuated_joints.size()) {
    throw std::invalid_argument("duplicate actuated joint");
  }
  std::vector<int> coupled(n, 0);
  for (const CouplingEntry& c : coupling) {
    if (c.passive_joint >= n || c.driving_actuated >= actuated_joints.size()) {
      throw std::invalid_argument("coupling entry out of range");
    }
    if (actuated.count(c.passive_joint)) {
      throw std::invalid_argument("coupling entry targets an actuated joint");
    }
    ++coupled[c.passive_joint];
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (actuated.count(j)) continue;
    if (coupled[j] != 1) {
      throw std::invalid_argument("passive joint " + std::to_string(j) +
                                  " must appear in exactly one coupling entry");
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!(joint(j).limits.lower < joint(j).limits.upper)) {
      throw std::invalid_argument("hand joint " + std::to_string(j) + " has lower >= upper");
    }
  }
}

JointConfiguration expand_coupling(const HandModel& model, const Eigen::VectorXd& actuated) {
  if (static_cast<std::size_t>(actuated.size()) != model.actuated_count()) {
    throw DimensionError("expand_coupling: expected " + std::to_string(model.actuated_count()) +
                         " actuated values, got " + std::to_string(actuated.size()));
  }
  JointConfiguration q = JointConfiguration::Zero(static_cast<Eigen::Index>(model.joint_count()));
  for (std::size_t k = 0; k < model.actuated_count(); ++k) {
    q[static_cast<Eigen::Index>(model.actuated_joints[k])] = actuated[static_cast<Eigen::Index>(k)];
  }
  for (const CouplingEntry& c : model.coupling) {
    q[static_cast<Eigen::Index>(c.passive_joint)] =
        c.ratio * actuated[static_cast<Eigen::Index>(c.driving_actuated)];
  }
  for (std::size_t j = 0; j < model.joint_count(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    q[i] = model.joint(j).limits.clamp(q[i]);
  }
  return q;
}

namespace {

Eigen::VectorXd finger_slice(const HandModel& model, const JointConfiguration& q,
                             std::size_t finger) {
  std::size_t off = 0;
  for (std::size_t i = 0; i < finger; ++i) off += model.fingers[i].chain.size();
  return q.segment(static_cast<Eigen::Index>(off),
                   static_cast<Eigen::Index>(model.fingers[finger].chain.size()));
}

}  // namespace

Fingertips fk_fingertips(const HandModel& model, const JointConfiguration& q) {
  if (static_cast<std::size_t>(q.size()) != model.joint_count()) {
    throw DimensionError("fk_fingertips: configuration length does not match hand");
  }
  Fingertips tips;
  for (std::size_t f = 0; f < model.fingers.size(); ++f) {
    tips[f] = forward_chain(model.fingers[f].chain, finger_slice(model, q, f)).tip.translation;
  }
  return tips;
}

Fingertips finger_roots(const HandModel& model) {
  Fingertips roots;
  for (std::size_t f = 0; f < model.fingers.size(); ++f) {
    roots[f] = model.fingers[f].chain.joints.front().origin.translation;
  }
  return roots;
}

FingertipJacobian fingertip_jacobian(const HandModel& model, const Eigen::VectorXd& actuated) {
  FingertipJacobian out;
  out.q = expand_coupling(model, actuated);
  const auto n = static_cast<Eigen::Index>(model.joint_count());
  const auto m = static_cast<Eigen::Index>(model.actuated_count());
  out.d_q = Eigen::MatrixXd::Zero(n, m);
  for (std::size_t k = 0; k < model.actuated_count(); ++k) {
    const std::size_t j = model.actuated_joints[k];
    const double raw = actuated[static_cast<Eigen::Index>(k)];
    const JointLimits lim = model.joint(j).limits;
    if (raw > lim.lower && raw < lim.upper) {
      out.d_q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = 1.0;
    }
  }
  for (const CouplingEntry& c : model.coupling) {
    const double raw = c.ratio * actuated[static_cast<Eigen::Index>(c.driving_actuated)];
    const JointLimits lim = model.joint(c.passive_joint).limits;
    if (raw > lim.lower && raw < lim.upper) {
      out.d_q(static_cast<Eigen::Index>(c.passive_joint),
              static_cast<Eigen::Index>(c.driving_actuated)) = c.ratio;
    }
  }
  std::size_t off = 0;
  for (std::size_t f = 0; f < model.fingers.size(); ++f) {
    const KinematicChain& chain = model.fingers[f].chain;
    const auto len = static_cast<Eigen::Index>(chain.size());
    const ChainState st = forward_chain(chain, out.q.segment(static_cast<Eigen::Index>(off), len));
    out.tips[f] = st.tip.translation;
    const auto jac = chain_position_jacobian(chain, st);
    out.d_tip[f] = jac * out.d_q.middleRows(static_cast<Eigen::Index>(off), len);
    off += chain.size();
  }
  return out;
}

HandModel default_desk_hand() {
  HandModel hand;
  hand.name = "desk_hand_m6";
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();

  auto make_joint = [](std::string name, const Pose& origin, const Eigen::Vector3d& axis,
                       double lo, double hi) {
    Joint j;
    j.name = std::move(name);
    j.origin = origin;
    j.axis = axis;
    j.limits = {lo, hi};
    return j;
  };

  // thumb: abduction swings it under the palm, flexion curls it toward the fingers
  {
    Finger thumb;
    thumb.id = FingerId::thumb;
    Pose base;
    base.rotation = rot_z(0.5);
    base.translation = Eigen::Vector3d(0.024, 0.0224, -0.008);
    const Eigen::Vector3d flex_axis(0.0, 0.0, -1.0);
    thumb.chain.joints = {
        make_joint("thumb_abd", base, y, -0.3, 1.6),
        make_joint("thumb_flex", Pose::from_translation({0.032, 0.0, 0.0}), flex_axis, -0.1, 1.0),
        make_joint("thumb_distal", Pose::from_translation({0.0256, 0.0, 0.0}), flex_axis, -0.07,
                   0.7),
    };
    thumb.chain.tip = Pose::from_translation({0.0208, 0.0, 0.0});
    hand.fingers.push_back(thumb);
  }

  struct Spec {
    FingerId id;
    Eigen::Vector3d root;
    double l0, l1, l2;
  };
  const Spec specs[] = {
      {FingerId::index, {0.072, 0.024, 0.0}, 0.036, 0.0216, 0.0176},
      {FingerId::middle, {0.0736, 0.008, 0.0}, 0.040, 0.024, 0.0192},
      {FingerId::ring, {0.0704, -0.008, 0.0}, 0.0376, 0.0224, 0.0184},
      {FingerId::little, {0.064, -0.0224, 0.0}, 0.0296, 0.0176, 0.016},
  };
  for (const Spec& s : specs) {
    Finger f;
    f.id = s.id;
    const std::string n = finger_name(s.id);
    f.chain.joints = {
        make_joint(n + "_mcp", Pose::from_translation(s.root), y, -0.2, 2.0),
        make_joint(n + "_pip", Pose::from_translation({s.l0, 0.0, 0.0}), y, -0.16, 1.6),
        make_joint(n + "_dip", Pose::from_translation({s.l1, 0.0, 0.0}), y, -0.12, 1.2),
    };
    f.chain.tip = Pose::from_translation({s.l2, 0.0, 0.0});
    hand.fingers.push_back(f);
  }

  // full layout: thumb 0..2, index 3..5, middle 6..8, ring 9..11, little 12..14
  hand.actuated_joints = {0, 1, 3, 6, 9, 12};
  hand.coupling = {{2, kThumbFlexion, 0.7}};
  for (int f = 0; f < 4; ++f) {
    const auto mcp = static_cast<std::size_t>(3 + 3 * f);
    const auto act = static_cast<std::size_t>(kIndexMcp + f);
    hand.coupling.push_back({mcp + 1, act, 0.8});
    hand.coupling.push_back({mcp + 2, act, 0.6});
  }
  hand.palm_point = Eigen::Vector3d(0.045, 0.0, -0.012);
  return hand;
}

}  // namespace dexhil::geometry
