#include "dexhil/geometry/arm_model.hpp"

#include <Eigen/Cholesky>
#include <sstream>

namespace dexhil::geometry {

Eigen::VectorXd ArmModel::clamp(const Eigen::VectorXd& q) const {
  Eigen::VectorXd out = q;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out[k] = chain.joints[i].limits.clamp(q[k]);
  }
  return out;
}

bool ArmModel::within_limits(const Eigen::VectorXd& q, double tol) const {
  if (static_cast<std::size_t>(q.size()) != chain.size()) return false;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const double v = q[static_cast<Eigen::Index>(i)];
    if (v < chain.joints[i].limits.lower - tol || v > chain.joints[i].limits.upper + tol) {
      return false;
    }
  }
  return true;
}

void ArmModel::validate() const {
  if (chain.size() < 3) throw std::invalid_argument("arm model needs at least 3 joints");
  for (const Joint& j : chain.joints) {
    if (!(j.limits.lower < j.limits.upper)) {
      throw std::invalid_argument("joint '" + j.name + "' has lower >= upper limit");
    }
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("joint '" + j.name + "' axis is not unit length");
    }
  }
  if (static_cast<std::size_t>(home.size()) != chain.size()) {
    throw std::invalid_argument("arm home configuration has wrong length");
  }
}

Pose fk_ee(const ArmModel& model, const Eigen::VectorXd& q_arm) {
  return forward_chain(model.chain, q_arm).tip;
}

IkSolution ik_solve(const ArmModel& model, const Pose& target, const Eigen::VectorXd& seed,
                    const IkOptions& options) {
  if (static_cast<std::size_t>(seed.size()) != model.joint_count()) {
    throw DimensionError("ik_solve: seed length does not match arm joint count");
  }
  const auto n = static_cast<Eigen::Index>(model.joint_count());
  const double lambda2 = options.damping * options.damping;

  Eigen::VectorXd q = model.clamp(seed);
  IkSolution best{q, 0, {1e300, 1e300}};
  auto score = [](const PoseError& e) { return e.position + 0.1 * e.orientation; };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const ChainState state = forward_chain(model.chain, q);
    const Pose& ee = state.tip;
    Eigen::Matrix<double, 6, 1> err;
    err.head<3>() = target.translation - ee.translation;
    err.tail<3>() = rotation_log(target.rotation * ee.rotation.transpose());
    const PoseError pe{err.head<3>().norm(), err.tail<3>().norm()};

    if (score(pe) < score(best.residual)) best = IkSolution{q, iter, pe};
    if (pe.position <= options.position_tolerance &&
        pe.orientation <= options.orientation_tolerance) {
      return IkSolution{q, iter, pe};
    }
    if (iter == options.max_iterations) break;

    const auto jac = chain_jacobian(model.chain, state);
    Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
    jjt.diagonal().array() += lambda2;
    Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(err);
    for (Eigen::Index k = 0; k < n; ++k) {
      dq[k] = std::clamp(dq[k], -options.step_clamp, options.step_clamp);
    }
    q = model.clamp(q + dq);
  }

  std::ostringstream msg;
  msg << "ik_solve: target unreachable after " << options.max_iterations
      << " iterations (best position error " << best.residual.position
      << " m, orientation error " << best.residual.orientation << " rad)";
  throw UnreachableTarget(msg.str(), best.residual, best.q);
}

ArmModel default_desk_arm() {
  ArmModel arm;
  arm.name = "desk_arm_6dof";
  auto joint = [](std::string name, Eigen::Vector3d offset, Eigen::Vector3d axis,
                  double lo, double hi) {
    Joint j;
    j.name = std::move(name);
    j.origin = Pose::from_translation(offset);
    j.axis = axis;
    j.limits = {lo, hi};
    return j;
  };
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  arm.chain.joints = {
      joint("base_yaw", {0.0, 0.0, 0.10}, z, -2.6, 2.6),
      joint("shoulder_pitch", {0.0, 0.0, 0.10}, y, -1.2, 1.9),
      joint("elbow_pitch", {0.0, 0.0, 0.30}, y, -0.3, 1.3),
      joint("forearm_roll", {0.15, 0.0, 0.0}, x, -2.6, 2.6),
      joint("wrist_pitch", {0.15, 0.0, 0.0}, y, -1.9, 1.9),
      joint("wrist_roll", {0.05, 0.0, 0.0}, x, -2.6, 2.6),
  };
  arm.chain.tip = Pose::from_translation({0.04, 0.0, 0.0});
  // EE near (0.35, 0, 0.25), tool x axis pointing down
  arm.home = Eigen::VectorXd(6);
  arm.home << 0.0, 0.30, 0.21, 0.0, 1.06, 0.0;
  arm.workspace.min = Eigen::Vector3d(0.15, -0.35, 0.02);
  arm.workspace.max = Eigen::Vector3d(0.65, 0.35, 0.60);
  return arm;
}

}  // namespace dexhil::geometry
