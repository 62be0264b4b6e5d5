#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "dexhil/geometry/chain.hpp"
#include "dexhil/geometry/pose.hpp"

namespace dexhil::geometry {

/// Axis-aligned Cartesian box (base frame) that EE targets are expected in.
struct Workspace {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(1.0);

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

/// Serial arm; the chain tip is the end-effector (hand mount) frame.
struct ArmModel {
  std::string name = "arm";
  KinematicChain chain;
  Eigen::VectorXd home;
  Workspace workspace;

  std::size_t joint_count() const { return chain.size(); }
  Eigen::VectorXd clamp(const Eigen::VectorXd& q) const;
  bool within_limits(const Eigen::VectorXd& q, double tol = 0.0) const;
  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

Pose fk_ee(const ArmModel& model, const Eigen::VectorXd& q_arm);

struct IkOptions {
  double damping = 1e-2;
  int max_iterations = 100;
  double step_clamp = 0.2;
  double position_tolerance = 1e-4;
  double orientation_tolerance = 1e-3;
};

struct IkSolution {
  Eigen::VectorXd q;
  int iterations = 0;
  PoseError residual;
};

class UnreachableTarget : public std::runtime_error {
 public:
  UnreachableTarget(const std::string& what, PoseError best, Eigen::VectorXd best_q)
      : std::runtime_error(what), best_residual(best), best_q(std::move(best_q)) {}
  PoseError best_residual;
  Eigen::VectorXd best_q;
};

/// Damped least-squares IK: dq = J^T (J J^T + lambda^2 I)^-1 e, each joint step
/// clamped to step_clamp, iterate clamped to limits. Throws UnreachableTarget
/// when max_iterations pass without meeting both tolerances.
IkSolution ik_solve(const ArmModel& model, const Pose& target, const Eigen::VectorXd& seed,
                    const IkOptions& options = {});

/// 6-DoF desk-scale arm; zero configuration points the EE along +x.
ArmModel default_desk_arm();

}  // namespace dexhil::geometry
