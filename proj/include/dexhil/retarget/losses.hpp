#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/retarget/human_hand.hpp"

namespace dexhil::retarget {

using Batch = std::vector<const HumanHandSample*>;

/// s(d) = 1 + beta exp(-d/d0), f(d) = kappa d. Distances enter s and f in
/// metres; residual lengths are multiplied by `length_scale` (centimetres by
/// default) before squaring.
struct Stage1LossConfig {
  double length_scale = 100.0;
  double beta = 1.0;
  double d0 = 0.03;
  double kappa = 0.8;
  double gamma = 1e-3;
  double epsilon = 1e-6;

  double s(double d) const;
  double f(double d) const { return kappa * d; }
  void validate() const;
};

using FingerPair = std::pair<FingerId, FingerId>;

struct Stage2LossConfig {
  double length_scale = 100.0;
  double lambda_dir = 1.0;
  double lambda_cover = 0.1;
  double lambda_flat = 0.01;
  double lambda_pinch = 1.0;
  double lambda_kin = 1.0;
  double kappa = 0.8;
  double beta = 1.0;
  double d0 = 0.03;
  double epsilon = 1e-6;
  double pinch_threshold = 0.02;
  /// Pairs whose human thumb displacement is shorter are skipped by L_dir.
  double dir_min_displacement = 1e-3;
  std::vector<FingerPair> kin_pairs = default_kin_pairs();

  double s(double d) const;
  void validate() const;
  static std::vector<FingerPair> default_kin_pairs();
};

/// Loss value with its gradient with respect to the actuated batch (m x B).
struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd d_act;
};

/// Robot forward kinematics for a batch of actuated vectors, with tip Jacobians.
struct RobotBatch {
  std::vector<geometry::FingertipJacobian> fk;
  geometry::Fingertips roots;
};

RobotBatch robot_batch(const geometry::HandModel& hand, const Eigen::MatrixXd& act);

/// Batch mean of 1/2 sum_i s(d_i) |r_i^R - f(d_i) rhat_i^H|^2 + gamma |q|^2 over
/// index, middle, ring, little.
LossGrad stage1_loss(const geometry::HandModel& hand, const Batch& batch, const Eigen::MatrixXd& act,
                     const Stage1LossConfig& cfg);

/// Individual stage-2 terms, unweighted.
LossGrad dir_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg);
LossGrad cover_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg);
LossGrad pinch_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg);
LossGrad kin_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg);

/// Mean over consecutive pairs of |g(x_b) - 2 g(mid) + g(x_b+1)|^2 on the thumb
/// outputs. `mid` has one column per pair. Gradients land in `d_act` and `d_mid`.
struct FlatLossGrad {
  double value = 0.0;
  Eigen::MatrixXd d_act;
  Eigen::MatrixXd d_mid;
};
FlatLossGrad flat_loss(const Eigen::MatrixXd& act, const Eigen::MatrixXd& mid);

/// Keypoint midpoints of consecutive batch entries, as net inputs.
Eigen::MatrixXd midpoint_inputs(const Batch& batch);

struct Stage2Terms {
  double dir = 0.0;
  double cover = 0.0;
  double flat = 0.0;
  double pinch = 0.0;
  double kin = 0.0;
};

struct Stage2Result {
  Stage2Terms terms;
  double total = 0.0;
  Eigen::MatrixXd d_act;
  Eigen::MatrixXd d_mid;
};

Stage2Result stage2_loss(const geometry::HandModel& hand, const Batch& batch, const Eigen::MatrixXd& act,
                         const Eigen::MatrixXd& mid_act, const Stage2LossConfig& cfg);

}  // namespace dexhil::retarget
