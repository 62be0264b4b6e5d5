#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dexhil/geometry/hand_model.hpp"
#include "dexhil/nn/checkpoint.hpp"
#include "dexhil/nn/mlp.hpp"
#include "dexhil/nn/optim.hpp"
#include "dexhil/retarget/human_hand.hpp"
#include "dexhil/retarget/losses.hpp"

namespace dexhil::retarget {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Keypoints -> actuated angles. Outputs pass through lo + (hi - lo) sigmoid(z),
/// so they always sit inside the actuated limits. The staged variant has a
/// four-finger net (rows 2..5) and a thumb net (rows 0..1); the ablation
/// variant is one net for all six outputs.
struct RetargetNet {
  nn::MlpParams four_finger;
  nn::MlpParams thumb;
  nn::MlpParams joint;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int stage = 0;  // last completed training stage
  bool four_finger_frozen = false;

  bool is_joint() const { return !joint.layers.empty(); }
  Eigen::Index actuated_count() const { return lower.size(); }
  /// m x B actuated outputs for 63 x B inputs.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs) const;
};

struct RetargetNetSizes {
  std::vector<int> four_finger_hidden = {64, 64};
  std::vector<int> thumb_hidden = {32, 32};
  std::vector<int> joint_hidden = {64, 64};
};

RetargetNet make_retarget_net(const geometry::HandModel& hand, std::uint64_t seed, bool joint = false,
                              const RetargetNetSizes& sizes = {});

/// Clamped actuated vector for one sample.
Eigen::VectorXd retarget(const RetargetNet& net, const HumanHandSample& sample);

struct TrainHyper {
  int steps = 3000;
  int batch_size = 64;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.1;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> loss;
  double final_loss() const { return loss.empty() ? 0.0 : loss.back(); }
};

/// Objective values with parameter gradients accumulated into `grad`
/// (same layout as the trained network). Exposed for gradient checks.
double stage1_objective(const RetargetNet& net, const geometry::HandModel& hand, const Batch& batch,
                        const Stage1LossConfig& cfg, nn::MlpParams* grad);
double stage2_objective(const RetargetNet& net, const geometry::HandModel& hand, const Batch& batch,
                        const Stage2LossConfig& cfg, nn::MlpParams* grad, Stage2Terms* terms = nullptr);
double joint_objective(const RetargetNet& net, const geometry::HandModel& hand, const Batch& batch,
                       const Stage1LossConfig& cfg1, const Stage2LossConfig& cfg2, nn::MlpParams* grad);

TrainReport train_stage1(RetargetNet& net, const geometry::HandModel& hand,
                         const std::vector<HumanHandSample>& data, const Stage1LossConfig& cfg,
                         const TrainHyper& hyper);
/// Requires a completed stage 1; freezes the four-finger net.
TrainReport train_stage2(RetargetNet& net, const geometry::HandModel& hand,
                         const std::vector<HumanHandSample>& data, const Stage2LossConfig& cfg,
                         const TrainHyper& hyper);
/// Ablation: one net, stage-1 and stage-2 losses from the first step.
TrainReport train_joint(RetargetNet& net, const geometry::HandModel& hand,
                        const std::vector<HumanHandSample>& data, const Stage1LossConfig& cfg1,
                        const Stage2LossConfig& cfg2, const TrainHyper& hyper);

/// RMS of |r_i^R(net) - r_i^R(q_true)| over samples and the four non-thumb fingers.
double fingertip_vector_rmse(const RetargetNet& net, const geometry::HandModel& hand,
                             const std::vector<HumanHandSample>& samples);
/// Mean straight length of the four non-thumb human fingers.
double mean_human_finger_length(const HumanHandModel& human);
/// Mean non-thumb MCP output over the samples.
double mean_mcp_flexion(const RetargetNet& net, const std::vector<HumanHandSample>& samples);

nn::Checkpoint to_checkpoint(const RetargetNet& net);
RetargetNet from_checkpoint(const nn::Checkpoint& c);

}  // namespace dexhil::retarget
