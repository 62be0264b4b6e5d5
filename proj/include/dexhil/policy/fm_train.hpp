#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dexhil/nn/optim.hpp"
#include "dexhil/policy/fm_policy.hpp"

namespace dexhil::policy {

/// Columns are records. Empty `weights` means every record weighs 1.
struct FmDataset {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd act;
  Eigen::VectorXd weights;

  Eigen::Index size() const { return obs.cols(); }
};

struct FmHyper {
  int steps = 2000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double final_lr_fraction = 1.0;  // linear decay to lr * fraction
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  std::uint64_t seed = 1;
  bool head_only = false;  // leave the encoder untouched
};

/// Uniform record sampling with replacement; per-record loss multiplied by
/// its weight. Throws nn::NumericError on divergence. Returns the loss of
/// every step.
std::vector<double> train_fm(FmPolicy& p, const FmDataset& data, const FmHyper& hyper);

/// Fits and freezes both normalizers on `data`. No-op once frozen.
void fit_normalizers(FmPolicy& p, const FmDataset& data);

}  // namespace dexhil::policy
