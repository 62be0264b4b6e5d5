#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dexhil/hil/dataset.hpp"
#include "dexhil/hil/weighting.hpp"
#include "dexhil/policy/fm_policy.hpp"
#include "dexhil/policy/fm_train.hpp"

namespace dexhil::hil {

struct TrainLog {
  std::vector<double> loss;
  /// Mean of the first `n` steps.
  double head_mean(std::size_t n = 10) const;
  /// Mean of the last 10% of steps.
  double plateau_mean() const;
};

/// Flow-matching loss of `p` on every chunk of `d`, averaged over `draws`
/// seeded draws of (t, x0). Used for held-out checks.
double dataset_fm_loss(const policy::FmPolicy& p, const Dataset& d, std::uint64_t seed, int draws = 4);

/// Full training from scratch on offline data: fits and freezes the
/// normalizers, then unweighted flow-matching steps.
policy::FmPolicy warmup_train(const Dataset& d0, const policy::PolicyConfig& cfg, const policy::FmHyper& hyper,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, std::uint64_t init_seed,
                              TrainLog* log = nullptr);

/// Warm-started update minimizing the mean of w(c) * loss over uniformly
/// drawn records. An empty weight vector trains unweighted.
policy::FmPolicy weighted_update(const policy::FmPolicy& previous, const Dataset& d,
                                 const std::vector<double>& weights, const policy::FmHyper& hyper,
                                 TrainLog* log = nullptr);

}  // namespace dexhil::hil
