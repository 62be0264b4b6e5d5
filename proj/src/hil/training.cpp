#include "dexhil/hil/training.hpp"

#include <algorithm>
#include <numeric>

namespace dexhil::hil {

double TrainLog::head_mean(std::size_t n) const {
  n = std::min(n, loss.size());
  if (n == 0) return 0.0;
  return std::accumulate(loss.begin(), loss.begin() + static_cast<long>(n), 0.0) / static_cast<double>(n);
}

double TrainLog::plateau_mean() const {
  if (loss.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(1, loss.size() / 10);
  return std::accumulate(loss.end() - static_cast<long>(n), loss.end(), 0.0) / static_cast<double>(n);
}

policy::FmPolicy warmup_train(const Dataset& d0, const policy::PolicyConfig& cfg, const policy::FmHyper& hyper,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, std::uint64_t init_seed,
                              TrainLog* log) {
  if (d0.record_count() == 0) throw DatasetError("warm-up dataset is empty");
  for (const Episode& e : d0.episodes)
    for (const TrajectoryRecord& r : e.records)
      if (r.category != Category::offline) throw DatasetError("warm-up data must be offline");
  policy::FmPolicy p = policy::make_policy(cfg, init_seed);
  p.lower = lower;
  p.upper = upper;
  const policy::FmDataset data = to_fm_dataset(d0, cfg.horizon);
  policy::fit_normalizers(p, data);
  auto losses = policy::train_fm(p, data, hyper);
  if (log) log->loss = std::move(losses);
  return p;
}

policy::FmPolicy weighted_update(const policy::FmPolicy& previous, const Dataset& d,
                                 const std::vector<double>& weights, const policy::FmHyper& hyper,
                                 TrainLog* log) {
  policy::FmPolicy p = previous;
  const policy::FmDataset data = to_fm_dataset(d, p.config.horizon, weights);
  auto losses = policy::train_fm(p, data, hyper);
  if (log) log->loss = std::move(losses);
  return p;
}

double dataset_fm_loss(const policy::FmPolicy& p, const Dataset& d, std::uint64_t seed, int draws) {
  if (draws < 1) throw std::invalid_argument("draws must be >= 1");
  const policy::FmDataset data = to_fm_dataset(d, p.config.horizon);
  if (data.size() == 0) throw DatasetError("dataset_fm_loss: empty dataset");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (int k = 0; k < draws; ++k) total += policy::fm_loss(p, data.obs, data.act, rng);
  return total / draws;
}

}  // namespace dexhil::hil
