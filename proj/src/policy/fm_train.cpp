#include "dexhil/policy/fm_train.hpp"

#include <cmath>
#include <stdexcept>

namespace dexhil::policy {

void fit_normalizers(FmPolicy& p, const FmDataset& data) {
  if (p.normalizer_frozen) return;
  p.obs_norm = Normalizer::fit(data.obs, 1e-2);
  p.act_norm = Normalizer::fit(data.act - proprio_offset(p, data.obs), 1e-2);
  p.normalizer_frozen = true;
}

std::vector<double> train_fm(FmPolicy& p, const FmDataset& data, const FmHyper& hyper) {
  const Eigen::Index N = data.size();
  if (N == 0) throw std::invalid_argument("train_fm: empty dataset");
  if (data.act.cols() != N || (data.weights.size() != 0 && data.weights.size() != N)) {
    throw nn::DimensionError("train_fm: dataset columns disagree");
  }
  if (hyper.steps < 0 || hyper.batch_size < 1) throw std::invalid_argument("train_fm: bad hyperparameters");

  const Eigen::VectorXd weights = data.weights.size() == N ? data.weights : Eigen::VectorXd::Ones(N);
  std::mt19937_64 rng(hyper.seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
  nn::OptimizerConfig oc;
  oc.kind = hyper.optimizer;
  oc.learning_rate = hyper.learning_rate;

  Eigen::VectorXd theta = flat_params(p);
  const Eigen::Index n_enc = static_cast<Eigen::Index>(p.encoder.parameter_count());
  nn::Optimizer opt(hyper.head_only ? theta.size() - n_enc : theta.size(), oc);

  const int B = hyper.batch_size;
  Eigen::MatrixXd obs(data.obs.rows(), B);
  Eigen::MatrixXd act(data.act.rows(), B);
  Eigen::VectorXd w(B);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(hyper.steps));
  for (int step = 0; step < hyper.steps; ++step) {
    for (int b = 0; b < B; ++b) {
      const Eigen::Index i = pick(rng);
      obs.col(b) = data.obs.col(i);
      act.col(b) = data.act.col(i);
      w[b] = weights[i];
    }
    PolicyGrad g = PolicyGrad::zeros_like(p);
    const double loss = fm_loss(p, obs, act, rng, &w, &g);
    const double frac = hyper.steps > 1 ? static_cast<double>(step) / (hyper.steps - 1) : 0.0;
    opt.set_learning_rate(hyper.learning_rate * (1.0 - frac * (1.0 - hyper.final_lr_fraction)));
    const Eigen::VectorXd grad = flat_grad(g);
    if (!grad.allFinite()) throw nn::NumericError("train_fm: non-finite gradient at step " + std::to_string(step));
    if (hyper.head_only) {
      Eigen::VectorXd head = theta.tail(theta.size() - n_enc);
      opt.step(head, grad.tail(grad.size() - n_enc));
      theta.tail(theta.size() - n_enc) = head;
    } else {
      opt.step(theta, grad);
    }
    assign_flat_params(p, theta);
    losses.push_back(loss);
  }
  return losses;
}

}  // namespace dexhil::policy
