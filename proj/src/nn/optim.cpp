#include "dexhil/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "dexhil/nn/mlp.hpp"

namespace dexhil::nn {

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

Eigen::VectorXd sgd_step(const Eigen::VectorXd& params, const Eigen::VectorXd& gradient,
                         double learning_rate) {
  if (params.size() != gradient.size()) throw DimensionError("sgd_step: shape mismatch");
  return params - learning_rate * gradient;
}

Optimizer::Optimizer(Eigen::Index parameter_count, OptimizerConfig config)
    : config_(config),
      m_(Eigen::VectorXd::Zero(parameter_count)),
      v_(Eigen::VectorXd::Zero(parameter_count)) {}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    throw DimensionError("optimizer step: shape mismatch");
  }
  if (!gradient.allFinite()) throw NumericError("optimizer step: non-finite gradient");
  ++t_;
  if (config_.kind == OptimizerKind::sgd) {
    params.noalias() -= config_.learning_rate * gradient;
    return;
  }
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * gradient;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * gradient.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  params.array() -= config_.learning_rate * (m_.array() / bc1) /
                    ((v_.array() / bc2).sqrt() + config_.epsilon);
}

}  // namespace dexhil::nn
