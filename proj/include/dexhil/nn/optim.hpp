#pragma once

#include <string>

#include <Eigen/Core>

namespace dexhil::nn {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_from_name(const std::string& name);
const char* optimizer_name(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// theta - lr * grad.
Eigen::VectorXd sgd_step(const Eigen::VectorXd& params, const Eigen::VectorXd& gradient,
                         double learning_rate);

/// Stateful first-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(Eigen::Index parameter_count, OptimizerConfig config);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const OptimizerConfig& config() const { return config_; }
  long steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

}  // namespace dexhil::nn
