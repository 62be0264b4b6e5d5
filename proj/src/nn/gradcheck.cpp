#include "dexhil/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dexhil/nn/mlp.hpp"

namespace dexhil::nn {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradCheckReport check_gradient(const std::function<double(const Eigen::VectorXd&)>& loss,
                               const Eigen::VectorXd& params, const Eigen::VectorXd& analytic,
                               std::mt19937_64& rng, const GradCheckOptions& options) {
  if (params.size() != analytic.size()) throw DimensionError("check_gradient: size mismatch");
  GradCheckReport report;
  const double h = options.step;
  const double floor = std::max(options.floor, options.loss_relative_floor * std::abs(loss(params)));

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd dir(params.size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
  dir.normalize();
  const double numeric_dir = (loss(params + h * dir) - loss(params - h * dir)) / (2.0 * h);
  report.directional_rel_error = relative_error(analytic.dot(dir), numeric_dir, floor);

  std::uniform_int_distribution<Eigen::Index> pick(0, params.size() - 1);
  for (int c = 0; c < options.coordinate_checks; ++c) {
    const Eigen::Index i = pick(rng);
    Eigen::VectorXd plus = params;
    Eigen::VectorXd minus = params;
    plus[i] += h;
    minus[i] -= h;
    const double numeric = (loss(plus) - loss(minus)) / (2.0 * h);
    report.max_coordinate_rel_error = std::max(
        report.max_coordinate_rel_error, relative_error(analytic[i], numeric, floor));
  }
  return report;
}

}  // namespace dexhil::nn
