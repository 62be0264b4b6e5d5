#pragma once

#include <functional>
#include <random>

#include <Eigen/Core>

namespace dexhil::nn {

struct GradCheckOptions {
  double step = 1e-5;
  int coordinate_checks = 8;
  /// Denominator floor for relative errors on near-zero entries.
  double floor = 1e-6;
  /// The floor also grows to this fraction of |loss|: central differences of
  /// a loss of size L carry roughly eps_mach * L / step of round-off.
  double loss_relative_floor = 1e-6;
};

struct GradCheckReport {
  double directional_rel_error = 0.0;
  double max_coordinate_rel_error = 0.0;
  double worst() const {
    return directional_rel_error > max_coordinate_rel_error ? directional_rel_error
                                                            : max_coordinate_rel_error;
  }
};

/// Compares an analytic gradient against central differences of `loss`:
/// once along a random unit direction and on randomly drawn coordinates.
/// `loss` must be a pure function of the parameter vector.
GradCheckReport check_gradient(const std::function<double(const Eigen::VectorXd&)>& loss,
                               const Eigen::VectorXd& params, const Eigen::VectorXd& analytic,
                               std::mt19937_64& rng, const GradCheckOptions& options = {});

double relative_error(double a, double b, double floor);

}  // namespace dexhil::nn
