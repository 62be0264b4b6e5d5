#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dexhil::nn {

enum class Activation { identity, tanh, relu };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a loss or gradient turns non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

/// Feed-forward network; samples are columns in batched calls.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::vector<int> layer_sizes() const;
  Eigen::Index input_size() const;
  Eigen::Index output_size() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Throws DimensionError when consecutive layers disagree.
  void validate() const;

  /// Weights (column-major) then bias, layer by layer.
  Eigen::VectorXd flat() const;
  void assign_flat(const Eigen::Ref<const Eigen::VectorXd>& values);
  /// Same shapes and activations, all parameters zero.
  MlpParams zeros_like() const;
  MlpParams& operator+=(const MlpParams& other);
  MlpParams& operator*=(double s);
};

/// Hidden layers use `hidden`; the last layer is linear. Weights uniform in
/// +-sqrt(6 / (fan_in + fan_out)), biases zero.
MlpParams make_mlp(const std::vector<int>& sizes, Activation hidden, std::mt19937_64& rng);

/// Records what backward() needs: the input and every layer output.
struct GradientTape {
  std::vector<Eigen::MatrixXd> values;  // values[0] = input, values[k+1] = layer k output
};

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input);
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                              GradientTape& tape);

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(outputs) for the
/// taped batch. Writes d(loss)/d(inputs) when `input_grad` is non-null.
void backward(const MlpParams& params, const GradientTape& tape,
              const Eigen::MatrixXd& output_grad, MlpParams& grad,
              Eigen::MatrixXd* input_grad = nullptr);

/// Concatenation helpers for models made of several networks.
Eigen::VectorXd flatten(const std::vector<const MlpParams*>& nets);
void unflatten(const Eigen::VectorXd& values, const std::vector<MlpParams*>& nets);

}  // namespace dexhil::nn
