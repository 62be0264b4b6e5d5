#include "dexhil/nn/mlp.hpp"

#include <cmath>

namespace dexhil::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers.front().in()));
  for (const DenseLayer& l : layers) sizes.push_back(static_cast<int>(l.out()));
  return sizes;
}

Eigen::Index MlpParams::input_size() const { return layers.empty() ? 0 : layers.front().in(); }

Eigen::Index MlpParams::output_size() const { return layers.empty() ? 0 : layers.back().out(); }

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const DenseLayer& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

void MlpParams::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].bias.size() != layers[k].out()) {
      throw DimensionError("layer " + std::to_string(k) + " bias size mismatch");
    }
    if (k > 0 && layers[k].in() != layers[k - 1].out()) {
      throw DimensionError("layer " + std::to_string(k) + " input does not match previous output");
    }
  }
}

Eigen::VectorXd MlpParams::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const DenseLayer& l : layers) {
    out.segment(pos, l.weight.size()) = l.weight.reshaped();
    pos += l.weight.size();
    out.segment(pos, l.bias.size()) = l.bias;
    pos += l.bias.size();
  }
  return out;
}

void MlpParams::assign_flat(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DimensionError("assign_flat: size mismatch");
  }
  Eigen::Index pos = 0;
  for (DenseLayer& l : layers) {
    l.weight.reshaped() = values.segment(pos, l.weight.size());
    pos += l.weight.size();
    l.bias = values.segment(pos, l.bias.size());
    pos += l.bias.size();
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  for (DenseLayer& l : z.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return z;
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
  }
  return *this;
}

MlpParams& MlpParams::operator*=(double s) {
  for (DenseLayer& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

MlpParams make_mlp(const std::vector<int>& sizes, Activation hidden, std::mt19937_64& rng) {
  if (sizes.size() < 2) throw DimensionError("make_mlp needs at least input and output sizes");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int fan_in = sizes[k];
    const int fan_out = sizes[k + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l;
    l.weight.resize(fan_out, fan_in);
    // fill column-major so the draw order matches flat()
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = u(rng);
    l.bias = Eigen::VectorXd::Zero(fan_out);
    l.activation = (k + 2 == sizes.size()) ? Activation::identity : hidden;
    p.layers.push_back(std::move(l));
  }
  return p;
}

namespace {

void activate(Eigen::MatrixXd& m, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::tanh: m = m.array().tanh(); break;
    case Activation::relu: m = m.cwiseMax(0.0); break;
  }
}

// derivative expressed through the layer output y
void scale_by_derivative(Eigen::MatrixXd& g, const Eigen::MatrixXd& y, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::tanh: g.array() *= (1.0 - y.array().square()); break;
    case Activation::relu: g.array() *= (y.array() > 0.0).cast<double>(); break;
  }
}

}  // namespace

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return forward_batch(params, Eigen::MatrixXd(input)).col(0);
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_size()) {
    throw DimensionError("forward: input has " + std::to_string(inputs.rows()) +
                         " rows, network expects " + std::to_string(params.input_size()));
  }
  Eigen::MatrixXd x = inputs;
  for (const DenseLayer& l : params.layers) {
    Eigen::MatrixXd y = l.weight * x;
    y.colwise() += l.bias;
    activate(y, l.activation);
    x = std::move(y);
  }
  return x;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                              GradientTape& tape) {
  if (inputs.rows() != params.input_size()) {
    throw DimensionError("forward: input has " + std::to_string(inputs.rows()) +
                         " rows, network expects " + std::to_string(params.input_size()));
  }
  tape.values.clear();
  tape.values.reserve(params.layers.size() + 1);
  tape.values.push_back(inputs);
  for (const DenseLayer& l : params.layers) {
    Eigen::MatrixXd y = l.weight * tape.values.back();
    y.colwise() += l.bias;
    activate(y, l.activation);
    tape.values.push_back(std::move(y));
  }
  return tape.values.back();
}

void backward(const MlpParams& params, const GradientTape& tape,
              const Eigen::MatrixXd& output_grad, MlpParams& grad, Eigen::MatrixXd* input_grad) {
  if (tape.values.size() != params.layers.size() + 1) {
    throw DimensionError("backward: tape does not match network");
  }
  Eigen::MatrixXd g = output_grad;
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const DenseLayer& l = params.layers[k];
    scale_by_derivative(g, tape.values[k + 1], l.activation);
    grad.layers[k].weight.noalias() += g * tape.values[k].transpose();
    grad.layers[k].bias += g.rowwise().sum();
    if (k > 0 || input_grad != nullptr) {
      Eigen::MatrixXd next = l.weight.transpose() * g;
      g = std::move(next);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(g);
}

Eigen::VectorXd flatten(const std::vector<const MlpParams*>& nets) {
  std::size_t total = 0;
  for (const MlpParams* n : nets) total += n->parameter_count();
  Eigen::VectorXd out(static_cast<Eigen::Index>(total));
  Eigen::Index pos = 0;
  for (const MlpParams* n : nets) {
    const auto count = static_cast<Eigen::Index>(n->parameter_count());
    out.segment(pos, count) = n->flat();
    pos += count;
  }
  return out;
}

void unflatten(const Eigen::VectorXd& values, const std::vector<MlpParams*>& nets) {
  Eigen::Index pos = 0;
  for (MlpParams* n : nets) {
    const auto count = static_cast<Eigen::Index>(n->parameter_count());
    n->assign_flat(values.segment(pos, count));
    pos += count;
  }
  if (pos != values.size()) throw DimensionError("unflatten: size mismatch");
}

}  // namespace dexhil::nn
