#include "dexhil/policy/fm_policy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dexhil::policy {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_batch(const FmPolicy& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act) {
  if (obs.rows() != p.config.obs_dim || act.rows() != p.config.chunk_size() || obs.cols() != act.cols() ||
      obs.cols() == 0) {
    throw nn::DimensionError("fm_loss: observation/action batch shapes disagree with the policy");
  }
}

Eigen::MatrixXd velocity_input(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& t, const Eigen::MatrixXd& ctx) {
  Eigen::MatrixXd in(x.rows() + 1 + ctx.rows(), x.cols());
  in.topRows(x.rows()) = x;
  in.row(x.rows()) = t;
  in.bottomRows(ctx.rows()) = ctx;
  return in;
}

}  // namespace

void PolicyConfig::validate() const {
  if (obs_dim < 1 || action_dim < 1 || horizon < 1 || context_dim < 1 || sample_steps < 1) {
    throw std::invalid_argument("policy config: dimensions and sample_steps must be >= 1");
  }
  if (relative_to_proprio && obs_dim < action_dim) {
    throw std::invalid_argument("policy config: relative chunks need the joint state in the observation");
  }
  for (int h : encoder_hidden) {
    if (h < 1) throw std::invalid_argument("policy config: hidden sizes must be >= 1");
  }
  for (int h : velocity_hidden) {
    if (h < 1) throw std::invalid_argument("policy config: hidden sizes must be >= 1");
  }
}

Normalizer Normalizer::identity(Eigen::Index n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
}

Normalizer Normalizer::fit(const Eigen::MatrixXd& data, double min_scale) {
  if (data.cols() == 0) throw std::invalid_argument("normalizer: no samples");
  Normalizer n;
  n.mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - n.mean;
  n.scale = (centered.array().square().rowwise().sum() / static_cast<double>(data.cols())).sqrt();
  n.scale = n.scale.cwiseMax(min_scale);
  return n;
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& raw) const {
  return (raw.colwise() - mean).array().colwise() / scale.array();
}

Eigen::MatrixXd Normalizer::invert(const Eigen::MatrixXd& normalized) const {
  return (normalized.array().colwise() * scale.array()).matrix().colwise() + mean;
}

FmPolicy make_policy(const PolicyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  FmPolicy p;
  p.config = cfg;
  std::vector<int> enc{cfg.obs_dim};
  enc.insert(enc.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
  enc.push_back(cfg.context_dim);
  p.encoder = nn::make_mlp(enc, nn::Activation::tanh, rng);
  // the context feeds the velocity net through tanh as well
  p.encoder.layers.back().activation = nn::Activation::tanh;
  std::vector<int> vel{cfg.chunk_size() + 1 + cfg.context_dim};
  vel.insert(vel.end(), cfg.velocity_hidden.begin(), cfg.velocity_hidden.end());
  vel.push_back(cfg.chunk_size());
  p.velocity = nn::make_mlp(vel, nn::Activation::tanh, rng);
  p.obs_norm = Normalizer::identity(cfg.obs_dim);
  p.act_norm = Normalizer::identity(cfg.chunk_size());
  p.lower = Eigen::VectorXd::Constant(cfg.action_dim, -1e9);
  p.upper = Eigen::VectorXd::Constant(cfg.action_dim, 1e9);
  return p;
}

PolicyGrad PolicyGrad::zeros_like(const FmPolicy& p) { return {p.encoder.zeros_like(), p.velocity.zeros_like()}; }

Eigen::MatrixXd proprio_offset(const FmPolicy& p, const Eigen::MatrixXd& obs) {
  const int A = p.config.action_dim;
  Eigen::MatrixXd off = Eigen::MatrixXd::Zero(p.config.chunk_size(), obs.cols());
  if (!p.config.relative_to_proprio) return off;
  for (int k = 0; k < p.config.horizon; ++k) off.middleRows(static_cast<Eigen::Index>(k) * A, A) = obs.topRows(A);
  return off;
}

Eigen::MatrixXd target_velocity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x0) { return a - x0; }

Eigen::MatrixXd velocity_field(const FmPolicy& p, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& t,
                               const Eigen::MatrixXd& obs) {
  const Eigen::MatrixXd ctx = nn::forward_batch(p.encoder, p.obs_norm.apply(obs));
  return nn::forward_batch(p.velocity, velocity_input(x, t, ctx));
}

double fm_loss_at(const FmPolicy& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                  const Eigen::RowVectorXd& t, const Eigen::MatrixXd& x0, const Eigen::VectorXd* weights,
                  PolicyGrad* grad) {
  check_batch(p, obs, act);
  const Eigen::Index B = act.cols();
  if (t.size() != B || x0.rows() != act.rows() || x0.cols() != B) {
    throw nn::DimensionError("fm_loss: t / x0 shapes disagree with the batch");
  }
  if (weights != nullptr && weights->size() != B) throw nn::DimensionError("fm_loss: weight count != batch");

  const Eigen::MatrixXd a = p.act_norm.apply(act - proprio_offset(p, obs));
  Eigen::MatrixXd xt = x0;
  for (Eigen::Index b = 0; b < B; ++b) xt.col(b) = (1.0 - t[b]) * x0.col(b) + t[b] * a.col(b);

  nn::GradientTape enc_tape;
  nn::GradientTape vel_tape;
  const Eigen::MatrixXd ctx = nn::forward_batch(p.encoder, p.obs_norm.apply(obs), enc_tape);
  const Eigen::MatrixXd v = nn::forward_batch(p.velocity, velocity_input(xt, t, ctx), vel_tape);
  Eigen::MatrixXd r = v - target_velocity(a, x0);

  Eigen::RowVectorXd per = r.colwise().squaredNorm();
  if (weights != nullptr) per = per.cwiseProduct(weights->transpose());
  const double loss = per.sum() / static_cast<double>(B);
  if (!std::isfinite(loss)) throw nn::NumericError("fm_loss: non-finite loss");

  if (grad != nullptr) {
    Eigen::MatrixXd dv = (2.0 / static_cast<double>(B)) * r;
    if (weights != nullptr) dv = dv.array().rowwise() * weights->transpose().array();
    Eigen::MatrixXd d_in;
    nn::backward(p.velocity, vel_tape, dv, grad->velocity, &d_in);
    nn::backward(p.encoder, enc_tape, d_in.bottomRows(ctx.rows()), grad->encoder);
  }
  return loss;
}

double fm_loss(const FmPolicy& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act, std::mt19937_64& rng,
               const Eigen::VectorXd* weights, PolicyGrad* grad) {
  check_batch(p, obs, act);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::RowVectorXd t(act.cols());
  for (Eigen::Index b = 0; b < t.size(); ++b) t[b] = u(rng);
  Eigen::MatrixXd x0(act.rows(), act.cols());
  for (Eigen::Index b = 0; b < x0.cols(); ++b) {
    for (Eigen::Index i = 0; i < x0.rows(); ++i) x0(i, b) = n(rng);
  }
  return fm_loss_at(p, obs, act, t, x0, weights, grad);
}

Eigen::VectorXd integrate_from(const FmPolicy& p, const Eigen::VectorXd& obs, const Eigen::VectorXd& x0, int steps) {
  if (obs.size() != p.config.obs_dim || x0.size() != p.config.chunk_size()) {
    throw nn::DimensionError("sample_action: observation or start point has the wrong size");
  }
  if (steps <= 0) steps = p.config.sample_steps;
  const Eigen::VectorXd ctx = nn::forward(p.encoder, p.obs_norm.apply(obs));
  const double dt = 1.0 / steps;
  Eigen::VectorXd in(x0.size() + 1 + ctx.size());
  in.tail(ctx.size()) = ctx;
  Eigen::VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    in.head(x.size()) = x;
    in[x.size()] = k * dt;
    x += dt * nn::forward(p.velocity, in);
  }
  Eigen::VectorXd raw = p.act_norm.invert(x) + proprio_offset(p, obs);
  const int A = p.config.action_dim;
  for (int k = 0; k < p.config.horizon; ++k) {
    raw.segment(k * A, A) = raw.segment(k * A, A).cwiseMax(p.lower).cwiseMin(p.upper);
  }
  return raw;
}

Eigen::VectorXd sample_action(const FmPolicy& p, const Eigen::VectorXd& obs, std::mt19937_64& rng, int steps) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd x0(p.config.chunk_size());
  for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = n(rng);
  return integrate_from(p, obs, x0, steps);
}

Eigen::VectorXd chunk_step(const FmPolicy& p, const Eigen::VectorXd& chunk, int k) {
  if (k < 0 || k >= p.config.horizon) throw std::out_of_range("chunk step out of range");
  return chunk.segment(static_cast<Eigen::Index>(k) * p.config.action_dim, p.config.action_dim);
}

Eigen::VectorXd flat_params(const FmPolicy& p) { return nn::flatten({&p.encoder, &p.velocity}); }

void assign_flat_params(FmPolicy& p, const Eigen::VectorXd& values) {
  nn::unflatten(values, {&p.encoder, &p.velocity});
}

Eigen::VectorXd flat_grad(const PolicyGrad& g) { return nn::flatten({&g.encoder, &g.velocity}); }

nn::Checkpoint to_checkpoint(const FmPolicy& p) {
  nn::Checkpoint c;
  c.kind = "fm_policy";
  c.networks["encoder"] = p.encoder;
  c.networks["velocity"] = p.velocity;
  const PolicyConfig& k = p.config;
  c.metadata = {{"obs_dim", k.obs_dim},
                {"action_dim", k.action_dim},
                {"horizon", k.horizon},
                {"encoder_hidden", k.encoder_hidden},
                {"context_dim", k.context_dim},
                {"velocity_hidden", k.velocity_hidden},
                {"sample_steps", k.sample_steps},
                {"relative_to_proprio", k.relative_to_proprio},
                {"obs_mean", to_std(p.obs_norm.mean)},
                {"obs_scale", to_std(p.obs_norm.scale)},
                {"act_mean", to_std(p.act_norm.mean)},
                {"act_scale", to_std(p.act_norm.scale)},
                {"lower", to_std(p.lower)},
                {"upper", to_std(p.upper)},
                {"normalizer_frozen", p.normalizer_frozen}};
  return c;
}

FmPolicy from_checkpoint(const nn::Checkpoint& c) {
  if (c.kind != "fm_policy") throw nn::CheckpointError("expected an fm_policy checkpoint, got '" + c.kind + "'");
  FmPolicy p;
  try {
    const auto& m = c.metadata;
    PolicyConfig& k = p.config;
    k.obs_dim = m.at("obs_dim").get<int>();
    k.action_dim = m.at("action_dim").get<int>();
    k.horizon = m.at("horizon").get<int>();
    k.encoder_hidden = m.at("encoder_hidden").get<std::vector<int>>();
    k.context_dim = m.at("context_dim").get<int>();
    k.velocity_hidden = m.at("velocity_hidden").get<std::vector<int>>();
    k.sample_steps = m.at("sample_steps").get<int>();
    k.relative_to_proprio = m.value("relative_to_proprio", false);
    k.validate();
    p.encoder = c.networks.at("encoder");
    p.velocity = c.networks.at("velocity");
    p.obs_norm = {from_std(m.at("obs_mean").get<std::vector<double>>()),
                  from_std(m.at("obs_scale").get<std::vector<double>>())};
    p.act_norm = {from_std(m.at("act_mean").get<std::vector<double>>()),
                  from_std(m.at("act_scale").get<std::vector<double>>())};
    p.lower = from_std(m.at("lower").get<std::vector<double>>());
    p.upper = from_std(m.at("upper").get<std::vector<double>>());
    p.normalizer_frozen = m.at("normalizer_frozen").get<bool>();
  } catch (const std::out_of_range& e) {
    throw nn::CheckpointError(std::string("fm_policy checkpoint: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw nn::CheckpointError(std::string("fm_policy checkpoint: ") + e.what());
  }
  const PolicyConfig& k = p.config;
  if (p.encoder.input_size() != k.obs_dim || p.encoder.output_size() != k.context_dim ||
      p.velocity.input_size() != k.chunk_size() + 1 + k.context_dim || p.velocity.output_size() != k.chunk_size() ||
      p.obs_norm.mean.size() != k.obs_dim || p.obs_norm.scale.size() != k.obs_dim ||
      p.act_norm.mean.size() != k.chunk_size() || p.act_norm.scale.size() != k.chunk_size() ||
      p.lower.size() != k.action_dim || p.upper.size() != k.action_dim) {
    throw nn::CheckpointError("fm_policy checkpoint: shapes disagree with the stored config");
  }
  return p;
}

}  // namespace dexhil::policy
