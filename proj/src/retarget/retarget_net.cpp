#include "dexhil/retarget/retarget_net.hpp"

#include <cmath>
#include <random>

namespace dexhil::retarget {

using geometry::HandModel;
using nn::GradientTape;
using nn::MlpParams;

namespace {

constexpr Eigen::Index kThumbRows = 2;
constexpr Eigen::Index kFingerRows = 4;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// lo + (hi - lo) sigmoid(z) on rows [first, first + z.rows()).
Eigen::MatrixXd squash(const RetargetNet& net, const Eigen::MatrixXd& z, Eigen::Index first) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double lo = net.lower[first + r], span = net.upper[first + r] - net.lower[first + r];
    for (Eigen::Index c = 0; c < z.cols(); ++c) out(r, c) = lo + span * sigmoid(z(r, c));
  }
  return out;
}

/// d act / d z given the squashed outputs.
Eigen::MatrixXd squash_grad(const RetargetNet& net, const Eigen::MatrixXd& act, Eigen::Index first,
                            const Eigen::MatrixXd& d_act) {
  Eigen::MatrixXd out(act.rows(), act.cols());
  for (Eigen::Index r = 0; r < act.rows(); ++r) {
    const double lo = net.lower[first + r], span = net.upper[first + r] - net.lower[first + r];
    for (Eigen::Index c = 0; c < act.cols(); ++c) {
      const double s = (act(r, c) - lo) / span;
      out(r, c) = d_act(r, c) * span * s * (1.0 - s);
    }
  }
  return out;
}

Batch sample_batch(const std::vector<HumanHandSample>& data, int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  Batch b;
  b.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) b.push_back(&data[pick(rng)]);
  return b;
}

double scheduled_lr(const TrainHyper& h, int step) {
  if (h.steps <= 1) return h.learning_rate;
  const double frac = static_cast<double>(step) / static_cast<double>(h.steps - 1);
  return h.learning_rate * (1.0 - (1.0 - h.final_lr_fraction) * frac);
}

template <class Objective>
TrainReport run_training(MlpParams& params, const std::vector<HumanHandSample>& data, const TrainHyper& hyper,
                         const char* what, Objective&& objective) {
  if (data.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
  if (hyper.steps < 0 || hyper.batch_size < 2) {
    throw std::invalid_argument(std::string(what) + ": need steps >= 0 and batch_size >= 2");
  }
  std::mt19937_64 rng(hyper.seed);
  nn::OptimizerConfig oc;
  oc.kind = hyper.optimizer;
  oc.learning_rate = hyper.learning_rate;
  nn::Optimizer opt(static_cast<Eigen::Index>(params.parameter_count()), oc);
  Eigen::VectorXd theta = params.flat();
  TrainReport report;
  report.loss.reserve(static_cast<std::size_t>(hyper.steps));
  for (int step = 0; step < hyper.steps; ++step) {
    const Batch batch = sample_batch(data, hyper.batch_size, rng);
    MlpParams grad = params.zeros_like();
    const double loss = objective(batch, grad);
    if (!std::isfinite(loss)) {
      throw TrainingError(std::string(what) + ": loss became non-finite at step " + std::to_string(step));
    }
    report.loss.push_back(loss);
    opt.set_learning_rate(scheduled_lr(hyper, step));
    try {
      opt.step(theta, grad.flat());
    } catch (const nn::NumericError& e) {
      throw TrainingError(std::string(what) + ": " + e.what());
    }
    params.assign_flat(theta);
  }
  return report;
}

}  // namespace

Eigen::MatrixXd RetargetNet::predict(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd act(actuated_count(), inputs.cols());
  if (is_joint()) {
    act = squash(*this, nn::forward_batch(joint, inputs), 0);
    return act;
  }
  act.topRows(kThumbRows) = squash(*this, nn::forward_batch(thumb, inputs), 0);
  act.bottomRows(kFingerRows) = squash(*this, nn::forward_batch(four_finger, inputs), kThumbRows);
  return act;
}

RetargetNet make_retarget_net(const HandModel& hand, std::uint64_t seed, bool joint,
                              const RetargetNetSizes& sizes) {
  if (hand.actuated_count() != 6) throw geometry::DimensionError("retarget net expects a 6-input hand");
  RetargetNet net;
  net.lower.resize(6);
  net.upper.resize(6);
  for (std::size_t k = 0; k < 6; ++k) {
    const geometry::JointLimits l = hand.actuated_limits(k);
    net.lower[static_cast<Eigen::Index>(k)] = l.lower;
    net.upper[static_cast<Eigen::Index>(k)] = l.upper;
  }
  std::mt19937_64 rng(seed);
  auto sizes_for = [](const std::vector<int>& hidden, int out) {
    std::vector<int> s{kNetInputSize};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
  };
  if (joint) {
    net.joint = nn::make_mlp(sizes_for(sizes.joint_hidden, 6), nn::Activation::tanh, rng);
  } else {
    net.four_finger = nn::make_mlp(sizes_for(sizes.four_finger_hidden, 4), nn::Activation::tanh, rng);
    net.thumb = nn::make_mlp(sizes_for(sizes.thumb_hidden, 2), nn::Activation::tanh, rng);
  }
  return net;
}

Eigen::VectorXd retarget(const RetargetNet& net, const HumanHandSample& sample) {
  Eigen::VectorXd act = net.predict(sample.net_input());
  return act.cwiseMax(net.lower).cwiseMin(net.upper);
}

double stage1_objective(const RetargetNet& net, const HandModel& hand, const Batch& batch,
                        const Stage1LossConfig& cfg, MlpParams* grad) {
  if (net.is_joint()) throw std::logic_error("stage1_objective: staged net required");
  const Eigen::MatrixXd x = stack_inputs(batch);
  GradientTape tape;
  const Eigen::MatrixXd fingers = squash(net, nn::forward_batch(net.four_finger, x, tape), kThumbRows);
  Eigen::MatrixXd act = Eigen::MatrixXd::Zero(6, x.cols());
  act.bottomRows(kFingerRows) = fingers;
  const LossGrad lg = stage1_loss(hand, batch, act, cfg);
  if (grad) {
    const Eigen::MatrixXd dz = squash_grad(net, fingers, kThumbRows, lg.d_act.bottomRows(kFingerRows));
    nn::backward(net.four_finger, tape, dz, *grad);
  }
  return lg.value;
}

double stage2_objective(const RetargetNet& net, const HandModel& hand, const Batch& batch,
                        const Stage2LossConfig& cfg, MlpParams* grad, Stage2Terms* terms) {
  if (net.is_joint()) throw std::logic_error("stage2_objective: staged net required");
  const Eigen::MatrixXd x = stack_inputs(batch);
  const Eigen::MatrixXd xm = midpoint_inputs(batch);
  GradientTape tape, tape_mid;
  Eigen::MatrixXd act(6, x.cols());
  act.bottomRows(kFingerRows) = squash(net, nn::forward_batch(net.four_finger, x), kThumbRows);
  const Eigen::MatrixXd th = squash(net, nn::forward_batch(net.thumb, x, tape), 0);
  act.topRows(kThumbRows) = th;
  Eigen::MatrixXd mid = Eigen::MatrixXd::Zero(6, xm.cols());
  Eigen::MatrixXd th_mid(kThumbRows, 0);
  if (xm.cols() > 0) {
    th_mid = squash(net, nn::forward_batch(net.thumb, xm, tape_mid), 0);
    mid.topRows(kThumbRows) = th_mid;
  }
  const Stage2Result r = stage2_loss(hand, batch, act, mid, cfg);
  if (terms) *terms = r.terms;
  if (grad) {
    nn::backward(net.thumb, tape, squash_grad(net, th, 0, r.d_act.topRows(kThumbRows)), *grad);
    if (xm.cols() > 0) {
      nn::backward(net.thumb, tape_mid, squash_grad(net, th_mid, 0, r.d_mid.topRows(kThumbRows)), *grad);
    }
  }
  return r.total;
}

double joint_objective(const RetargetNet& net, const HandModel& hand, const Batch& batch,
                       const Stage1LossConfig& cfg1, const Stage2LossConfig& cfg2, MlpParams* grad) {
  if (!net.is_joint()) throw std::logic_error("joint_objective: joint net required");
  const Eigen::MatrixXd x = stack_inputs(batch);
  const Eigen::MatrixXd xm = midpoint_inputs(batch);
  GradientTape tape, tape_mid;
  const Eigen::MatrixXd act = squash(net, nn::forward_batch(net.joint, x, tape), 0);
  Eigen::MatrixXd mid(6, 0);
  if (xm.cols() > 0) mid = squash(net, nn::forward_batch(net.joint, xm, tape_mid), 0);
  const LossGrad l1 = stage1_loss(hand, batch, act, cfg1);
  const Stage2Result l2 = stage2_loss(hand, batch, act, mid, cfg2);
  if (grad) {
    nn::backward(net.joint, tape, squash_grad(net, act, 0, l1.d_act + l2.d_act), *grad);
    if (xm.cols() > 0) {
      Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(6, xm.cols());
      dm.topRows(kThumbRows) = l2.d_mid.topRows(kThumbRows);
      nn::backward(net.joint, tape_mid, squash_grad(net, mid, 0, dm), *grad);
    }
  }
  return l1.value + l2.total;
}

TrainReport train_stage1(RetargetNet& net, const HandModel& hand, const std::vector<HumanHandSample>& data,
                         const Stage1LossConfig& cfg, const TrainHyper& hyper) {
  cfg.validate();
  if (net.is_joint()) throw std::logic_error("train_stage1: staged net required");
  if (net.four_finger_frozen) throw std::logic_error("train_stage1: four-finger net is frozen");
  TrainReport rep = run_training(net.four_finger, data, hyper, "stage 1", [&](const Batch& b, MlpParams& g) {
    return stage1_objective(net, hand, b, cfg, &g);
  });
  net.stage = 1;
  return rep;
}

TrainReport train_stage2(RetargetNet& net, const HandModel& hand, const std::vector<HumanHandSample>& data,
                         const Stage2LossConfig& cfg, const TrainHyper& hyper) {
  cfg.validate();
  if (net.is_joint()) throw std::logic_error("train_stage2: staged net required");
  if (net.stage < 1) throw std::logic_error("train_stage2: stage 1 has not been trained");
  net.four_finger_frozen = true;
  TrainReport rep = run_training(net.thumb, data, hyper, "stage 2", [&](const Batch& b, MlpParams& g) {
    return stage2_objective(net, hand, b, cfg, &g);
  });
  net.stage = 2;
  return rep;
}

TrainReport train_joint(RetargetNet& net, const HandModel& hand, const std::vector<HumanHandSample>& data,
                        const Stage1LossConfig& cfg1, const Stage2LossConfig& cfg2, const TrainHyper& hyper) {
  cfg1.validate();
  cfg2.validate();
  if (!net.is_joint()) throw std::logic_error("train_joint: joint net required");
  TrainReport rep = run_training(net.joint, data, hyper, "joint", [&](const Batch& b, MlpParams& g) {
    return joint_objective(net, hand, b, cfg1, cfg2, &g);
  });
  net.stage = 2;
  return rep;
}

double fingertip_vector_rmse(const RetargetNet& net, const HandModel& hand,
                             const std::vector<HumanHandSample>& samples) {
  if (samples.empty()) return 0.0;
  Batch b;
  for (const auto& s : samples) b.push_back(&s);
  const Eigen::MatrixXd act = net.predict(stack_inputs(b));
  const geometry::Fingertips roots = geometry::finger_roots(hand);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const geometry::Fingertips got =
        geometry::fk_fingertips(hand, geometry::expand_coupling(hand, act.col(static_cast<Eigen::Index>(i))));
    const geometry::Fingertips want =
        geometry::fk_fingertips(hand, geometry::expand_coupling(hand, samples[i].q_true));
    for (std::size_t f = 1; f < 5; ++f) acc += ((got[f] - roots[f]) - (want[f] - roots[f])).squaredNorm();
  }
  return std::sqrt(acc / (4.0 * static_cast<double>(samples.size())));
}

double mean_human_finger_length(const HumanHandModel& human) {
  double sum = 0.0;
  for (int f = 1; f < kFingerCount; ++f) sum += human_finger_length(human, static_cast<FingerId>(f));
  return sum / 4.0;
}

double mean_mcp_flexion(const RetargetNet& net, const std::vector<HumanHandSample>& samples) {
  if (samples.empty()) return 0.0;
  Batch b;
  for (const auto& s : samples) b.push_back(&s);
  const Eigen::MatrixXd act = net.predict(stack_inputs(b));
  return act.bottomRows(kFingerRows).mean();
}

nn::Checkpoint to_checkpoint(const RetargetNet& net) {
  nn::Checkpoint c;
  c.kind = "retarget";
  if (net.is_joint()) {
    c.networks["joint"] = net.joint;
  } else {
    c.networks["four_finger"] = net.four_finger;
    c.networks["thumb"] = net.thumb;
  }
  std::vector<double> lo(net.lower.data(), net.lower.data() + net.lower.size());
  std::vector<double> hi(net.upper.data(), net.upper.data() + net.upper.size());
  c.metadata = {{"stage", net.stage},
                {"four_finger_frozen", net.four_finger_frozen},
                {"actuated_lower", lo},
                {"actuated_upper", hi}};
  return c;
}

RetargetNet from_checkpoint(const nn::Checkpoint& c) {
  if (c.kind != "retarget") throw nn::CheckpointError("expected a retarget checkpoint, got '" + c.kind + "'");
  RetargetNet net;
  try {
    if (c.networks.count("joint")) {
      net.joint = c.networks.at("joint");
    } else {
      net.four_finger = c.networks.at("four_finger");
      net.thumb = c.networks.at("thumb");
    }
    net.stage = c.metadata.at("stage").get<int>();
    net.four_finger_frozen = c.metadata.at("four_finger_frozen").get<bool>();
    const auto lo = c.metadata.at("actuated_lower").get<std::vector<double>>();
    const auto hi = c.metadata.at("actuated_upper").get<std::vector<double>>();
    if (lo.size() != 6 || hi.size() != 6) throw nn::CheckpointError("retarget checkpoint: bad limit vectors");
    net.lower = Eigen::Map<const Eigen::VectorXd>(lo.data(), 6);
    net.upper = Eigen::Map<const Eigen::VectorXd>(hi.data(), 6);
  } catch (const std::out_of_range& e) {
    throw nn::CheckpointError(std::string("retarget checkpoint: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw nn::CheckpointError(std::string("retarget checkpoint: ") + e.what());
  }
  return net;
}

}  // namespace dexhil::retarget
