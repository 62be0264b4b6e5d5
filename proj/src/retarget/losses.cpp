#include "dexhil/retarget/losses.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dexhil::retarget {

using geometry::FingertipJacobian;
using geometry::HandModel;

namespace {

constexpr auto kThumb = static_cast<std::size_t>(FingerId::thumb);

Eigen::Index col(std::size_t b) { return static_cast<Eigen::Index>(b); }

void check_batch(const Batch& batch, const Eigen::MatrixXd& act, const char* what) {
  if (batch.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
  if (act.cols() != static_cast<Eigen::Index>(batch.size())) {
    throw geometry::DimensionError(std::string(what) + ": batch/actuated column mismatch");
  }
}

Eigen::MatrixXd zero_grad(const RobotBatch& rb) {
  const Eigen::Index m = rb.fk.empty() ? 0 : rb.fk.front().d_tip[0].cols();
  return Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(rb.fk.size()));
}

}  // namespace

double Stage1LossConfig::s(double d) const { return 1.0 + beta * std::exp(-d / d0); }

void Stage1LossConfig::validate() const {
  if (!(length_scale > 0.0) || !(beta >= 0.0) || !(d0 > 0.0) || !(kappa > 0.0) || !(gamma >= 0.0) ||
      !(epsilon > 0.0)) {
    throw std::invalid_argument("stage-1 loss config: need beta >= 0, d0 > 0, kappa > 0, gamma >= 0, epsilon > 0");
  }
}

double Stage2LossConfig::s(double d) const { return 1.0 + beta * std::exp(-d / d0); }

std::vector<FingerPair> Stage2LossConfig::default_kin_pairs() {
  using F = FingerId;
  return {{F::thumb, F::index},  {F::thumb, F::middle}, {F::thumb, F::ring},
          {F::thumb, F::little}, {F::index, F::middle}, {F::middle, F::ring},
          {F::ring, F::little},  {F::index, F::little}};
}

void Stage2LossConfig::validate() const {
  for (double l : {lambda_dir, lambda_cover, lambda_flat, lambda_pinch, lambda_kin}) {
    if (!(l >= 0.0)) throw std::invalid_argument("stage-2 loss config: weights must be non-negative");
  }
  if (!(length_scale > 0.0) || !(kappa > 0.0) || !(d0 > 0.0) || !(epsilon > 0.0) || !(beta >= 0.0)) {
    throw std::invalid_argument("stage-2 loss config: need kappa, d0, epsilon > 0 and beta >= 0");
  }
  int thumb_pairs = 0, finger_pairs = 0;
  bool seen[kFingerCount] = {};
  for (const auto& [a, b] : kin_pairs) {
    if (a == b) throw std::invalid_argument("stage-2 loss config: degenerate fingertip pair");
    if (a == FingerId::thumb || b == FingerId::thumb) {
      const FingerId other = a == FingerId::thumb ? b : a;
      if (!seen[static_cast<int>(other)]) ++thumb_pairs;
      seen[static_cast<int>(other)] = true;
    } else {
      ++finger_pairs;
    }
  }
  if (thumb_pairs < 4 || finger_pairs < 2) {
    throw std::invalid_argument(
        "stage-2 loss config: pair set needs all four thumb-finger pairs and at least two finger-finger pairs");
  }
}

RobotBatch robot_batch(const HandModel& hand, const Eigen::MatrixXd& act) {
  RobotBatch rb;
  rb.roots = geometry::finger_roots(hand);
  rb.fk.reserve(static_cast<std::size_t>(act.cols()));
  for (Eigen::Index b = 0; b < act.cols(); ++b) rb.fk.push_back(geometry::fingertip_jacobian(hand, act.col(b)));
  return rb;
}

LossGrad stage1_loss(const HandModel& hand, const Batch& batch, const Eigen::MatrixXd& act,
                     const Stage1LossConfig& cfg) {
  check_batch(batch, act, "stage1_loss");
  const RobotBatch rb = robot_batch(hand, act);
  LossGrad out{0.0, zero_grad(rb)};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double u2 = cfg.length_scale * cfg.length_scale;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FingertipJacobian& fk = rb.fk[b];
    double v = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(act.rows());
    for (int f = 1; f < kFingerCount; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      const Eigen::Vector3d rh = batch[b]->finger_vector(static_cast<FingerId>(f));
      const double d = rh.norm();
      const Eigen::Vector3d target = cfg.f(d) * rh / std::max(d, cfg.epsilon);
      const Eigen::Vector3d e = (fk.tips[fi] - rb.roots[fi]) - target;
      const double w = cfg.s(d);
      v += 0.5 * w * u2 * e.squaredNorm();
      g.noalias() += (w * u2) * fk.d_tip[fi].transpose() * e;
    }
    v += cfg.gamma * fk.q.squaredNorm();
    g.noalias() += 2.0 * cfg.gamma * fk.d_q.transpose() * fk.q;
    out.value += inv_b * v;
    out.d_act.col(col(b)) = inv_b * g;
  }
  return out;
}

LossGrad dir_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg) {
  LossGrad out{0.0, zero_grad(rb)};
  std::vector<std::pair<std::size_t, Eigen::Vector3d>> grads;
  for (std::size_t b = 0; b + 1 < batch.size(); ++b) {
    const Eigen::Vector3d dh = batch[b + 1]->tip(FingerId::thumb) - batch[b]->tip(FingerId::thumb);
    const double nh = dh.norm();
    if (nh < cfg.dir_min_displacement) continue;
    const Eigen::Vector3d dr = rb.fk[b + 1].tips[kThumb] - rb.fk[b].tips[kThumb];
    const double nr = dr.norm();
    const double den = nh * nr;
    double cosv;
    Eigen::Vector3d dcos;
    if (den > cfg.epsilon) {
      cosv = dh.dot(dr) / den;
      dcos = dh / den - cosv * dr / (nr * nr);
    } else {
      cosv = dh.dot(dr) / cfg.epsilon;
      dcos = dh / cfg.epsilon;
    }
    out.value += 1.0 - cosv;
    grads.emplace_back(b, -dcos);
  }
  if (grads.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(grads.size());
  out.value *= inv_n;
  for (const auto& [b, g] : grads) {
    out.d_act.col(col(b + 1)) += inv_n * rb.fk[b + 1].d_tip[kThumb].transpose() * g;
    out.d_act.col(col(b)) -= inv_n * rb.fk[b].d_tip[kThumb].transpose() * g;
  }
  return out;
}

LossGrad cover_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg) {
  LossGrad out{0.0, zero_grad(rb)};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double eps2 = cfg.epsilon * cfg.epsilon;
  const double u = cfg.length_scale;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Eigen::Vector3d p = cfg.kappa * batch[b]->tip(FingerId::thumb);
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rb.fk.size(); ++k) {
      const double d2 = (rb.fk[k].tips[kThumb] - p).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    const double r = std::sqrt(u * u * best_d2 + eps2);
    out.value += inv_b * (r - cfg.epsilon);
    const Eigen::Vector3d g = (u * u / r) * (rb.fk[best].tips[kThumb] - p);
    out.d_act.col(col(best)) += inv_b * rb.fk[best].d_tip[kThumb].transpose() * g;
  }
  return out;
}

LossGrad pinch_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg) {
  LossGrad out{0.0, zero_grad(rb)};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FingertipJacobian& fk = rb.fk[b];
    for (int f = 1; f < kFingerCount; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      const double dh = (batch[b]->tip(static_cast<FingerId>(f)) - batch[b]->tip(FingerId::thumb)).norm();
      if (!(dh < cfg.pinch_threshold)) continue;
      const Eigen::Vector3d v = fk.tips[fi] - fk.tips[kThumb];
      const double dr = v.norm();
      const double res = cfg.length_scale * (dr - cfg.kappa * dh);
      const double w = cfg.s(dh);
      out.value += inv_b * w * res * res;
      const Eigen::Vector3d g = (inv_b * 2.0 * w * res * cfg.length_scale / std::max(dr, cfg.epsilon)) * v;
      out.d_act.col(col(b)) += (fk.d_tip[fi] - fk.d_tip[kThumb]).transpose() * g;
    }
  }
  return out;
}

LossGrad kin_loss(const Batch& batch, const RobotBatch& rb, const Stage2LossConfig& cfg) {
  LossGrad out{0.0, zero_grad(rb)};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double u2 = cfg.length_scale * cfg.length_scale;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FingertipJacobian& fk = rb.fk[b];
    for (const auto& [fa, fb] : cfg.kin_pairs) {
      const auto a = static_cast<std::size_t>(fa), c = static_cast<std::size_t>(fb);
      const Eigen::Vector3d vh = batch[b]->tip(fb) - batch[b]->tip(fa);
      const double d = vh.norm();
      const Eigen::Vector3d target = cfg.kappa * d * vh / std::max(d, cfg.epsilon);
      const Eigen::Vector3d e = (fk.tips[c] - fk.tips[a]) - target;
      const double w = cfg.s(d);
      out.value += inv_b * 0.5 * w * u2 * e.squaredNorm();
      out.d_act.col(col(b)) += (inv_b * w * u2) * (fk.d_tip[c] - fk.d_tip[a]).transpose() * e;
    }
  }
  return out;
}

FlatLossGrad flat_loss(const Eigen::MatrixXd& act, const Eigen::MatrixXd& mid) {
  FlatLossGrad out{0.0, Eigen::MatrixXd::Zero(act.rows(), act.cols()),
                   Eigen::MatrixXd::Zero(mid.rows(), mid.cols())};
  const Eigen::Index pairs = act.cols() - 1;
  if (pairs < 1) return out;
  if (mid.cols() != pairs || mid.rows() != act.rows()) {
    throw geometry::DimensionError("flat_loss: midpoint batch must have one column per consecutive pair");
  }
  const double inv_n = 1.0 / static_cast<double>(pairs);
  for (Eigen::Index b = 0; b < pairs; ++b) {
    const Eigen::Vector2d e = act.col(b).head<2>() - 2.0 * mid.col(b).head<2>() + act.col(b + 1).head<2>();
    out.value += inv_n * e.squaredNorm();
    out.d_act.col(b).head<2>() += 2.0 * inv_n * e;
    out.d_act.col(b + 1).head<2>() += 2.0 * inv_n * e;
    out.d_mid.col(b).head<2>() -= 4.0 * inv_n * e;
  }
  return out;
}

Eigen::MatrixXd midpoint_inputs(const Batch& batch) {
  const Eigen::MatrixXd x = stack_inputs(batch);
  if (x.cols() < 2) return Eigen::MatrixXd(x.rows(), 0);
  return 0.5 * (x.leftCols(x.cols() - 1) + x.rightCols(x.cols() - 1));
}

Stage2Result stage2_loss(const HandModel& hand, const Batch& batch, const Eigen::MatrixXd& act,
                         const Eigen::MatrixXd& mid_act, const Stage2LossConfig& cfg) {
  check_batch(batch, act, "stage2_loss");
  const RobotBatch rb = robot_batch(hand, act);
  Stage2Result out;
  out.d_act = Eigen::MatrixXd::Zero(act.rows(), act.cols());
  out.d_mid = Eigen::MatrixXd::Zero(mid_act.rows(), mid_act.cols());

  auto add = [&](double lambda, const LossGrad& lg, double& term) {
    term = lg.value;
    if (lambda == 0.0) return;
    out.total += lambda * lg.value;
    out.d_act += lambda * lg.d_act;
  };
  add(cfg.lambda_dir, dir_loss(batch, rb, cfg), out.terms.dir);
  add(cfg.lambda_cover, cover_loss(batch, rb, cfg), out.terms.cover);
  add(cfg.lambda_pinch, pinch_loss(batch, rb, cfg), out.terms.pinch);
  add(cfg.lambda_kin, kin_loss(batch, rb, cfg), out.terms.kin);

  const FlatLossGrad fl = flat_loss(act, mid_act);
  out.terms.flat = fl.value;
  if (cfg.lambda_flat != 0.0) {
    out.total += cfg.lambda_flat * fl.value;
    out.d_act += cfg.lambda_flat * fl.d_act;
    out.d_mid += cfg.lambda_flat * fl.d_mid;
  }
  return out;
}

}  // namespace dexhil::retarget
