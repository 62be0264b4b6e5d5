#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "dexhil/nn/checkpoint.hpp"
#include "dexhil/nn/mlp.hpp"

namespace dexhil::policy {

struct PolicyConfig {
  int obs_dim = 26;
  int action_dim = 12;  // arm 6 + hand 6
  int horizon = 8;
  std::vector<int> encoder_hidden = {64};
  int context_dim = 32;
  std::vector<int> velocity_hidden = {256, 256};
  int sample_steps = 10;
  /// Chunks are normalised around the current proprioception (the first
  /// action_dim observation entries) instead of a fixed mean. Inputs and
  /// outputs stay absolute joint targets.
  bool relative_to_proprio = false;

  int chunk_size() const { return action_dim * horizon; }
  void validate() const;
};

/// Per-dimension affine map raw -> (raw - mean) / scale.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Normalizer identity(Eigen::Index n);
  /// Columns are samples. Scales below `min_scale` are raised to it.
  static Normalizer fit(const Eigen::MatrixXd& data, double min_scale);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& normalized) const;
};

/// Conditional flow-matching policy. The chunk is a column of H * A entries,
/// step k of joint j at k * A + j. Flow and loss live in normalised action
/// space; sample_action returns raw joint targets.
struct FmPolicy {
  PolicyConfig config;
  nn::MlpParams encoder;   // obs -> context
  nn::MlpParams velocity;  // (x_t, t, context) -> velocity
  Normalizer obs_norm;
  Normalizer act_norm;
  Eigen::VectorXd lower;  // per joint, A entries
  Eigen::VectorXd upper;
  bool normalizer_frozen = false;
};

FmPolicy make_policy(const PolicyConfig& cfg, std::uint64_t seed);

struct PolicyGrad {
  nn::MlpParams encoder;
  nn::MlpParams velocity;

  static PolicyGrad zeros_like(const FmPolicy& p);
};

/// Per-column chunk offset: the observed joint state tiled over the horizon
/// when relative_to_proprio is set, zeros otherwise.
Eigen::MatrixXd proprio_offset(const FmPolicy& p, const Eigen::MatrixXd& obs);

/// u = a - x0, the straight-path target velocity.
Eigen::MatrixXd target_velocity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x0);

/// v_theta(x, t, o) for a batch; x normalised (chunk x B), obs raw.
Eigen::MatrixXd velocity_field(const FmPolicy& p, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& t,
                               const Eigen::MatrixXd& obs);

/// (1/B) sum_b w_b |v(x_t, t, o) - (a - x0)|^2 with x_t = (1 - t) x0 + t a, all
/// in normalised action space. `act` is raw; `weights` may be null (all 1).
/// Gradients are accumulated into `grad` when non-null.
double fm_loss_at(const FmPolicy& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                  const Eigen::RowVectorXd& t, const Eigen::MatrixXd& x0, const Eigen::VectorXd* weights,
                  PolicyGrad* grad);

/// Draws t ~ U(0,1) and x0 ~ N(0, I) from `rng`, then fm_loss_at.
double fm_loss(const FmPolicy& p, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act, std::mt19937_64& rng,
               const Eigen::VectorXd* weights = nullptr, PolicyGrad* grad = nullptr);

/// Euler integration of the field from a given start point; result is raw and
/// clamped to the joint limits. steps <= 0 uses config.sample_steps.
Eigen::VectorXd integrate_from(const FmPolicy& p, const Eigen::VectorXd& obs, const Eigen::VectorXd& x0,
                               int steps = 0);
Eigen::VectorXd sample_action(const FmPolicy& p, const Eigen::VectorXd& obs, std::mt19937_64& rng, int steps = 0);

/// Chunk row k (A entries) of a raw chunk vector.
Eigen::VectorXd chunk_step(const FmPolicy& p, const Eigen::VectorXd& chunk, int k);

/// Concatenated parameter vector (encoder then velocity) and its inverse.
Eigen::VectorXd flat_params(const FmPolicy& p);
void assign_flat_params(FmPolicy& p, const Eigen::VectorXd& values);
Eigen::VectorXd flat_grad(const PolicyGrad& g);

nn::Checkpoint to_checkpoint(const FmPolicy& p);
FmPolicy from_checkpoint(const nn::Checkpoint& c);

}  // namespace dexhil::policy
