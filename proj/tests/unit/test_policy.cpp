#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "dexhil/nn/gradcheck.hpp"
#include "dexhil/policy/fm_policy.hpp"
#include "dexhil/policy/fm_train.hpp"
#include "dexhil/policy/observation.hpp"

using namespace dexhil;
using namespace dexhil::policy;

namespace {

PolicyConfig scalar_config() {
  PolicyConfig c;
  c.obs_dim = 1;
  c.action_dim = 1;
  c.horizon = 1;
  c.encoder_hidden = {16};
  c.context_dim = 8;
  c.velocity_hidden = {16};
  return c;
}

// Velocity net replaced by a single linear layer: v = W [x; t; ctx] + b.
void make_linear_field(FmPolicy& p, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  nn::DenseLayer l;
  l.weight = w;
  l.bias = b;
  p.velocity.layers = {l};
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> d(0.0, s);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

}  // namespace

TEST_CASE("target velocity is a - x0 for every t") {
  FmPolicy p = make_policy(scalar_config(), 1);
  const int in = p.config.chunk_size() + 1 + p.config.context_dim;
  // v = 1 everywhere: the perfect field for x0 = 0, a = 1
  make_linear_field(p, Eigen::MatrixXd::Zero(1, in), Eigen::VectorXd::Ones(1));
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(1, 5);
  const Eigen::MatrixXd act = Eigen::MatrixXd::Ones(1, 5);
  const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(1, 5);
  Eigen::RowVectorXd t(5);
  t << 0.0, 0.1, 0.5, 0.9, 1.0;
  CHECK(target_velocity(act, x0)(0, 3) == 1.0);
  CHECK(fm_loss_at(p, obs, act, t, x0, nullptr, nullptr) == 0.0);
}

TEST_CASE("path interpolation: t = 0.5, x0 = 0, a = 2 gives x_t = 1") {
  FmPolicy p = make_policy(scalar_config(), 1);
  const int in = p.config.chunk_size() + 1 + p.config.context_dim;
  // v = x_t, so the loss is (x_t - (a - x0))^2
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, in);
  w(0, 0) = 1.0;
  make_linear_field(p, w, Eigen::VectorXd::Zero(1));
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::MatrixXd act = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(1, 1);
  Eigen::RowVectorXd t(1);
  t << 0.5;
  CHECK(fm_loss_at(p, obs, act, t, x0, nullptr, nullptr) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("loss is a batch mean of squared residual norms") {
  std::mt19937_64 rng(3);
  FmPolicy p = make_policy(PolicyConfig{}, 2);
  const Eigen::MatrixXd obs = random_matrix(26, 4, rng);
  const Eigen::MatrixXd act = random_matrix(96, 4, rng);
  const Eigen::MatrixXd x0 = random_matrix(96, 4, rng);
  const Eigen::RowVectorXd t = (Eigen::RowVectorXd(4) << 0.1, 0.4, 0.6, 0.95).finished();
  double sum = 0.0;
  for (int b = 0; b < 4; ++b) {
    const Eigen::RowVectorXd tb = t.segment(b, 1);
    sum += fm_loss_at(p, obs.col(b), act.col(b), tb, x0.col(b), nullptr, nullptr);
  }
  CHECK(fm_loss_at(p, obs, act, t, x0, nullptr, nullptr) == doctest::Approx(sum / 4).epsilon(1e-12));
}

TEST_CASE("Euler sampling closed forms") {
  PolicyConfig cfg = scalar_config();
  cfg.action_dim = 2;
  cfg.horizon = 2;
  FmPolicy p = make_policy(cfg, 4);
  const int in = p.config.chunk_size() + 1 + p.config.context_dim;
  const Eigen::VectorXd obs = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::Vector4d x0(0.5, -1.0, 2.0, 0.25);

  SUBCASE("zero field returns x0") {
    make_linear_field(p, Eigen::MatrixXd::Zero(4, in), Eigen::VectorXd::Zero(4));
    CHECK((integrate_from(p, obs, x0) - x0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("constant field returns x0 + c") {
    const Eigen::Vector4d c(1.0, 0.5, -0.25, 3.0);
    make_linear_field(p, Eigen::MatrixXd::Zero(4, in), c);
    CHECK((integrate_from(p, obs, x0) - (x0 + c)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((integrate_from(p, obs, x0, 3) - (x0 + c)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("clamped to joint limits") {
    make_linear_field(p, Eigen::MatrixXd::Zero(4, in), Eigen::Vector4d(10, -10, 10, -10));
    p.lower = Eigen::Vector2d(-1.0, -2.0);
    p.upper = Eigen::Vector2d(1.0, 2.0);
    const Eigen::VectorXd out = integrate_from(p, obs, x0);
    CHECK(out.isApprox(Eigen::Vector4d(1.0, -2.0, 1.0, -2.0)));
  }
  SUBCASE("sample_action draws x0 from the rng") {
    make_linear_field(p, Eigen::MatrixXd::Zero(4, in), Eigen::VectorXd::Zero(4));
    std::mt19937_64 a(9), b(9);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector4d expect;
    for (int i = 0; i < 4; ++i) expect[i] = n(b);
    CHECK(sample_action(p, obs, a) == expect);
  }
  SUBCASE("normalised space is mapped back") {
    make_linear_field(p, Eigen::MatrixXd::Zero(4, in), Eigen::VectorXd::Zero(4));
    p.act_norm.mean = Eigen::Vector4d(1, 2, 3, 4);
    p.act_norm.scale = Eigen::Vector4d(2, 2, 2, 2);
    CHECK(integrate_from(p, obs, x0).isApprox(Eigen::Vector4d(2, 0, 7, 4.5)));
  }
}

TEST_CASE("chunk layout") {
  FmPolicy p = make_policy(PolicyConfig{}, 1);
  Eigen::VectorXd chunk(96);
  for (int i = 0; i < 96; ++i) chunk[i] = i;
  CHECK(chunk_step(p, chunk, 0)[0] == 0.0);
  CHECK(chunk_step(p, chunk, 3)[5] == 41.0);
  CHECK_THROWS(chunk_step(p, chunk, 8));
}

TEST_CASE("fm loss gradient matches central differences on 100 draws") {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  PolicyConfig cfg;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    FmPolicy p = make_policy(cfg, 100 + draw);
    p.obs_norm.mean = random_matrix(26, 1, rng, 0.2);
    p.act_norm.scale = random_matrix(96, 1, rng, 0.3).cwiseAbs().array() + 0.5;
    const int B = 3;
    const Eigen::MatrixXd obs = random_matrix(26, B, rng);
    const Eigen::MatrixXd act = random_matrix(96, B, rng);
    const Eigen::MatrixXd x0 = random_matrix(96, B, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::RowVectorXd t(B);
    for (int b = 0; b < B; ++b) t[b] = u(rng);
    Eigen::VectorXd w(B);
    for (int b = 0; b < B; ++b) w[b] = 0.5 + 4.5 * u(rng);
    const Eigen::VectorXd* wp = draw % 2 ? &w : nullptr;

    PolicyGrad g = PolicyGrad::zeros_like(p);
    fm_loss_at(p, obs, act, t, x0, wp, &g);
    auto f = [&](const Eigen::VectorXd& theta) {
      FmPolicy q = p;
      assign_flat_params(q, theta);
      return fm_loss_at(q, obs, act, t, x0, wp, nullptr);
    };
    const double err = nn::check_gradient(f, flat_params(p), flat_grad(g), rng).worst();
    worst = std::max(worst, err);
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-4);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::minutes(1));
}

TEST_CASE("weighted two-record gradient is the weighted batch mean") {
  std::mt19937_64 rng(5);
  FmPolicy p = make_policy(PolicyConfig{}, 6);
  const Eigen::MatrixXd obs = random_matrix(26, 2, rng);
  const Eigen::MatrixXd act = random_matrix(96, 2, rng);
  const Eigen::MatrixXd x0 = random_matrix(96, 2, rng);
  const Eigen::RowVectorXd t = (Eigen::RowVectorXd(2) << 0.3, 0.7).finished();
  const Eigen::VectorXd w = Eigen::Vector2d(5.0, 1.0);

  PolicyGrad both = PolicyGrad::zeros_like(p);
  fm_loss_at(p, obs, act, t, x0, &w, &both);
  PolicyGrad g0 = PolicyGrad::zeros_like(p);
  PolicyGrad g1 = PolicyGrad::zeros_like(p);
  fm_loss_at(p, obs.col(0), act.col(0), t.segment(0, 1), x0.col(0), nullptr, &g0);
  fm_loss_at(p, obs.col(1), act.col(1), t.segment(1, 1), x0.col(1), nullptr, &g1);
  const Eigen::VectorXd expect = (5.0 * flat_grad(g0) + 1.0 * flat_grad(g1)) / 2.0;
  CHECK((flat_grad(both) - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
}

TEST_CASE("unit weights train bit-identically to no weights") {
  std::mt19937_64 rng(8);
  FmDataset d;
  d.obs = random_matrix(26, 40, rng);
  d.act = random_matrix(96, 40, rng);
  FmHyper h;
  h.steps = 20;
  h.batch_size = 8;
  FmPolicy a = make_policy(PolicyConfig{}, 3);
  FmPolicy b = a;
  const auto la = train_fm(a, d, h);
  d.weights = Eigen::VectorXd::Ones(40);
  const auto lb = train_fm(b, d, h);
  CHECK(la == lb);
  CHECK(flat_params(a) == flat_params(b));
}

TEST_CASE("head-only training leaves the encoder untouched") {
  std::mt19937_64 rng(8);
  FmDataset d;
  d.obs = random_matrix(26, 10, rng);
  d.act = random_matrix(96, 10, rng);
  FmHyper h;
  h.steps = 5;
  h.batch_size = 4;
  h.head_only = true;
  FmPolicy p = make_policy(PolicyConfig{}, 3);
  const nn::MlpParams enc = p.encoder;
  const Eigen::VectorXd vel = p.velocity.flat();
  train_fm(p, d, h);
  CHECK(p.encoder.flat() == enc.flat());
  CHECK(p.velocity.flat() != vel);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  FmPolicy p = make_policy(PolicyConfig{}, 12);
  const Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(26, -1.0, 1.0);
  std::mt19937_64 a(4), b(4);
  CHECK(sample_action(p, obs, a) == sample_action(p, obs, b));
}

TEST_CASE("deterministic 1-D target: sample mean lands on a*") {
  PolicyConfig cfg = scalar_config();
  cfg.encoder_hidden = {32};
  cfg.velocity_hidden = {64, 64};
  FmPolicy p = make_policy(cfg, 21);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto a_star = [](double o) { return 0.8 * o + 0.3; };
  FmDataset d;
  d.obs.resize(1, 512);
  d.act.resize(1, 512);
  for (int i = 0; i < 512; ++i) {
    d.obs(0, i) = u(rng);
    d.act(0, i) = a_star(d.obs(0, i));
  }
  fit_normalizers(p, d);
  FmHyper h;
  h.steps = 3000;
  h.learning_rate = 3e-3;
  h.final_lr_fraction = 0.05;
  train_fm(p, d, h);
  for (double o : {-0.6, 0.0, 0.7}) {
    double mean = 0.0;
    for (int k = 0; k < 1000; ++k) mean += sample_action(p, Eigen::VectorXd::Constant(1, o), rng)[0];
    mean /= 1000;
    CHECK(std::abs(mean - a_star(o)) < 0.05);
  }
}

TEST_CASE("conditional Gaussian recovery") {
  const auto start = std::chrono::steady_clock::now();
  PolicyConfig cfg = scalar_config();
  cfg.encoder_hidden = {32};
  cfg.velocity_hidden = {64, 64};
  FmPolicy p = make_policy(cfg, 31);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  auto mu = [](double o) { return std::sin(2.0 * o); };
  const int N = 4000;
  FmDataset d;
  d.obs.resize(1, N);
  d.act.resize(1, N);
  for (int i = 0; i < N; ++i) {
    d.obs(0, i) = u(rng);
    d.act(0, i) = mu(d.obs(0, i)) + noise(rng);
  }
  fit_normalizers(p, d);
  FmHyper h;
  h.steps = 6000;
  h.batch_size = 128;
  h.learning_rate = 3e-3;
  h.final_lr_fraction = 0.05;
  train_fm(p, d, h);

  for (double o : {-0.75, -0.25, 0.25, 0.75}) {
    const int S = 2000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < S; ++k) {
      const double a = sample_action(p, Eigen::VectorXd::Constant(1, o), rng)[0];
      s1 += a;
      s2 += a * a;
    }
    const double mean = s1 / S;
    const double sd = std::sqrt(std::max(0.0, s2 / S - mean * mean));
    INFO("o=" << o << " mean=" << mean << " sd=" << sd);
    CHECK(std::abs(mean - mu(o)) < 0.1);
    CHECK(sd >= 0.05);
    CHECK(sd <= 0.2);
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::minutes(5));
}

TEST_CASE("normalizer fit and round trip") {
  Eigen::MatrixXd data(2, 4);
  data << 1, 2, 3, 4, 5, 5, 5, 5;
  const Normalizer n = Normalizer::fit(data, 1e-2);
  CHECK(n.mean[0] == 2.5);
  CHECK(n.scale[0] == doctest::Approx(std::sqrt(1.25)));
  CHECK(n.scale[1] == 1e-2);
  CHECK(n.invert(n.apply(data)).isApprox(data));
}

TEST_CASE("policy checkpoint round trip is exact") {
  FmPolicy p = make_policy(PolicyConfig{}, 13);
  p.obs_norm.mean.setConstant(0.25);
  p.lower.setConstant(-2.0);
  p.upper.setConstant(2.0);
  p.normalizer_frozen = true;
  const auto path = std::filesystem::temp_directory_path() / "dexhil_policy_ckpt.json";
  nn::save_checkpoint(path, to_checkpoint(p));
  const FmPolicy q = from_checkpoint(nn::load_checkpoint(path));
  std::filesystem::remove(path);
  CHECK(flat_params(q) == flat_params(p));
  CHECK(q.obs_norm.mean == p.obs_norm.mean);
  CHECK(q.lower == p.lower);
  CHECK(q.normalizer_frozen);
  const Eigen::VectorXd obs = Eigen::VectorXd::Constant(26, 0.1);
  std::mt19937_64 a(1), b(1);
  CHECK(sample_action(p, obs, a) == sample_action(q, obs, b));

  nn::Checkpoint wrong = to_checkpoint(p);
  wrong.kind = "retarget";
  CHECK_THROWS_AS(from_checkpoint(wrong), nn::CheckpointError);
}

TEST_CASE("observation layout") {
  ObservationFeatures f;
  f.q_arm = Eigen::VectorXd::Constant(6, 0.1);
  f.hand = Eigen::VectorXd::Constant(6, 0.2);
  f.object = Eigen::Vector3d(0.4, 0.0, 0.1);
  f.grasp_point = Eigen::Vector3d(0.4, 0.01, 0.2);
  f.size = 0.03;
  f.progress = 0.6;
  f.held = true;
  f.task = TaskId::plush_grasp;
  const Eigen::VectorXd o = make_observation(f);
  using L = ObservationLayout;
  CHECK(o.size() == 26);
  CHECK(o[L::object_rel + 1] == doctest::Approx(-0.01));
  CHECK(o[L::object_rel + 2] == doctest::Approx(-0.1));
  CHECK(o[L::held] == 1.0);
  CHECK(o[L::task] == 0.0);
  CHECK(o[L::task + 1] == 1.0);
  CHECK(observation_schema()["dim"] == 26);
  f.size = std::nan("");
  CHECK_THROWS_AS(make_observation(f), std::invalid_argument);
  CHECK(task_from_name("pinch") == TaskId::tissue_extraction);
  CHECK_THROWS(task_from_name("cup"));
}
