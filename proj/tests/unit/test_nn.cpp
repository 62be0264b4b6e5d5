#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dexhil/nn/checkpoint.hpp"
#include "dexhil/nn/gradcheck.hpp"
#include "dexhil/nn/hash.hpp"
#include "dexhil/nn/mlp.hpp"
#include "dexhil/nn/optim.hpp"

using namespace dexhil::nn;

namespace {

// Scalar loop re-implementation of a dense network.
std::vector<double> naive_forward(const MlpParams& p, std::vector<double> x) {
  for (const DenseLayer& l : p.layers) {
    std::vector<double> y(static_cast<std::size_t>(l.out()));
    for (Eigen::Index r = 0; r < l.out(); ++r) {
      double s = l.bias[r];
      for (Eigen::Index c = 0; c < l.in(); ++c) s += l.weight(r, c) * x[static_cast<std::size_t>(c)];
      switch (l.activation) {
        case Activation::tanh: s = std::tanh(s); break;
        case Activation::relu: s = s > 0.0 ? s : 0.0; break;
        case Activation::identity: break;
      }
      y[static_cast<std::size_t>(r)] = s;
    }
    x = std::move(y);
  }
  return x;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

TEST_CASE("forward") {
  std::mt19937_64 rng(1);
  SUBCASE("zero weights and biases give zero output") {
    MlpParams p = make_mlp({4, 8, 3}, Activation::tanh, rng).zeros_like();
    CHECK(forward(p, random_vector(4, rng)).isZero(0.0));
  }
  SUBCASE("single identity layer passes the input through") {
    MlpParams p;
    DenseLayer l;
    l.weight = Eigen::MatrixXd::Identity(5, 5);
    l.bias = Eigen::VectorXd::Zero(5);
    p.layers.push_back(l);
    const Eigen::VectorXd x = random_vector(5, rng);
    CHECK(forward(p, x) == x);
  }
  SUBCASE("random networks match the scalar oracle") {
    for (Activation a : {Activation::tanh, Activation::relu}) {
      for (int trial = 0; trial < 20; ++trial) {
        const MlpParams p = make_mlp({7, 16, 9, 4}, a, rng);
        const Eigen::VectorXd x = random_vector(7, rng);
        const Eigen::VectorXd y = forward(p, x);
        const std::vector<double> ref = naive_forward(p, std::vector<double>(x.data(), x.data() + 7));
        for (int i = 0; i < 4; ++i) CHECK(std::abs(y[i] - ref[static_cast<std::size_t>(i)]) < 1e-12);
      }
    }
  }
  SUBCASE("batched evaluation equals per-column evaluation") {
    const MlpParams p = make_mlp({3, 6, 2}, Activation::tanh, rng);
    Eigen::MatrixXd xs(3, 5);
    for (int c = 0; c < 5; ++c) xs.col(c) = random_vector(3, rng);
    const Eigen::MatrixXd ys = forward_batch(p, xs);
    for (int c = 0; c < 5; ++c) CHECK((ys.col(c) - forward(p, xs.col(c))).norm() < 1e-14);
  }
  SUBCASE("input length mismatch") {
    const MlpParams p = make_mlp({3, 6, 2}, Activation::tanh, rng);
    CHECK_THROWS_AS(forward(p, Eigen::VectorXd::Zero(4)), DimensionError);
  }
}

TEST_CASE("initialisation bounds and layer validation") {
  std::mt19937_64 rng(2);
  const MlpParams p = make_mlp({10, 30, 5}, Activation::relu, rng);
  CHECK(p.layer_sizes() == std::vector<int>{10, 30, 5});
  CHECK(p.parameter_count() == 10u * 30u + 30u + 30u * 5u + 5u);
  CHECK(p.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 40.0));
  CHECK(p.layers[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 35.0));
  CHECK(p.layers[0].bias.isZero(0.0));
  CHECK(p.layers.back().activation == Activation::identity);

  MlpParams bad = p;
  bad.layers[1].weight.resize(5, 29);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
}

TEST_CASE("backward") {
  std::mt19937_64 rng(3);
  SUBCASE("loss = |params|^2 gives 2 params") {
    const MlpParams p = make_mlp({3, 4, 2}, Activation::tanh, rng);
    const Eigen::VectorXd theta = p.flat();
    const Eigen::VectorXd analytic = 2.0 * theta;
    const auto loss = [](const Eigen::VectorXd& t) { return t.squaredNorm(); };
    CHECK(check_gradient(loss, theta, analytic, rng).worst() < 1e-6);
  }
  SUBCASE("a weight feeding a zero input has zero partial") {
    MlpParams p;
    DenseLayer l;
    l.weight = random_vector(3, rng).transpose();
    l.bias = Eigen::VectorXd::Zero(1);
    p.layers.push_back(l);
    Eigen::MatrixXd x(3, 1);
    x << 0.7, 0.0, -1.1;
    GradientTape tape;
    forward_batch(p, x, tape);
    MlpParams g = p.zeros_like();
    backward(p, tape, Eigen::MatrixXd::Ones(1, 1), g);
    CHECK(g.layers[0].weight(0, 1) == 0.0);
    CHECK(g.layers[0].weight(0, 0) == doctest::Approx(0.7));
  }
  SUBCASE("constant loss has zero gradient") {
    const MlpParams p = make_mlp({3, 4, 2}, Activation::tanh, rng);
    GradientTape tape;
    forward_batch(p, Eigen::MatrixXd::Random(3, 6), tape);
    MlpParams g = p.zeros_like();
    backward(p, tape, Eigen::MatrixXd::Zero(2, 6), g);
    CHECK(g.flat().isZero(0.0));
  }
  SUBCASE("squared-output loss on random batches agrees with central differences") {
    for (Activation a : {Activation::tanh, Activation::relu}) {
      for (int trial = 0; trial < 100; ++trial) {
        MlpParams p = make_mlp({5, 12, 7, 3}, a, rng);
        Eigen::MatrixXd x(5, 4), target(3, 4);
        for (int c = 0; c < 4; ++c) {
          x.col(c) = random_vector(5, rng);
          target.col(c) = random_vector(3, rng);
        }
        GradientTape tape;
        const Eigen::MatrixXd y = forward_batch(p, x, tape);
        MlpParams g = p.zeros_like();
        Eigen::MatrixXd gin;
        backward(p, tape, (y - target) / 4.0, g, &gin);
        const auto loss = [&](const Eigen::VectorXd& t) {
          MlpParams q = p;
          q.assign_flat(t);
          return 0.5 * (forward_batch(q, x) - target).squaredNorm() / 4.0;
        };
        CHECK(check_gradient(loss, p.flat(), g.flat(), rng).worst() < 1e-4);
        // input gradient, one coordinate
        const double h = 1e-5;
        Eigen::MatrixXd xp = x, xm = x;
        xp(2, 1) += h;
        xm(2, 1) -= h;
        const double fd = (0.5 * (forward_batch(p, xp) - target).squaredNorm() -
                           0.5 * (forward_batch(p, xm) - target).squaredNorm()) /
                          (4.0 * 2 * h);
        CHECK(relative_error(fd, gin(2, 1), 1e-6) < 1e-4);
      }
    }
  }
  SUBCASE("gradients accumulate across calls") {
    const MlpParams p = make_mlp({2, 3, 1}, Activation::tanh, rng);
    GradientTape tape;
    forward_batch(p, Eigen::MatrixXd::Random(2, 3), tape);
    MlpParams once = p.zeros_like(), twice = p.zeros_like();
    const Eigen::MatrixXd og = Eigen::MatrixXd::Ones(1, 3);
    backward(p, tape, og, once);
    backward(p, tape, og, twice);
    backward(p, tape, og, twice);
    CHECK((twice.flat() - 2.0 * once.flat()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("sgd_step") {
  Eigen::VectorXd theta(1), grad(1);
  theta << 1.0;
  grad << 2.0;
  CHECK(sgd_step(theta, grad, 0.0) == theta);
  CHECK(sgd_step(theta, grad, 0.1)[0] == doctest::Approx(0.8));

  SUBCASE("100 steps on (theta-3)^2 with eta 0.1") {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(1);
    double prev = 9.0;
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd g(1);
      g << 2.0 * (t[0] - 3.0);
      t = sgd_step(t, g, 0.1);
      const double l = (t[0] - 3.0) * (t[0] - 3.0);
      CHECK(l < prev);
      prev = l;
    }
    // error contracts by 0.8 per step: 3 * 0.8^100
    CHECK(std::abs(t[0] - 3.0) < 1e-6);
    CHECK(std::abs(t[0] - 3.0) == doctest::Approx(3.0 * std::pow(0.8, 100)).epsilon(1e-6));
  }
  SUBCASE("stateful optimizer in sgd mode matches the free function") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 0.1;
    Optimizer opt(1, cfg);
    Eigen::VectorXd t = theta;
    opt.step(t, grad);
    CHECK(t[0] == doctest::Approx(0.8));
  }
}

TEST_CASE("adam") {
  OptimizerConfig cfg;
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.999);
  CHECK(cfg.epsilon == 1e-8);
  cfg.learning_rate = 0.05;
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    Optimizer opt(2, cfg);
    Eigen::VectorXd t(2), g(2);
    t << 1.0, -1.0;
    g << 4.0, -0.01;
    opt.step(t, g);
    CHECK(t[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-6));
    CHECK(t[1] == doctest::Approx(-1.0 + 0.05).epsilon(1e-4));
  }
  SUBCASE("decreases a convex quadratic") {
    Optimizer opt(3, cfg);
    Eigen::VectorXd t = Eigen::VectorXd::Constant(3, 2.0);
    const auto f = [](const Eigen::VectorXd& v) { return v.squaredNorm(); };
    for (int i = 0; i < 500; ++i) opt.step(t, 2.0 * t);
    CHECK(f(t) < 1e-3);
  }
  SUBCASE("non-finite gradient is rejected") {
    Optimizer opt(1, cfg);
    Eigen::VectorXd t = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd g(1);
    g << std::nan("");
    CHECK_THROWS_AS(opt.step(t, g), NumericError);
  }
}

TEST_CASE("determinism: same seed gives bit-identical training") {
  const auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MlpParams p = make_mlp({4, 16, 2}, Activation::tanh, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 8);
    std::normal_distribution<double> n;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    Optimizer opt(static_cast<Eigen::Index>(p.parameter_count()), OptimizerConfig{});
    Eigen::VectorXd theta = p.flat();
    for (int step = 0; step < 50; ++step) {
      p.assign_flat(theta);
      GradientTape tape;
      const Eigen::MatrixXd y = forward_batch(p, x, tape);
      MlpParams g = p.zeros_like();
      backward(p, tape, y / 8.0, g);
      opt.step(theta, g.flat());
    }
    return theta;
  };
  const Eigen::VectorXd a = run(42), b = run(42), c = run(43);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("flatten and unflatten over several networks") {
  std::mt19937_64 rng(4);
  MlpParams a = make_mlp({2, 3, 1}, Activation::tanh, rng);
  MlpParams b = make_mlp({3, 2}, Activation::tanh, rng);
  const Eigen::VectorXd v = flatten({&a, &b});
  CHECK(v.size() == static_cast<Eigen::Index>(a.parameter_count() + b.parameter_count()));
  MlpParams a2 = a.zeros_like(), b2 = b.zeros_like();
  unflatten(v, {&a2, &b2});
  CHECK(a2.flat() == a.flat());
  CHECK(b2.flat() == b.flat());
  CHECK_THROWS_AS(unflatten(v.head(v.size() - 1), {&a2, &b2}), DimensionError);
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update("a");
  h.update("bc");
  CHECK(h.hex_digest() == sha256_hex("abc"));
}

TEST_CASE("checkpoint") {
  std::mt19937_64 rng(5);
  Checkpoint c;
  c.kind = "test";
  c.networks["enc"] = make_mlp({6, 8, 3}, Activation::relu, rng);
  c.networks["head"] = make_mlp({3, 5, 2}, Activation::tanh, rng);
  // values whose shortest decimal form needs all 17 digits
  c.networks["head"].layers[0].bias[0] = 0.1 + 0.2;
  c.networks["head"].layers[0].bias[1] = std::nextafter(1.0, 2.0);
  c.metadata = {{"stage", 1}, {"note", "x"}};

  const auto dir = std::filesystem::temp_directory_path() / "dexhil_test_nn";
  std::filesystem::remove_all(dir);
  const auto path = dir / "ckpt.json";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.kind == "test");
  CHECK(back.metadata == c.metadata);
  for (const auto& [name, net] : c.networks) {
    const MlpParams& other = back.networks.at(name);
    CHECK(other.layer_sizes() == net.layer_sizes());
    CHECK(other.flat() == net.flat());
    for (std::size_t k = 0; k < net.layers.size(); ++k) CHECK(other.layers[k].activation == net.layers[k].activation);
  }
  CHECK(content_hash(back) == content_hash(c));

  SUBCASE("tampered weights fail the hash check") {
    auto j = checkpoint_to_json(c);
    j["networks"]["enc"]["layers"][0]["weight"][0][0] = 0.123;
    CHECK_THROWS_AS(checkpoint_from_json(j), CheckpointError);
  }
  SUBCASE("shape mismatch is reported") {
    auto j = checkpoint_to_json(c);
    j["networks"]["enc"]["layers"][0]["bias"].erase(0);
    CHECK_THROWS_AS(checkpoint_from_json(j), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "nope.json"), CheckpointError);
  }
  std::filesystem::remove_all(dir);
}
