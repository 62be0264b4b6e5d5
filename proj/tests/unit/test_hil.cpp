#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dexhil/hil/dataset.hpp"
#include "dexhil/hil/filter.hpp"
#include "dexhil/hil/pipeline.hpp"
#include "dexhil/hil/training.hpp"
#include "dexhil/hil/weighting.hpp"
#include "fixtures.hpp"

using namespace dexhil;
using namespace dexhil::hil;

namespace {

constexpr int kInt = static_cast<int>(Category::intervention);

TrajectoryRecord make_record(const std::string& ep, long t, int flag, bool offline, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TrajectoryRecord r;
  r.episode = ep;
  r.t = t;
  r.obs = Eigen::VectorXd::NullaryExpr(26, [&] { return u(rng); });
  r.q_arm = Eigen::VectorXd::NullaryExpr(6, [&] { return u(rng); });
  r.q_hand = Eigen::VectorXd::NullaryExpr(6, [&] { return u(rng); });
  r.intervention = offline ? 0 : flag;
  r.category = offline ? Category::offline : (flag ? Category::intervention : Category::autonomous);
  return r;
}

// Online episode of `len` ticks with I_t = 1 inside the given inclusive windows.
Episode make_episode(const std::string& id, long len, const std::vector<std::pair<long, long>>& windows,
                     teleop::Outcome outcome, std::mt19937_64& rng) {
  Episode e;
  e.id = id;
  e.outcome = outcome;
  for (long t = 0; t < len; ++t) {
    int flag = 0;
    for (const auto& [a, b] : windows) flag |= (t >= a && t <= b);
    e.records.push_back(make_record(id, t, flag, false, rng));
  }
  return e;
}

// Scans backwards from the end: the last flagged tick, then back to where the
// flag run began.
std::vector<long> scan_oracle(const Episode& e) {
  std::vector<long> kept;
  if (!e.success()) return kept;
  long last = -1;
  for (long k = static_cast<long>(e.records.size()) - 1; k >= 0; --k) {
    if (e.records[k].intervention == 1) {
      last = k;
      break;
    }
  }
  long start = 0;
  if (last >= 0) {
    start = last;
    while (start > 0 && e.records[start - 1].intervention == 1) --start;
  }
  for (long k = start; k < static_cast<long>(e.records.size()); ++k) kept.push_back(e.records[k].t);
  return kept;
}

CategoryCounts counts_of(long off, long aut, long in) { return {off, aut, in}; }

}  // namespace

TEST_CASE("weights: ten percent interventions get weight five") {
  const auto w = compute_weights(counts_of(60, 30, 10), {});
  CHECK(w[kInt] == 5.0);
  // the remainder is split by mass, so both other categories get 0.5 / 0.9
  CHECK(w[0] == doctest::Approx(0.5 / 0.9).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.5 / 0.9).epsilon(1e-15));
  CHECK(compute_weights(counts_of(90, 0, 10), {})[kInt] == 5.0);
}

TEST_CASE("weights: already balanced data keeps weight one") {
  const auto w = compute_weights(counts_of(30, 20, 50), {});
  CHECK(w[kInt] == 1.0);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("weights: the identity target gives all ones exactly") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> n(1, 5000);
  for (int k = 0; k < 200; ++k) {
    const CategoryCounts c = counts_of(n(rng), n(rng), n(rng));
    const double N = static_cast<double>(c[0] + c[1] + c[2]);
    WeightingConfig cfg;
    cfg.target = std::array<double, kCategoryCount>{c[0] / N, c[1] / N, c[2] / N};
    const auto w = compute_weights(c, cfg);
    for (double x : w) REQUIRE(x == 1.0);
  }
}

TEST_CASE("weights: the weighted mass is one for any dataset") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<long> n(1, 100000);
  std::uniform_real_distribution<double> p(0.05, 0.9);
  for (int k = 0; k < 500; ++k) {
    const CategoryCounts c = counts_of(n(rng), n(rng), n(rng));
    WeightingConfig cfg;
    cfg.p_intervention = p(rng);
    CHECK(weighted_mass(c, compute_weights(c, cfg)) == doctest::Approx(1.0).epsilon(1e-12));
    const double a = p(rng) * 0.5, b = p(rng) * 0.5;
    cfg.target = std::array<double, kCategoryCount>{a, b, 1.0 - a - b};
    CHECK(weighted_mass(c, compute_weights(c, cfg)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // with no autonomous data the default target leaves it at zero mass
  const CategoryCounts c = counts_of(100, 0, 7);
  CHECK(weighted_mass(c, compute_weights(c, {})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weights: configuration errors") {
  CHECK_THROWS_AS(compute_weights(counts_of(100, 20, 0), {}), WeightingError);
  WeightingConfig bad;
  bad.p_intervention = 1.0;
  CHECK_THROWS_AS(compute_weights(counts_of(1, 1, 1), bad), WeightingError);
  WeightingConfig sum;
  sum.target = std::array<double, kCategoryCount>{0.3, 0.3, 0.3};
  CHECK_THROWS_AS(compute_weights(counts_of(1, 1, 1), sum), WeightingError);
  WeightingConfig explicit_target;
  explicit_target.target = std::array<double, kCategoryCount>{0.25, 0.25, 0.5};
  CHECK_THROWS_AS(compute_weights(counts_of(10, 0, 10), explicit_target), WeightingError);
}

TEST_CASE("weights: Monte-Carlo intervention share is one half") {
  std::vector<Category> records;
  for (int k = 0; k < 600; ++k) records.push_back(Category::offline);
  for (int k = 0; k < 300; ++k) records.push_back(Category::autonomous);
  for (int k = 0; k < 100; ++k) records.push_back(Category::intervention);
  const auto w = compute_weights(counts_of(600, 300, 100), {});
  std::mt19937_64 rng(9);
  const double share = effective_share(records, w, 10000, 64, rng);
  CHECK(share == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
  std::mt19937_64 rng2(9);
  const double raw = effective_share(records, {1.0, 1.0, 1.0}, 10000, 64, rng2);
  CHECK(raw == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("filter: example windows") {
  std::mt19937_64 rng(1);
  const Episode e = make_episode("e", 100, {{10, 20}, {50, 60}}, teleop::Outcome::success, rng);
  const auto w = e.intervention_windows();
  REQUIRE(w.size() == 2);
  CHECK(w[1] == std::pair<long, long>(50, 60));
  const auto kept = filter_terminal_segment(e);
  REQUIRE(kept.size() == 50);
  CHECK(kept.front().t == 50);
  CHECK(kept.back().t == 99);
  for (const auto& r : kept) CHECK(r.t >= 50);
  // records come through unchanged
  CHECK(kept.front() == e.records[50]);
}

TEST_CASE("filter: zero-intervention and failed episodes") {
  std::mt19937_64 rng(2);
  const Episode clean = make_episode("c", 80, {}, teleop::Outcome::success, rng);
  CHECK(filter_terminal_segment(clean) == clean.records);
  const Episode failed = make_episode("f", 80, {{5, 9}}, teleop::Outcome::failure, rng);
  CHECK(filter_terminal_segment(failed).empty());
  const Episode timeout = make_episode("t", 80, {}, teleop::Outcome::running, rng);
  CHECK(filter_terminal_segment(timeout).empty());
}

TEST_CASE("filter: random episodes match the window-scan oracle") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<long> len(1, 300);
  std::uniform_int_distribution<int> nwin(0, 4);
  std::bernoulli_distribution ok(0.8);
  for (int k = 0; k < 300; ++k) {
    const long n = len(rng);
    std::vector<std::pair<long, long>> windows;
    std::uniform_int_distribution<long> at(0, n - 1);
    for (int w = nwin(rng); w > 0; --w) {
      long a = at(rng), b = at(rng);
      if (a > b) std::swap(a, b);
      windows.emplace_back(a, b);
    }
    const Episode e = make_episode("r" + std::to_string(k), n, windows,
                                   ok(rng) ? teleop::Outcome::success : teleop::Outcome::failure, rng);
    std::vector<long> got;
    for (const auto& r : filter_terminal_segment(e)) got.push_back(r.t);
    REQUIRE(got == scan_oracle(e));
    const auto wins = e.intervention_windows();
    if (e.success() && !wins.empty()) {
      for (long t : got) REQUIRE(t >= wins.back().first);
    }
  }
}

TEST_CASE("aggregation appends without touching records") {
  std::mt19937_64 rng(5);
  Dataset a, b;
  a.episodes.push_back(make_episode("a0", 30, {{3, 8}}, teleop::Outcome::success, rng));
  b.episodes.push_back(make_episode("b0", 20, {}, teleop::Outcome::success, rng));
  b.episodes.push_back(make_episode("b1", 25, {{0, 24}}, teleop::Outcome::success, rng));
  const Dataset before = a;
  const Dataset c = Dataset::aggregate(a, b);
  CHECK(c.record_count() == a.record_count() + b.record_count());
  CHECK(c.episodes[0].records == before.episodes[0].records);
  CHECK(c.episodes[2].records == b.episodes[1].records);
  const auto n = c.counts();
  CHECK(n[kInt] == 6 + 25);
  CHECK(n[0] + n[1] + n[2] == 75);
}

TEST_CASE("chunks are built from the following commands of the same episode") {
  std::mt19937_64 rng(6);
  Dataset d;
  d.episodes.push_back(make_episode("x", 5, {{1, 2}}, teleop::Outcome::success, rng));
  d.episodes.push_back(make_episode("y", 3, {}, teleop::Outcome::success, rng));
  const auto fm = to_fm_dataset(d, 4, {0.5, 2.0, 5.0});
  REQUIRE(fm.size() == 8);
  CHECK(fm.act.rows() == 48);
  // record x[3]: steps 3, 4, 4, 4
  for (int h = 0; h < 4; ++h) {
    const auto& src = d.episodes[0].records[std::min(3 + h, 4)];
    CHECK(fm.act.block(h * 12, 3, 6, 1) == src.q_arm);
    CHECK(fm.act.block(h * 12 + 6, 3, 6, 1) == src.q_hand);
  }
  // y[0] never reads from x
  CHECK(fm.act.block(0, 5, 6, 1) == d.episodes[1].records[0].q_arm);
  CHECK(fm.weights[1] == 5.0);
  CHECK(fm.weights[0] == 2.0);
  CHECK(fm.obs.col(7) == d.episodes[1].records[2].obs);
}

TEST_CASE("dataset files round-trip with verified hashes") {
  std::mt19937_64 rng(8);
  Dataset d;
  d.episodes.push_back(make_episode("ep_a", 12, {{2, 4}}, teleop::Outcome::success, rng));
  d.episodes.push_back(make_episode("ep_b", 7, {}, teleop::Outcome::success, rng));
  d.episodes[1].round = 2;
  d.episodes[1].spawn_seed = 99;
  const auto dir = std::filesystem::temp_directory_path() / "dexhil_test_dataset";
  std::filesystem::remove_all(dir);
  const auto manifest = write_dataset(dir, d);
  CHECK(manifest["records"] == 19);
  CHECK(manifest["counts"]["intervention"] == 3);
  const Dataset back = read_dataset(dir);
  REQUIRE(back.episodes.size() == 2);
  CHECK(back.episodes[0].records == d.episodes[0].records);
  CHECK(back.episodes[1].round == 2);
  CHECK(back.episodes[1].spawn_seed == 99);
  CHECK(back.episodes[1].success());
  // rewriting gives the same manifest
  CHECK(write_dataset(dir, back) == manifest);
  {
    std::ofstream(dir / "ep_b.jsonl", std::ios::app) << "\n";
  }
  CHECK_THROWS_AS(read_dataset(dir), DatasetError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("records reject inconsistent flags") {
  std::mt19937_64 rng(10);
  auto j = record_to_json(make_record("e", 0, 1, false, rng));
  CHECK_NOTHROW(record_from_json(j));
  j["category"] = "autonomous";
  CHECK_THROWS_AS(record_from_json(j), DatasetError);
  j["category"] = "offline";
  CHECK_THROWS_AS(record_from_json(j), DatasetError);
  j["I"] = 2;
  CHECK_THROWS_AS(record_from_json(j), DatasetError);
}

namespace {

Dataset tiny_dataset(std::mt19937_64& rng) {
  Dataset d;
  Episode off = make_episode("o", 20, {}, teleop::Outcome::success, rng);
  for (auto& r : off.records) r.category = Category::offline;
  off.offline = true;
  d.episodes.push_back(off);
  d.episodes.push_back(make_episode("n", 20, {{5, 9}}, teleop::Outcome::success, rng));
  return d;
}

policy::PolicyConfig small_policy() {
  policy::PolicyConfig c;
  c.velocity_hidden = {32};
  c.encoder_hidden = {16};
  c.context_dim = 8;
  c.relative_to_proprio = true;
  return c;
}

}  // namespace

TEST_CASE("weighted update with unit weights is bit-identical to unweighted training") {
  std::mt19937_64 rng(11);
  const Dataset d = tiny_dataset(rng);
  policy::FmPolicy p = policy::make_policy(small_policy(), 3);
  policy::fit_normalizers(p, to_fm_dataset(d, 8));
  policy::FmHyper h;
  h.steps = 50;
  h.batch_size = 8;
  TrainLog a, b;
  const auto pa = weighted_update(p, d, {}, h, &a);
  const auto pb = weighted_update(p, d, {1.0, 1.0, 1.0}, h, &b);
  CHECK(a.loss == b.loss);
  CHECK(policy::flat_params(pa) == policy::flat_params(pb));
  // and differs once interventions are up-weighted
  const auto pc = weighted_update(p, d, {1.0, 1.0, 5.0}, h);
  CHECK_FALSE(policy::flat_params(pc) == policy::flat_params(pa));
  // the previous policy is untouched
  CHECK_FALSE(policy::flat_params(p) == policy::flat_params(pa));
}

TEST_CASE("weighted batch gradient sums per-record contributions") {
  std::mt19937_64 rng(12);
  Dataset d;
  Episode e = make_episode("m", 2, {{0, 0}}, teleop::Outcome::success, rng);
  e.records[1].category = Category::offline;
  e.records[1].intervention = 0;
  d.episodes.push_back(e);
  policy::FmPolicy p = policy::make_policy(small_policy(), 5);
  const auto fm = to_fm_dataset(d, 8, {1.0, 1.0, 5.0});
  REQUIRE(fm.weights[0] == 5.0);
  REQUIRE(fm.weights[1] == 1.0);
  Eigen::RowVectorXd t(2);
  t << 0.3, 0.7;
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Random(96, 2);
  policy::PolicyGrad g = policy::PolicyGrad::zeros_like(p);
  policy::fm_loss_at(p, fm.obs, fm.act, t, x0, &fm.weights, &g);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(policy::flat_params(p).size());
  for (int b = 0; b < 2; ++b) {
    policy::PolicyGrad gb = policy::PolicyGrad::zeros_like(p);
    policy::fm_loss_at(p, fm.obs.col(b), fm.act.col(b), t.segment(b, 1), x0.col(b), nullptr, &gb);
    expect += fm.weights[b] * policy::flat_grad(gb) / 2.0;
  }
  CHECK((policy::flat_grad(g) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("warm-up rejects online data and is deterministic") {
  std::mt19937_64 rng(13);
  Dataset d = tiny_dataset(rng);
  policy::FmHyper h;
  h.steps = 30;
  h.batch_size = 8;
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(12, -3.0), hi = Eigen::VectorXd::Constant(12, 3.0);
  CHECK_THROWS_AS(warmup_train(d, small_policy(), h, lo, hi, 1), DatasetError);
  d.episodes.pop_back();
  TrainLog a, b;
  const auto pa = warmup_train(d, small_policy(), h, lo, hi, 1, &a);
  const auto pb = warmup_train(d, small_policy(), h, lo, hi, 1, &b);
  CHECK(policy::flat_params(pa) == policy::flat_params(pb));
  CHECK(a.loss == b.loss);
  CHECK(pa.normalizer_frozen);
  CHECK(pa.lower == lo);
  CHECK_THROWS_AS(warmup_train(Dataset{}, small_policy(), h, lo, hi, 1), DatasetError);
}

TEST_CASE("train log statistics") {
  TrainLog l;
  for (int k = 0; k < 100; ++k) l.loss.push_back(k < 10 ? 10.0 : 1.0);
  CHECK(l.head_mean() == 10.0);
  CHECK(l.plateau_mean() == 1.0);
}

TEST_CASE("pipeline config round-trips and rejects unknown keys") {
  const PipelineConfig c = PipelineConfig::defaults(policy::TaskId::plush_grasp);
  const PipelineConfig back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  auto j = c.to_json();
  j["warmup_hyper"]["stepz"] = 3;
  CHECK_THROWS_AS(PipelineConfig::from_json(j), std::invalid_argument);
  auto k = c.to_json();
  k["episodes_per_round"] = 0;
  CHECK_THROWS_AS(PipelineConfig::from_json(k), std::invalid_argument);
}
