#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dexhil/service/artifacts.hpp"
#include "dexhil/service/bridge.hpp"
#include "dexhil/service/bridge_server.hpp"
#include "dexhil/service/config.hpp"
#include "dexhil/service/session.hpp"
#include "dexhil/teleop/anchor.hpp"
#include "fixtures.hpp"

using namespace dexhil;
using namespace dexhil::service;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dexhil_service_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Minimal blocking line client.
class Client {
 public:
  explicit Client(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(static_cast<uint16_t>(port));
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
  }
  ~Client() { ::close(fd_); }

  void send(const std::string& line) {
    const std::string s = line + "\n";
    REQUIRE(::send(fd_, s.data(), s.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(s.size()));
  }
  void send(const json& j) { send(j.dump()); }

  // Next frame, or null on timeout / close.
  json read(int timeout_ms = 3000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        const std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return json::parse(line);
      }
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
      if (left <= 0 || closed_) return nullptr;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left)) <= 0) continue;
      char c[4096];
      const ssize_t n = ::recv(fd_, c, sizeof c, 0);
      if (n <= 0) {
        closed_ = true;
        continue;
      }
      buf_.append(c, static_cast<std::size_t>(n));
    }
  }

  // Skips frames until one of `type` arrives.
  json read_type(const std::string& type, int timeout_ms = 3000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
      json j = read(timeout_ms);
      if (j.is_null()) return j;
      if (j.value("type", "") == type) return j;
    }
    return nullptr;
  }

  bool closed() const { return closed_; }

 private:
  int fd_ = -1;
  std::string buf_;
  bool closed_ = false;
};

RunConfig small_config() {
  json j = {{"name", "t"},
            {"tasks", {"pinch", "plush"}},
            {"seeds", {1, 2}},
            {"rounds", 2},
            {"mode", "human"},
            {"pipeline", {{"warmup_demos", 3}, {"episodes_per_round", 2}, {"max_attempts", 4}}},
            {"retarget", {{"stage1_steps", 10}}}};
  return RunConfig::from_json(j);
}

}  // namespace

TEST_CASE("run config defaults follow the declared counts") {
  const RunConfig c = RunConfig::from_json(json::object());
  CHECK(c.pipeline.warmup_demos == 60);
  CHECK(c.pipeline.episodes_per_round == 10);
  CHECK(c.rounds == 3);
  CHECK(c.mode == RunMode::oracle);
  CHECK(c.tasks.size() == 1);
  CHECK(c.pipeline.weighting.p_intervention == 0.5);
}

TEST_CASE("run config round-trips and hashes canonically") {
  const RunConfig c = small_config();
  CHECK(c.tasks == std::vector<policy::TaskId>{policy::TaskId::tissue_extraction, policy::TaskId::plush_grasp});
  CHECK(c.retarget.stage1_steps == 10);
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  CHECK(c.hash().size() == 64);
  RunConfig other = c;
  other.rounds = 3;
  CHECK(other.hash() != c.hash());

  const auto p = c.pipeline_for(policy::TaskId::plush_grasp, 2);
  CHECK(p.task == policy::TaskId::plush_grasp);
  CHECK(p.seed == 2);
  CHECK(p.warmup_demos == 3);
}

TEST_CASE("schema violations are config errors") {
  const json good = small_config().to_json();
  auto with = [&](const std::string& key, json value) {
    json j = good;
    j[key] = std::move(value);
    return j;
  };
  CHECK_THROWS_AS(RunConfig::from_json(with("roundz", 1)), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("rounds", 0)), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("tasks", json::array())), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("tasks", {"laundry"})), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("seeds", {1, 1})), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("mode", "robot")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("name", "../x")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(with("rounds", "three")), ConfigError);
  json p = good;
  p["pipeline"]["episodes_per_round"] = 0;
  CHECK_THROWS_AS(RunConfig::from_json(p), ConfigError);
  p = good;
  p["pipeline"]["warmup_hyper"]["stepz"] = 3;
  CHECK_THROWS_AS(RunConfig::from_json(p), ConfigError);
  p = good;
  p["pipeline"]["seed"] = 3;
  CHECK_THROWS_AS(RunConfig::from_json(p), ConfigError);
  p = good;
  p["retarget"]["epochs"] = 3;
  CHECK_THROWS_AS(RunConfig::from_json(p), ConfigError);

  const fs::path dir = scratch("cfg");
  std::ofstream(dir / "broken.json") << "{ \"rounds\": ";
  CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(dir / "absent.json"), ConfigError);
}

TEST_CASE("run paths follow the runs/<name> layout") {
  RunPaths p{"runs/x"};
  const auto t = policy::TaskId::tissue_extraction;
  CHECK(p.round(2, t, 7) == fs::path("runs/x/round_2/tissue_extraction_s7"));
  CHECK(p.policy_dir("warmup", t, 7) == p.warmup(t, 7));
  CHECK(p.policy_dir("round_3", t, 7) == p.round(3, t, 7));
  CHECK_THROWS(p.policy_dir("round_0", t, 7));
  CHECK_THROWS(p.policy_dir("round_2x", t, 7));
  CHECK_THROWS(p.policy_dir("final", t, 7));
}

TEST_CASE("manifests list every file, reproduce and catch tampering") {
  const fs::path dir = scratch("manifest");
  write_json(dir / "a.json", {{"x", 1}});
  write_json(dir / "sub" / "b.json", {1, 2, 3});
  const json m = write_manifest(dir, "abc", "warmup");
  CHECK(m["files"].size() == 2);
  CHECK(m["files"].contains("sub/b.json"));
  CHECK(m["config_hash"] == "abc");
  CHECK_FALSE(m.contains("time"));
  CHECK(verify_manifest(dir) == m);

  std::ifstream in(dir / "manifest.json");
  const std::string first((std::istreambuf_iterator<char>(in)), {});
  write_manifest(dir, "abc", "warmup");
  std::ifstream in2(dir / "manifest.json");
  CHECK(std::string((std::istreambuf_iterator<char>(in2)), {}) == first);

  write_json(dir / "a.json", {{"x", 2}});
  CHECK_THROWS_AS(verify_manifest(dir), ArtifactError);
  fs::remove(dir / "a.json");
  CHECK_THROWS_AS(verify_manifest(dir), ArtifactError);

  CHECK_THROWS_AS(require_artifact(dir / "nothing", "collect-demos"), PrerequisiteError);
  try {
    require_artifact(dir / "nothing", "round --i 1");
  } catch (const PrerequisiteError& e) {
    CHECK(std::string(e.what()).find("round --i 1") != std::string::npos);
  }
}

TEST_CASE("the frame queue drops only state frames") {
  FrameQueue q(4);
  for (int i = 0; i < 10; ++i) q.push({{"type", "state"}, {"seq", i}});
  for (int i = 0; i < 3; ++i) q.push({{"type", "error"}, {"n", i}});
  for (int i = 10; i < 20; ++i) q.push({{"type", "state"}, {"seq", i}});
  CHECK(q.size() == 7);
  CHECK(q.dropped() == 16);
  std::vector<json> out;
  std::string line;
  while (q.pop(line, 0)) out.push_back(json::parse(line));
  REQUIRE(out.size() == 7);
  int errors = 0;
  for (const auto& f : out) errors += f["type"] == "error";
  CHECK(errors == 3);
  // newest states survive, in order
  CHECK(out.back()["seq"] == 19);
  CHECK(out[out.size() - 4]["seq"] == 16);
}

TEST_CASE("bridge session applies commands and rejects bad messages") {
  BridgeHuman human(test::desk_hand());
  BridgeSession s(human);

  CHECK(s.handle_line("{not json")->at("type") == "error");
  CHECK(s.handle_line("[1,2]")->at("type") == "error");
  CHECK(s.handle_line(R"({"v":1})")->at("type") == "error");
  CHECK(s.handle_line(R"({"type":"fly"})")->at("type") == "error");
  CHECK(s.handle_line(R"({"type":"ping","v":2})")->at("type") == "error");
  CHECK(s.handle_line(R"({"type":"marker_delta","dx":"far"})")->at("type") == "error");
  CHECK(s.handle_line(R"({"type":"hand_pose","curls":[0,0,0,0]})")->at("type") == "error");
  CHECK(s.handle_line(R"({"type":"hand_pose","curls":[0,0,0,0,1.5]})")->at("type") == "error");
  CHECK(s.rejected() == 8);

  // unknown fields are ignored
  CHECK(s.handle_line(R"({"type":"ping","v":1,"client":"x"})")->at("type") == "pong");
  CHECK_FALSE(s.handle_line(R"({"type":"intervene_toggle","key":"i"})").has_value());
  CHECK(human.wants_control(0.0) == true);
  CHECK(human.toggles_applied());
  CHECK_FALSE(s.handle_line(R"({"type":"intervene_toggle"})").has_value());
  CHECK_FALSE(human.toggles_applied());
  CHECK(human.wants_control(0.0) == false);

  // deltas accumulate exactly like apply_delta on the virtual stream
  teleop::MarkerDelta a{0.05, 0.0, 0.01, 0.1, 0.0, -0.2};
  teleop::MarkerDelta b{-0.01, 0.02, 0.0, 0.0, 0.3, 0.0};
  s.handle_line(json{{"type", "marker_delta"}, {"dx", a.dx}, {"dz", a.dz}, {"droll", a.droll}, {"dyaw", a.dyaw}}.dump());
  s.handle_line(json{{"type", "marker_delta"}, {"dx", b.dx}, {"dy", b.dy}, {"dpitch", b.dpitch}}.dump());
  teleop::MarkerFrame ref;
  ref.pose = geometry::Pose::identity();
  ref = teleop::apply_delta(teleop::apply_delta(ref, a, 0.0), b, 0.0);
  const auto m = human.marker(1.5);
  REQUIRE(m);
  CHECK(m->timestamp == 1.5);
  CHECK((m->pose.translation - ref.pose.translation).norm() < 1e-15);
  CHECK((m->pose.rotation - ref.pose.rotation).norm() < 1e-15);

  // curls go through the human hand model
  CHECK_FALSE(s.handle_line(R"({"type":"hand_pose","curls":[0.2,0.9,0.9,0.9,0.9]})").has_value());
  const auto h = human.hand(0.0);
  REQUIRE(h);
  retarget::HumanPoseParams p;
  p.curl = {0.2, 0.9, 0.9, 0.9, 0.9};
  const auto expect =
      retarget::make_human_sample(retarget::default_human_hand(test::desk_hand()), test::desk_hand(), p);
  for (std::size_t k = 0; k < expect.keypoints.size(); ++k) CHECK(h->keypoints[k] == expect.keypoints[k]);
  CHECK(h->valid());

  human.reset_episode();
  CHECK(human.wants_control(0.0) == false);
  CHECK(human.current_marker().pose.translation.norm() == 0.0);
}

TEST_CASE("bridge server: one operator, errors keep the session alive") {
  BridgeHuman human(test::desk_hand());
  BridgeSession session(human);
  std::mutex m;
  BridgeServer server(
      0,
      [&](const std::string& line) {
        std::lock_guard<std::mutex> lock(m);
        return session.handle_line(line);
      },
      {});
  REQUIRE(server.port() > 0);

  Client a(server.port());
  for (int i = 0; i < 100 && !server.connected(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(server.connected());

  Client b(server.port());
  const json refused = b.read();
  CHECK(refused["type"] == "error");
  CHECK(b.read(500).is_null());
  CHECK(b.closed());
  CHECK(server.refused() == 1);

  a.send(std::string("{oops"));
  CHECK(a.read()["type"] == "error");
  a.send(json{{"type", "ping"}});
  CHECK(a.read()["type"] == "pong");
  a.send(json{{"type", "intervene_toggle"}});
  a.send(json{{"type", "ping"}});
  CHECK(a.read()["type"] == "pong");
  CHECK(human.wants_control(0.0) == true);
}

TEST_CASE("bridge server: slow clients lose state frames, never commands") {
  BridgeHuman human(test::desk_hand());
  BridgeSession session(human);
  BridgeServer server(0, [&](const std::string& line) { return session.handle_line(line); }, {}, 4);
  Client a(server.port());
  for (int i = 0; i < 100 && !server.connected(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(server.connected());
  // a burst far beyond the state budget; the control side never blocks
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 20000; ++i) server.send({{"type", "state"}, {"seq", i}, {"pad", std::string(200, 'x')}});
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2));
  for (int i = 0; i < 50; ++i) a.send(json{{"type", "marker_delta"}, {"dx", 0.001}});
  a.send(json{{"type", "ping"}});
  CHECK(a.read_type("pong", 5000)["type"] == "pong");
  CHECK(server.queue().dropped() > 0);
  CHECK(human.current_marker().pose.translation.x() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(session.rejected() == 0);
}

TEST_CASE("bridge loopback: toggle shows in the next state frame and deltas move the EE target") {
  hil::PipelineConfig cfg = hil::PipelineConfig::defaults(policy::TaskId::tissue_extraction);
  hil::Pipeline pipe(cfg, test::desk_arm(), test::desk_hand(), test::trained_retarget());
  const policy::FmPolicy pol = policy::make_policy(cfg.policy, 5);
  HumanSession hs(0, policy::TaskId::tissue_extraction, "untrained", test::desk_hand());

  std::mutex mu;
  std::optional<teleop::AnchorState> anchor;
  std::optional<geometry::Pose> last_target;
  std::atomic<bool> stop{false};
  hil::Episode episode;
  std::thread runner([&] {
    episode = hs.run_episode(
        pipe, pol, 1, 0, [&] { return stop.load(); },
        [&](const teleop::Scheduler& s) {
          std::lock_guard<std::mutex> lock(mu);
          anchor = s.intervention().anchor();
          if (!s.log().human_ee_targets.empty()) last_target = s.log().human_ee_targets.back();
        });
  });

  Client c(hs.server().port());
  const json welcome = c.read();
  CHECK(welcome["type"] == "welcome");
  CHECK(welcome["v"] == kBridgeProtocolVersion);
  json st = c.read_type("state");
  REQUIRE(st.is_object());
  CHECK(st["I"] == 0);
  CHECK(st["mode"] == "autonomous");
  CHECK(st["sim"].contains("extraction"));

  c.send(json{{"type", "intervene_toggle"}});
  c.send(json{{"type", "ping"}});
  // every state frame behind the pong was produced after the toggle arrived
  REQUIRE(c.read_type("pong")["type"] == "pong");
  const json after = c.read_type("state");
  REQUIRE(after.is_object());
  CHECK(after["I"] == 1);
  CHECK(after["mode"] == "intervening");
  CHECK(after["tick"].get<long>() <= st["tick"].get<long>() + 200);

  const teleop::MarkerDelta d{0.05, 0.0, 0.0, 0.0, 0.0, 0.0};
  c.send(json{{"type", "marker_delta"}, {"dx", d.dx}});
  c.send(json{{"type", "ping"}});
  REQUIRE(c.read_type("pong")["type"] == "pong");
  for (int k = 0; k < 3; ++k) c.read_type("state");  // > one arm period

  {
    std::lock_guard<std::mutex> lock(mu);
    REQUIRE(anchor);
    REQUIRE(last_target);
    teleop::MarkerFrame f;
    f.pose = geometry::Pose::identity();
    const geometry::Pose expect = teleop::map_marker_to_ee(*anchor, teleop::apply_delta(f, d, 0.0).pose);
    CHECK((last_target->translation - expect.translation).norm() < 1e-9);
    CHECK((last_target->rotation - expect.rotation).norm() < 1e-9);
    CHECK((last_target->translation - anchor->ee0.translation).norm() > 0.01);
  }

  stop = true;
  const json end = c.read_type("episode_end", 5000);
  runner.join();
  CHECK(end["type"] == "episode_end");
  CHECK(end["interventions"] == 1);
  REQUIRE_FALSE(episode.records.empty());
  CHECK(episode.records.back().intervention == 1);
  CHECK(episode.records.front().intervention == 0);
  CHECK(episode.intervention_windows().size() == 1);
}
