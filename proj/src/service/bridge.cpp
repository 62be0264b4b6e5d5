#include "dexhil/service/bridge.hpp"

#include <cmath>

namespace dexhil::service {

BridgeHuman::BridgeHuman(const geometry::HandModel& robot_hand)
    : model_(retarget::default_human_hand(robot_hand)), robot_(robot_hand) {
  marker_.timestamp = 0.0;
  marker_.pose = geometry::Pose::identity();
}

void BridgeHuman::reset_episode() {
  std::lock_guard<std::mutex> lock(mutex_);
  desired_ = false;
  toggles_seen_ = toggles_;
  marker_.timestamp = 0.0;
  marker_.pose = geometry::Pose::identity();
}

void BridgeHuman::toggle() {
  std::lock_guard<std::mutex> lock(mutex_);
  desired_ = !desired_;
  ++toggles_;
}

void BridgeHuman::add_marker_delta(const teleop::MarkerDelta& d) {
  std::lock_guard<std::mutex> lock(mutex_);
  marker_ = teleop::apply_delta(marker_, d, marker_.timestamp);
}

void BridgeHuman::set_curls(const std::array<double, 5>& curls) {
  std::lock_guard<std::mutex> lock(mutex_);
  curls_ = curls;
  sample_.reset();
}

std::optional<bool> BridgeHuman::wants_control(double) {
  std::lock_guard<std::mutex> lock(mutex_);
  toggles_seen_ = toggles_;
  return desired_;
}

std::optional<teleop::MarkerFrame> BridgeHuman::marker(double t) {
  std::lock_guard<std::mutex> lock(mutex_);
  teleop::MarkerFrame f = marker_;
  f.timestamp = t;
  return f;
}

std::optional<retarget::HumanHandSample> BridgeHuman::hand(double) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!sample_) {
    retarget::HumanPoseParams p;
    p.curl = curls_;
    sample_ = retarget::make_human_sample(model_, robot_, p);
  }
  return sample_;
}

bool BridgeHuman::toggles_applied() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return toggles_seen_ == toggles_;
}

teleop::MarkerFrame BridgeHuman::current_marker() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return marker_;
}

nlohmann::json error_frame(const std::string& message) {
  return {{"type", "error"}, {"v", kBridgeProtocolVersion}, {"message", message}};
}

nlohmann::json welcome_frame(policy::TaskId task, const std::string& policy_ref) {
  return {{"type", "welcome"},
          {"v", kBridgeProtocolVersion},
          {"task", policy::task_name(task)},
          {"policy", policy_ref},
          {"state_hz", 20}};
}

nlohmann::json state_frame(long seq, int episode, const teleop::Scheduler& s, const sim::SimState& state) {
  const auto& iv = s.intervention();
  return {{"type", "state"},
          {"v", kBridgeProtocolVersion},
          {"seq", seq},
          {"episode", episode},
          {"t", teleop::unit_time(s.log().hand_ticks * teleop::kHandPeriod)},
          {"tick", s.log().hand_ticks},
          {"mode", teleop::mode_name(iv.mode())},
          {"I", iv.flag()},
          {"outcome", teleop::outcome_name(state.outcome)},
          {"success", state.outcome == teleop::Outcome::success},
          {"failure", state.outcome == teleop::Outcome::failure},
          {"sim", sim::state_to_json(state)}};
}

nlohmann::json episode_end_frame(int episode, teleop::Outcome outcome, long interventions) {
  return {{"type", "episode_end"},
          {"v", kBridgeProtocolVersion},
          {"episode", episode},
          {"outcome", teleop::outcome_name(outcome)},
          {"interventions", interventions}};
}

namespace {

double finite_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return 0.0;
  const auto& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>()))
    throw std::invalid_argument(std::string("field '") + key + "' must be a finite number");
  return v.get<double>();
}

}  // namespace

std::optional<nlohmann::json> BridgeSession::handle_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    ++rejected_;
    return error_frame("malformed JSON");
  }
  try {
    if (!j.is_object()) throw std::invalid_argument("message must be a JSON object");
    if (j.contains("v") && !(j["v"].is_number_integer() && j["v"].get<int>() == kBridgeProtocolVersion))
      throw std::invalid_argument("unsupported protocol version");
    if (!j.contains("type") || !j["type"].is_string()) throw std::invalid_argument("missing message type");
    const std::string type = j["type"].get<std::string>();
    std::optional<nlohmann::json> reply;
    if (type == "intervene_toggle") {
      human_.toggle();
    } else if (type == "marker_delta") {
      teleop::MarkerDelta d;
      d.dx = finite_number(j, "dx");
      d.dy = finite_number(j, "dy");
      d.dz = finite_number(j, "dz");
      d.droll = finite_number(j, "droll");
      d.dpitch = finite_number(j, "dpitch");
      d.dyaw = finite_number(j, "dyaw");
      human_.add_marker_delta(d);
    } else if (type == "hand_pose") {
      const auto& c = j.contains("curls") ? j["curls"] : nlohmann::json();
      if (!c.is_array() || c.size() != 5) throw std::invalid_argument("hand_pose needs 5 curls, thumb first");
      std::array<double, 5> curls{};
      for (int i = 0; i < 5; ++i) {
        if (!c[i].is_number()) throw std::invalid_argument("curls must be numbers");
        curls[i] = c[i].get<double>();
        if (!(curls[i] >= 0.0 && curls[i] <= 1.0)) throw std::invalid_argument("curls must lie in [0, 1]");
      }
      human_.set_curls(curls);
    } else if (type == "ping") {
      reply = nlohmann::json{{"type", "pong"}, {"v", kBridgeProtocolVersion}};
    } else {
      throw std::invalid_argument("unknown message type '" + type + "'");
    }
    ++accepted_;
    return reply;
  } catch (const std::exception& e) {
    ++rejected_;
    return error_frame(e.what());
  }
}

}  // namespace dexhil::service
