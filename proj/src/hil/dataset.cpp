#include "dexhil/hil/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dexhil/nn/hash.hpp"

namespace dexhil::hil {

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

const char* category_name(Category c) {
  switch (c) {
    case Category::offline: return "offline";
    case Category::autonomous: return "autonomous";
    case Category::intervention: return "intervention";
  }
  return "?";
}

Category category_from_name(const std::string& name) {
  if (name == "offline") return Category::offline;
  if (name == "autonomous") return Category::autonomous;
  if (name == "intervention") return Category::intervention;
  throw DatasetError("unknown category '" + name + "'");
}

std::vector<std::pair<long, long>> Episode::intervention_windows() const {
  std::vector<std::pair<long, long>> out;
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (records[k].intervention != 1) continue;
    if (k > 0 && records[k - 1].intervention == 1) {
      out.back().second = records[k].t;
    } else {
      out.emplace_back(records[k].t, records[k].t);
    }
  }
  return out;
}

Episode episode_from_log(const teleop::EpisodeLog& log, const std::string& id, policy::TaskId task, int round,
                         bool offline, std::uint64_t spawn_seed) {
  Episode e;
  e.id = id;
  e.task = task;
  e.round = round;
  e.offline = offline;
  e.outcome = log.outcome;
  e.spawn_seed = spawn_seed;
  e.records.reserve(log.ticks.size());
  for (const teleop::TickRecord& tr : log.ticks) {
    TrajectoryRecord r;
    r.episode = id;
    r.t = tr.tick;
    r.obs = tr.obs;
    r.q_arm = tr.arm;
    r.q_hand = tr.hand;
    r.round = round;
    if (offline) {
      r.intervention = 0;
      r.category = Category::offline;
    } else {
      r.intervention = tr.intervention;
      r.category = tr.intervention ? Category::intervention : Category::autonomous;
    }
    e.records.push_back(std::move(r));
  }
  return e;
}

std::size_t Dataset::record_count() const {
  std::size_t n = 0;
  for (const Episode& e : episodes) n += e.records.size();
  return n;
}

CategoryCounts Dataset::counts() const {
  CategoryCounts n{};
  for (const Episode& e : episodes)
    for (const TrajectoryRecord& r : e.records) ++n[static_cast<int>(r.category)];
  return n;
}

Dataset Dataset::aggregate(const Dataset& previous, const Dataset& fresh) {
  Dataset out = previous;
  out.episodes.insert(out.episodes.end(), fresh.episodes.begin(), fresh.episodes.end());
  return out;
}

policy::FmDataset to_fm_dataset(const Dataset& d, int horizon, const std::vector<double>& weights) {
  if (!weights.empty() && weights.size() != kCategoryCount)
    throw DatasetError("weights must have one entry per category");
  const auto n = static_cast<Eigen::Index>(d.record_count());
  if (n == 0) throw DatasetError("empty dataset");
  const Eigen::Index od = d.episodes.front().records.front().obs.size();
  constexpr int step = teleop::kArmDof + teleop::kHandDof;
  policy::FmDataset out;
  out.obs.resize(od, n);
  out.act.resize(static_cast<Eigen::Index>(step) * horizon, n);
  if (!weights.empty()) out.weights.resize(n);
  Eigen::Index col = 0;
  for (const Episode& e : d.episodes) {
    const auto len = static_cast<long>(e.records.size());
    for (long k = 0; k < len; ++k, ++col) {
      const TrajectoryRecord& r = e.records[k];
      if (r.obs.size() != od) throw DatasetError("observation size mismatch in " + e.id);
      out.obs.col(col) = r.obs;
      for (int h = 0; h < horizon; ++h) {
        const TrajectoryRecord& a = e.records[std::min(k + h, len - 1)];
        out.act.block(static_cast<Eigen::Index>(h) * step, col, teleop::kArmDof, 1) = a.q_arm;
        out.act.block(static_cast<Eigen::Index>(h) * step + teleop::kArmDof, col, teleop::kHandDof, 1) = a.q_hand;
      }
      if (!weights.empty()) out.weights(col) = weights[static_cast<int>(r.category)];
    }
  }
  return out;
}

nlohmann::json record_to_json(const TrajectoryRecord& r) {
  return {{"episode", r.episode}, {"t", r.t},
          {"obs", vec_json(r.obs)}, {"q_arm", vec_json(r.q_arm)},
          {"q_hand", vec_json(r.q_hand)}, {"I", r.intervention},
          {"category", category_name(r.category)}, {"round", r.round}};
}

TrajectoryRecord record_from_json(const nlohmann::json& j) {
  TrajectoryRecord r;
  try {
    r.episode = j.at("episode").get<std::string>();
    r.t = j.at("t").get<long>();
    r.obs = json_vec(j.at("obs"));
    r.q_arm = json_vec(j.at("q_arm"));
    r.q_hand = json_vec(j.at("q_hand"));
    r.intervention = j.at("I").get<int>();
    r.category = category_from_name(j.at("category").get<std::string>());
    r.round = j.at("round").get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw DatasetError(std::string("bad record: ") + ex.what());
  }
  if (r.intervention != 0 && r.intervention != 1) throw DatasetError("I must be 0 or 1");
  if (r.category == Category::offline ? r.intervention != 0
                                      : (r.category == Category::intervention) != (r.intervention == 1))
    throw DatasetError("category disagrees with I in " + r.episode);
  return r;
}

nlohmann::json write_dataset(const std::filesystem::path& dir, const Dataset& d, const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json eps = nlohmann::json::array();
  for (const Episode& e : d.episodes) {
    std::string body;
    for (const TrajectoryRecord& r : e.records) body += record_to_json(r).dump() + '\n';
    const std::string file = e.id + ".jsonl";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + (dir / file).string());
    out << body;
    CategoryCounts n{};
    for (const TrajectoryRecord& r : e.records) ++n[static_cast<int>(r.category)];
    eps.push_back({{"id", e.id}, {"file", file}, {"sha256", nn::sha256_hex(body)},
                   {"task", policy::task_name(e.task)}, {"round", e.round}, {"offline", e.offline},
                   {"outcome", teleop::outcome_name(e.outcome)}, {"spawn_seed", e.spawn_seed},
                   {"records", e.records.size()},
                   {"counts", {{"offline", n[0]}, {"autonomous", n[1]}, {"intervention", n[2]}}}});
  }
  const CategoryCounts n = d.counts();
  nlohmann::json manifest = {{"schema_version", 1}, {"episodes", eps}, {"records", d.record_count()},
                             {"counts", {{"offline", n[0]}, {"autonomous", n[1]}, {"intervention", n[2]}}}};
  if (!extra.is_null()) manifest["extra"] = extra;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  return manifest;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& ex) {
    throw DatasetError(std::string("bad manifest: ") + ex.what());
  }
  Dataset d;
  for (const nlohmann::json& m : manifest.at("episodes")) {
    const std::string body = read_file(dir / m.at("file").get<std::string>());
    if (nn::sha256_hex(body) != m.at("sha256").get<std::string>())
      throw DatasetError("hash mismatch for " + m.at("file").get<std::string>());
    Episode e;
    e.id = m.at("id").get<std::string>();
    e.task = policy::task_from_name(m.at("task").get<std::string>());
    e.round = m.at("round").get<int>();
    e.offline = m.at("offline").get<bool>();
    const std::string oc = m.at("outcome").get<std::string>();
    e.outcome = oc == "success" ? teleop::Outcome::success
                : oc == "failure" ? teleop::Outcome::failure
                                  : teleop::Outcome::running;
    e.spawn_seed = m.at("spawn_seed").get<std::uint64_t>();
    std::istringstream lines(body);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      try {
        e.records.push_back(record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::parse_error& ex) {
        throw DatasetError(std::string("bad line: ") + ex.what());
      }
    }
    d.episodes.push_back(std::move(e));
  }
  return d;
}

}  // namespace dexhil::hil
