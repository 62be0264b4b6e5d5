#include "dexhil/service/config.hpp"

#include <fstream>
#include <set>

#include "dexhil/nn/hash.hpp"

namespace dexhil::service {

namespace {

const std::set<std::string> kTopKeys = {"name", "tasks", "seeds", "rounds", "mode", "pipeline", "retarget"};
const std::set<std::string> kRetargetKeys = {"init_seed", "dataset_seed", "dataset_size", "stage1_steps",
                                             "stage2_steps"};

RunMode mode_from_name(const std::string& s) {
  if (s == "oracle") return RunMode::oracle;
  if (s == "human") return RunMode::human;
  throw ConfigError("mode must be 'oracle' or 'human', got '" + s + "'");
}

void only_keys(const nlohmann::json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

}  // namespace

const char* run_mode_name(RunMode m) { return m == RunMode::oracle ? "oracle" : "human"; }

void RunConfig::validate() const {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..")
    throw ConfigError("name must be a plain directory name");
  if (tasks.empty()) throw ConfigError("tasks must not be empty");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<policy::TaskId>(tasks.begin(), tasks.end()).size() != tasks.size())
    throw ConfigError("tasks must be distinct");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds must be distinct");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (retarget.dataset_size < 1 || retarget.stage1_steps < 1 || retarget.stage2_steps < 1)
    throw ConfigError("retarget counts must be >= 1");
  try {
    pipeline.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json p = pipeline.to_json();
  p.erase("task");
  p.erase("seed");
  nlohmann::json t = nlohmann::json::array();
  for (auto task : tasks) t.push_back(policy::task_name(task));
  return {{"name", name},
          {"tasks", t},
          {"seeds", seeds},
          {"rounds", rounds},
          {"mode", run_mode_name(mode)},
          {"pipeline", p},
          {"retarget",
           {{"init_seed", retarget.init_seed},
            {"dataset_seed", retarget.dataset_seed},
            {"dataset_size", retarget.dataset_size},
            {"stage1_steps", retarget.stage1_steps},
            {"stage2_steps", retarget.stage2_steps}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  only_keys(j, kTopKeys, "config");
  RunConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : j.at("tasks")) c.tasks.push_back(policy::task_from_name(t.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.rounds = j.value("rounds", c.rounds);
    if (j.contains("mode")) c.mode = mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("pipeline")) {
      nlohmann::json p = j.at("pipeline");
      if (!p.is_object()) throw ConfigError("pipeline: expected an object");
      if (p.contains("task") || p.contains("seed"))
        throw ConfigError("pipeline: task and seed come from the top-level lists");
      c.pipeline = hil::PipelineConfig::from_json(p);
    }
    if (j.contains("retarget")) {
      const auto& r = j.at("retarget");
      only_keys(r, kRetargetKeys, "retarget");
      c.retarget.init_seed = r.value("init_seed", c.retarget.init_seed);
      c.retarget.dataset_seed = r.value("dataset_seed", c.retarget.dataset_seed);
      c.retarget.dataset_size = r.value("dataset_size", c.retarget.dataset_size);
      c.retarget.stage1_steps = r.value("stage1_steps", c.retarget.stage1_steps);
      c.retarget.stage2_steps = r.value("stage2_steps", c.retarget.stage2_steps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string RunConfig::hash() const { return nn::sha256_hex(to_json().dump()); }

hil::PipelineConfig RunConfig::pipeline_for(policy::TaskId task, std::uint64_t seed) const {
  hil::PipelineConfig p = pipeline;
  p.task = task;
  p.seed = seed;
  return p;
}

}  // namespace dexhil::service
