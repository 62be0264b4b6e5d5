#include "dexhil/service/artifacts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dexhil/nn/hash.hpp"

namespace dexhil::service {

namespace fs = std::filesystem;

namespace {

std::string file_sha256(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return nn::sha256_hex(ss.str());
}

}  // namespace

std::string RunPaths::tag(policy::TaskId task, std::uint64_t seed) {
  return std::string(policy::task_name(task)) + "_s" + std::to_string(seed);
}

fs::path RunPaths::demos(policy::TaskId task, std::uint64_t seed) const { return root / "demos" / tag(task, seed); }
fs::path RunPaths::warmup(policy::TaskId task, std::uint64_t seed) const {
  return root / "warmup" / tag(task, seed);
}
fs::path RunPaths::round(int i, policy::TaskId task, std::uint64_t seed) const {
  return root / ("round_" + std::to_string(i)) / tag(task, seed);
}

fs::path RunPaths::policy_dir(const std::string& ref, policy::TaskId task, std::uint64_t seed) const {
  if (ref == "warmup") return warmup(task, seed);
  if (ref.rfind("round_", 0) == 0) {
    std::size_t used = 0;
    int i = -1;
    try {
      i = std::stoi(ref.substr(6), &used);
    } catch (const std::exception&) {
    }
    if (i >= 1 && used == ref.size() - 6) return round(i, task, seed);
  }
  throw std::invalid_argument("policy must be 'warmup' or 'round_<i>', got '" + ref + "'");
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

nlohmann::json write_manifest(const fs::path& dir, const std::string& config_hash, const std::string& command,
                              const nlohmann::json& extra) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel != "manifest.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json listing = nlohmann::json::object();
  for (const auto& f : files) listing[f] = file_sha256(dir / f);
  nlohmann::json m = {{"config_hash", config_hash}, {"command", command}, {"files", listing}};
  if (!extra.is_null()) m["extra"] = extra;
  write_json(dir / "manifest.json", m);
  return m;
}

nlohmann::json verify_manifest(const fs::path& dir) {
  const nlohmann::json m = read_json(dir / "manifest.json");
  if (!m.contains("files") || !m["files"].is_object()) throw ArtifactError(dir.string() + ": manifest lists no files");
  for (const auto& [f, h] : m["files"].items()) {
    const fs::path p = dir / f;
    if (!fs::exists(p)) throw ArtifactError(p.string() + " listed in manifest but missing");
    if (file_sha256(p) != h.get<std::string>()) throw ArtifactError(p.string() + " does not match its manifest hash");
  }
  return m;
}

void require_artifact(const fs::path& dir, const std::string& producer) {
  if (!fs::exists(dir / "manifest.json"))
    throw PrerequisiteError("missing " + dir.string() + "; run `" + producer + "` first");
}

}  // namespace dexhil::service
