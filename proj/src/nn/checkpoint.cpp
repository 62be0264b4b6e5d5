#include "dexhil/nn/checkpoint.hpp"

#include <fstream>

#include "dexhil/nn/hash.hpp"

namespace dexhil::nn {

using nlohmann::json;

json mlp_to_json(const MlpParams& p) {
  json layers = json::array();
  for (const DenseLayer& l : p.layers) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) row.push_back(l.weight(r, c));
      rows.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) bias.push_back(l.bias[r]);
    layers.push_back(json{{"in", l.in()},
                          {"out", l.out()},
                          {"activation", activation_name(l.activation)},
                          {"weight", std::move(rows)},
                          {"bias", std::move(bias)}});
  }
  return json{{"layer_sizes", p.layer_sizes()}, {"layers", std::move(layers)}};
}

MlpParams mlp_from_json(const json& j) {
  MlpParams p;
  try {
    for (const json& lj : j.at("layers")) {
      DenseLayer l;
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto out = lj.at("out").get<Eigen::Index>();
      l.activation = activation_from_name(lj.at("activation").get<std::string>());
      l.weight.resize(out, in);
      const json& rows = lj.at("weight");
      if (static_cast<Eigen::Index>(rows.size()) != out) throw CheckpointError("weight rows mismatch");
      for (Eigen::Index r = 0; r < out; ++r) {
        const json& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != in) throw CheckpointError("weight cols mismatch");
        for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
      const json& bias = lj.at("bias");
      if (static_cast<Eigen::Index>(bias.size()) != out) throw CheckpointError("bias size mismatch");
      l.bias.resize(out);
      for (Eigen::Index r = 0; r < out; ++r) l.bias[r] = bias[static_cast<std::size_t>(r)].get<double>();
      p.layers.push_back(std::move(l));
    }
    p.validate();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("network: ") + e.what());
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("network: ") + e.what());
  }
  return p;
}

std::string content_hash(const Checkpoint& c) {
  Sha256 h;
  h.update(c.kind);
  for (const auto& [name, net] : c.networks) {
    h.update(name);
    for (const DenseLayer& l : net.layers) {
      h.update(activation_name(l.activation));
      const double shape[2] = {static_cast<double>(l.out()), static_cast<double>(l.in())};
      h.update(shape, 2);
      h.update(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
      h.update(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
  }
  h.update(c.metadata.dump());
  return h.hex_digest();
}

json checkpoint_to_json(const Checkpoint& c) {
  json nets = json::object();
  for (const auto& [name, net] : c.networks) nets[name] = mlp_to_json(net);
  return json{{"schema_version", kCheckpointSchemaVersion},
              {"kind", c.kind},
              {"networks", std::move(nets)},
              {"metadata", c.metadata},
              {"content_hash", content_hash(c)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  try {
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
      throw CheckpointError("unsupported checkpoint schema_version " + j.at("schema_version").dump());
    }
    c.kind = j.at("kind").get<std::string>();
    for (const auto& [name, nj] : j.at("networks").items()) c.networks[name] = mlp_from_json(nj);
    c.metadata = j.value("metadata", json::object());
    const std::string stored = j.at("content_hash").get<std::string>();
    if (stored != content_hash(c)) throw CheckpointError("checkpoint content hash mismatch");
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(c).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace dexhil::nn
