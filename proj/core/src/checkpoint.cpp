#include "coordsr/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "coordsr/errors.hpp"
#include "coordsr/ft1.hpp"
#include "json.hpp"

namespace coordsr {

namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const fs::path& dir, const Model& model, const CheckpointMeta& meta) {
  const ModelConfig& c = model.config();
  json j;
  j["arch"] = to_string(c.kind);
  j["d"] = c.d;
  j["blocks"] = c.blocks;
  j["mlp_layers"] = c.mlp_layers;
  j["hidden"] = c.hidden;
  j["liif_mode"] = c.liif_mode;
  j["scale"] = c.scale;
  j["step"] = meta.step;
  j["seed"] = meta.seed;
  j["params"] = json::array();
  for (const auto& p : model.params()) j["params"].push_back(p.name);

  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  for (const auto& p : model.params()) write_ft1(tmp / (p.name + ".ft1"), p.value);
  {
    std::ofstream os(tmp / "descriptor.json", std::ios::binary);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write " + (tmp / "descriptor.json").string());
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path desc = dir / "descriptor.json";
  std::ifstream is(desc, std::ios::binary);
  if (!is) throw ConfigError("no checkpoint at " + dir.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    const json j = json::parse(ss.str());
    ModelConfig c;
    c.kind = parse_model_kind(j.at("arch").get<std::string>());
    c.d = j.at("d").get<int>();
    c.blocks = j.at("blocks").get<int>();
    c.mlp_layers = j.at("mlp_layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.liif_mode = j.at("liif_mode").get<bool>();
    c.scale = j.value("scale", 2);
    CheckpointMeta meta;
    meta.step = j.at("step").get<std::int64_t>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    std::vector<NamedTensor> params;
    for (const auto& name : j.at("params")) {
      const std::string n = name.get<std::string>();
      params.push_back({n, read_ft1(dir / (n + ".ft1"))});
    }
    return Checkpoint{Model(c, std::move(params)), meta};
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint descriptor " + desc.string() + ": " + e.what());
  }
}

}  // namespace coordsr
