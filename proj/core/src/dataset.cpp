#include "coordsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include "json.hpp"
#include <sstream>

#include "coordsr/errors.hpp"
#include "coordsr/ft1.hpp"
#include "coordsr/mri_sim.hpp"
#include "coordsr/png_io.hpp"

namespace coordsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val" || s == "validation") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<const ManifestItem*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestItem*> out;
  for (const auto& it : items)
    if (it.split == s) out.push_back(&it);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::uint64_t state = seed;
  for (std::size_t i = n; i > 1; --i) {
    // rejection sampling for an unbiased index in [0, i)
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      state = splitmix64(state);
      r = state;
    } while (r >= limit);
    std::swap(p[i - 1], p[r % bound]);
  }
  return p;
}

DatasetManifest build_manifest(const std::vector<ManifestCandidate>& items, std::uint64_t seed) {
  const std::size_t n = items.size();
  if (n < 10) throw ConfigError("a dataset needs >= 10 items, got " + std::to_string(n));

  // groups in first-appearance order, then shuffled
  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = members.try_emplace(items[i].group);
    if (fresh) groups.push_back(items[i].group);
    it->second.push_back(i);
  }
  const auto perm = seeded_permutation(groups.size(), seed);

  const std::size_t n_train = static_cast<std::size_t>(std::lround(0.8 * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)));

  DatasetManifest m;
  m.seed = seed;
  std::size_t train = 0, val = 0;
  std::vector<Split> assign(n, Split::test);
  for (std::size_t gi : perm) {
    const auto& idx = members[groups[gi]];
    Split s;
    if (train < n_train) {
      s = Split::train;
      train += idx.size();
    } else if (val < n_val) {
      s = Split::val;
      val += idx.size();
    } else {
      s = Split::test;
    }
    for (std::size_t i : idx) assign[i] = s;
  }
  for (std::size_t i = 0; i < n; ++i) m.items.push_back(ManifestItem{items[i].path, items[i].group, assign[i]});
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["items"] = json::array();
  for (const auto& it : m.items) {
    j["items"].push_back({{"path", it.path}, {"group", it.group}, {"split", to_string(it.split)}});
  }
  j["seed"] = m.seed;
  j["sigma_k"] = m.sigma_k;
  j["source"] = m.source;
  if (!m.kind.empty()) j["kind"] = m.kind;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    for (const auto& it : j.at("items")) {
      m.items.push_back(ManifestItem{it.at("path").get<std::string>(), it.value("group", std::string()),
                                     parse_split(it.at("split").get<std::string>())});
    }
    m.seed = j.value("seed", std::uint64_t{0});
    m.sigma_k = j.value("sigma_k", 0.0);
    m.source = j.value("source", std::string());
    m.kind = j.value("kind", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << manifest_to_json(m);
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return manifest_from_json(ss.str());
}

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ft1";
}

std::string item_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "item_%04zu", i);
  return buf;
}

}  // namespace

DatasetManifest simulate_dataset(const SimulateOptions& opt, const fs::path& out_dir) {
  if (opt.sigma_k < 0.0) throw DomainError("sigma_k must be >= 0");
  if (opt.coils < 1) throw ConfigError("coils must be >= 1");
  fs::create_directories(out_dir / "images");

  std::vector<ManifestCandidate> cands;
  std::vector<ImageGrid> clean;
  std::string source;
  if (!opt.input_dir.empty()) {
    source = "ingested";
    std::vector<std::pair<fs::path, std::string>> files;
    for (const auto& e : fs::recursive_directory_iterator(opt.input_dir)) {
      if (!e.is_regular_file() || !is_image_file(e.path())) continue;
      const fs::path rel = fs::relative(e.path(), opt.input_dir);
      const std::string group = rel.has_parent_path() ? rel.parent_path().generic_string()
                                                      : rel.stem().string();
      files.emplace_back(e.path(), group);
    }
    std::sort(files.begin(), files.end());
    for (const auto& [p, g] : files) {
      clean.push_back(read_image(p).clamped());
      cands.push_back(ManifestCandidate{"", g});
    }
  } else {
    if (!opt.kind) throw ConfigError("either a phantom kind or an input directory is required");
    if (opt.count < 1) throw ConfigError("count must be >= 1");
    source = "phantom";
    for (int i = 0; i < opt.count; ++i) {
      clean.push_back(make_phantom(*opt.kind, opt.n, opt.seed ^ static_cast<std::uint64_t>(i)));
      cands.push_back(ManifestCandidate{"", item_name(static_cast<std::size_t>(i))});
    }
  }
  if (cands.size() < 10) {
    throw ConfigError("a dataset needs >= 10 items, got " + std::to_string(cands.size()));
  }

  for (std::size_t i = 0; i < clean.size(); ++i) {
    const std::uint64_t item_seed = opt.seed ^ static_cast<std::uint64_t>(i);
    std::vector<CoilMap> coils;
    if (opt.coils > 1) {
      coils = make_coil_maps(opt.coils, clean[i].rows(), clean[i].cols(), 0.35, splitmix64(item_seed + 1));
    }
    const ImageGrid noisy = simulate_measurement(clean[i], coils, opt.sigma_k, splitmix64(item_seed));
    const std::string rel = "images/" + item_name(i) + ".ft1";
    write_image_ft1(out_dir / rel, noisy);
    if (source == "phantom") {
      fs::create_directories(out_dir / "clean");
      write_image_ft1(out_dir / "clean" / (item_name(i) + ".ft1"), clean[i]);
    }
    cands[i].path = rel;
  }

  DatasetManifest m = build_manifest(cands, opt.seed);
  m.sigma_k = opt.sigma_k;
  m.source = source;
  if (source == "phantom") m.kind = to_string(*opt.kind);
  save_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace coordsr
