#include "coordsr/study_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "coordsr/errors.hpp"
#include "coordsr/png_io.hpp"
#include "json.hpp"

namespace coordsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<bool> study_side_assignment(std::size_t n, std::uint64_t seed) {
  std::vector<bool> out(n);
  std::uint64_t state = seed;
  for (std::size_t i = 0; i < n; ++i) {
    state = splitmix64(state);
    out[i] = (state >> 63) != 0;
  }
  return out;
}

namespace {

json default_anchors() {
  return {{"sharpness",
           {"Left much sharper", "Left slightly sharper", "Equivalent", "Right slightly sharper",
            "Right much sharper"}},
          {"noise",
           {"Left much less noisy", "Left slightly less noisy", "Equivalent", "Right slightly less noisy",
            "Right much less noisy"}}};
}

ImageGrid run(const Model& m, const ImageGrid& x, double scale) {
  const int rows = static_cast<int>(std::lround(x.rows() * scale));
  const int cols = static_cast<int>(std::lround(x.cols() * scale));
  return m.infer(x, rows, cols);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p, std::ios::binary);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

StudyExportResult export_study(const Model& a, const Model& b, const fs::path& root,
                               const StudyExportOptions& opt, const fs::path& out_dir) {
  const fs::path study_dir = out_dir / "study";
  const fs::path key_path = out_dir / "key.json";
  if (fs::exists(study_dir) || fs::exists(key_path)) {
    throw ConfigError(out_dir.string() + " already holds a study export");
  }
  const DatasetManifest m = load_manifest(root / "manifest.json");
  std::vector<const ManifestItem*> items = m.split(opt.split);
  if (items.empty()) throw ConfigError("split '" + to_string(opt.split) + "' is empty");
  std::sort(items.begin(), items.end(), [](const ManifestItem* x, const ManifestItem* y) { return x->path < y->path; });

  StudyExportResult res;
  res.a_left = study_side_assignment(items.size(), opt.seed);
  try {
    fs::create_directories(study_dir / "pairs");
    json study = {{"study_id", opt.study_id}, {"seed", opt.seed}, {"pairs", json::array()},
                  {"anchors", default_anchors()}};
    json key = {{"study_id", opt.study_id}, {"method_a", opt.label_a}, {"method_b", opt.label_b},
                {"pairs", json::array()}};
    for (std::size_t i = 0; i < items.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "p%04zu", i + 1);
      const ImageGrid gt = read_image(root / items[i]->path);
      const ImageGrid ya = run(a, gt, opt.scale);
      const ImageGrid yb = run(b, gt, opt.scale);
      const bool a_left = res.a_left[i];
      const std::string left = std::string(id) + "_l.png";
      const std::string right = std::string(id) + "_r.png";
      write_png_gray(study_dir / "pairs" / left, a_left ? ya : yb);
      write_png_gray(study_dir / "pairs" / right, a_left ? yb : ya);
      study["pairs"].push_back({{"pair_id", id}, {"left", left}, {"right", right}});
      key["pairs"].push_back({{"pair_id", id},
                              {"item", fs::path(items[i]->path).stem().string()},
                              {"a_side", a_left ? "left" : "right"}});
      res.pair_ids.emplace_back(id);
    }
    write_json(study_dir / "study.json", study);
    write_json(key_path, key);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(study_dir, ec);
    fs::remove(key_path, ec);
    throw;
  }
  return res;
}

}  // namespace coordsr
