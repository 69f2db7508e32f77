#include "coordsr/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "coordsr/errors.hpp"
#include "coordsr/metrics.hpp"
#include "coordsr/png_io.hpp"
#include "coordsr/resample.hpp"
#include "json.hpp"

namespace coordsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

json row_json(const MetricRow& r) { return {{"item", r.item}, {"psnr_db", num(r.psnr_db)}, {"vif", num(r.vif)}}; }

MetricRow mean_of(const std::vector<MetricRow>& rows, const std::string& label) {
  MetricRow m{label};
  for (const auto& r : rows) {
    m.psnr_db += r.psnr_db;
    m.vif += r.vif;
  }
  if (!rows.empty()) {
    m.psnr_db /= static_cast<double>(rows.size());
    m.vif /= static_cast<double>(rows.size());
  }
  return m;
}

}  // namespace

std::string MetricReport::to_csv() const {
  std::string out = "item,psnr_db,vif\n";
  auto line = [&](const MetricRow& r) { out += r.item + "," + fmt(r.psnr_db) + "," + fmt(r.vif) + "\n"; };
  for (const auto& r : rows) line(r);
  line(mean);
  if (bicubic_mean) line(*bicubic_mean);
  return out;
}

std::string MetricReport::to_json() const {
  json j;
  j["split"] = split;
  j["scale"] = scale;
  j["model"] = model;
  j["lambda"] = lambda ? json(*lambda) : json(nullptr);
  j["rows"] = json::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r));
  j["mean"] = row_json(mean);
  if (bicubic_mean) {
    j["bicubic_rows"] = json::array();
    for (const auto& r : bicubic_rows) j["bicubic_rows"].push_back(row_json(r));
    j["bicubic_mean"] = row_json(*bicubic_mean);
  }
  return j.dump(2) + "\n";
}

MetricReport evaluate(const Model* model, const fs::path& root, const EvalOptions& opt) {
  if (model && model->config().kind == ModelKind::conv &&
      std::abs(opt.scale - model->config().scale) > 1e-12) {
    throw UsageError("conv checkpoint is fixed at " + std::to_string(model->config().scale) +
                     "x; cannot evaluate at " + fmt(opt.scale) + "x");
  }
  const DatasetManifest m = load_manifest(root / "manifest.json");
  std::vector<const ManifestItem*> items = m.split(opt.split);
  if (items.empty()) throw ConfigError("split '" + to_string(opt.split) + "' is empty");
  std::sort(items.begin(), items.end(), [](const ManifestItem* a, const ManifestItem* b) { return a->path < b->path; });

  MetricReport rep;
  rep.split = to_string(opt.split);
  rep.scale = opt.scale;
  rep.model = model ? to_string(model->config().kind) : "bicubic";
  rep.lambda = opt.lambda;
  for (const ManifestItem* it : items) {
    const std::string id = fs::path(it->path).stem().string();
    const ImageGrid hr = read_image(root / it->path);
    const ImageGrid lr = make_lr_pair(hr, opt.scale).lr;
    if (model) {
      int rows = hr.rows(), cols = hr.cols();
      ImageGrid ref = hr;
      if (model->config().kind == ModelKind::conv) {
        rows = model->config().scale * lr.rows();
        cols = model->config().scale * lr.cols();
        ref = hr.crop(0, 0, rows, cols);
      }
      const ImageGrid pred = model->infer(lr, rows, cols);
      rep.rows.push_back({id, psnr(pred, ref), vif(pred, ref)});
    }
    if (opt.with_bicubic || !model) {
      const ImageGrid up = bicubic_resize(lr, hr.rows(), hr.cols()).clamped();
      rep.bicubic_rows.push_back({id, psnr(up, hr), vif(up, hr)});
    }
  }
  if (!model) rep.rows = rep.bicubic_rows;
  rep.mean = mean_of(rep.rows, "mean");
  if (opt.with_bicubic) rep.bicubic_mean = mean_of(rep.bicubic_rows, "bicubic_mean");
  return rep;
}

}  // namespace coordsr
