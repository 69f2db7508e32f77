#include "coordsr/trainer.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "coordsr/errors.hpp"
#include "coordsr/ft1.hpp"
#include "coordsr/metrics.hpp"
#include "coordsr/ops.hpp"
#include "coordsr/png_io.hpp"
#include "coordsr/resample.hpp"
#include "json.hpp"

namespace coordsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::int64_t TrainConfig::total_steps() const {
  if (steps) return *steps;
  return model.kind == ModelKind::coord ? 1000 : 100000;
}

void TrainConfig::validate() const {
  std::vector<std::string> bad;
  if (!(s_min >= 1.0)) bad.push_back("scale_range: s_min must be >= 1");
  if (!(s_max >= s_min)) bad.push_back("scale_range: s_max must be >= s_min");
  if (model.kind == ModelKind::conv) {
    const bool integral = s_min == s_max && s_max == std::round(s_max) && s_max >= 2 && s_max <= 4;
    if (!integral) bad.push_back("scale_range: conv models need s_min == s_max in {2,3,4}");
    else if (tile_hr % static_cast<int>(s_max) != 0) bad.push_back("tile_hr: must be a multiple of the conv scale");
  }
  if (!(lambda >= 0.0)) bad.push_back("lambda: must be >= 0");
  if (!(denoiser.sigma >= 0.0)) bad.push_back("sigma: must be >= 0");
  if (total_steps() < 0) bad.push_back("T: must be >= 0");
  if (!(adam.lr > 0.0f)) bad.push_back("lr: must be > 0");
  if (!(adam.beta1 >= 0.0f && adam.beta1 < 1.0f)) bad.push_back("beta1: must be in [0,1)");
  if (!(adam.beta2 >= 0.0f && adam.beta2 < 1.0f)) bad.push_back("beta2: must be in [0,1)");
  if (!(adam.eps > 0.0f)) bad.push_back("eps: must be > 0");
  if (tile_hr < 8 || (s_max >= 1.0 && lr_extent(tile_hr, s_max) < 8)) {
    bad.push_back("tile_hr: low-resolution tiles must be at least 8 px at s_max");
  }
  if (batch < 1) bad.push_back("batch: must be >= 1");
  if (eval_every < 0) bad.push_back("eval_every: must be >= 0");
  if (val_items < 0) bad.push_back("val_items: must be >= 0");
  try {
    ModelConfig m = model;
    if (m.kind == ModelKind::conv) m.scale = static_cast<int>(s_max);
    if (m.kind == ModelKind::coord || bad.empty()) m.validate();
  } catch (const ConfigError& e) {
    bad.push_back(e.what());
  }
  if (!bad.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

TrainConfig parse_train_config(const std::string& text) {
  static const std::set<std::string> known = {
      "dataset", "model",   "d",     "blocks",     "mlp_layers", "hidden",    "liif_mode",
      "scale_range", "lambda", "sigma", "denoiser", "T",          "lr",        "beta1",
      "beta2",   "eps",     "tile_hr", "batch",    "seed",       "eval_every", "val_items",
      "record_wall_time"};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::string> bad;
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) bad.push_back(k + ": unknown field");
  }
  TrainConfig c;
  auto field = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      using T = std::remove_reference_t<decltype(dst)>;
      dst = j.at(key).get<T>();
    } catch (const json::exception&) {
      bad.push_back(std::string(key) + ": wrong type");
    }
  };
  std::string dataset, model, denoiser;
  field("dataset", dataset);
  if (!dataset.empty()) c.dataset = dataset;
  field("model", model);
  if (!model.empty()) {
    try {
      c.model.kind = parse_model_kind(model);
    } catch (const ConfigError& e) {
      bad.push_back(std::string("model: ") + e.what());
    }
  }
  field("d", c.model.d);
  field("blocks", c.model.blocks);
  field("mlp_layers", c.model.mlp_layers);
  field("hidden", c.model.hidden);
  field("liif_mode", c.model.liif_mode);
  if (j.contains("scale_range")) {
    const auto& r = j["scale_range"];
    if (r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number()) {
      c.s_min = r[0].get<double>();
      c.s_max = r[1].get<double>();
    } else {
      bad.push_back("scale_range: expected [s_min, s_max]");
    }
  }
  field("lambda", c.lambda);
  field("sigma", c.denoiser.sigma);
  field("denoiser", denoiser);
  if (!denoiser.empty()) {
    try {
      c.denoiser.kind = parse_denoiser_kind(denoiser);
    } catch (const std::exception& e) {
      bad.push_back(std::string("denoiser: ") + e.what());
    }
  }
  if (j.contains("T")) {
    std::int64_t t = 0;
    field("T", t);
    c.steps = t;
  }
  field("lr", c.adam.lr);
  field("beta1", c.adam.beta1);
  field("beta2", c.adam.beta2);
  field("eps", c.adam.eps);
  field("tile_hr", c.tile_hr);
  field("batch", c.batch);
  field("seed", c.seed);
  field("eval_every", c.eval_every);
  field("val_items", c.val_items);
  field("record_wall_time", c.record_wall_time);
  if (!bad.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["dataset"] = c.dataset.generic_string();
  j["model"] = to_string(c.model.kind);
  j["d"] = c.model.d;
  j["blocks"] = c.model.blocks;
  j["mlp_layers"] = c.model.mlp_layers;
  j["hidden"] = c.model.hidden;
  j["liif_mode"] = c.model.liif_mode;
  j["scale_range"] = {c.s_min, c.s_max};
  j["lambda"] = c.lambda;
  j["sigma"] = c.denoiser.sigma;
  j["denoiser"] = to_string(c.denoiser.kind);
  j["T"] = c.total_steps();
  j["lr"] = c.adam.lr;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["eps"] = c.adam.eps;
  j["tile_hr"] = c.tile_hr;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["val_items"] = c.val_items;
  j["record_wall_time"] = c.record_wall_time;
  return j.dump(2) + "\n";
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_train_config(ss.str());
}

std::vector<std::int64_t> eval_schedule(std::int64_t total, std::int64_t every) {
  std::vector<std::int64_t> out;
  if (total <= 0) return out;
  if (every > 0) {
    for (std::int64_t s = every; s < total; s += every) out.push_back(s);
  } else {
    for (int i = 0;; ++i) {
      const auto s = static_cast<std::int64_t>(std::llround(std::pow(10.0, i / 10.0)));
      if (s >= total) break;
      if (out.empty() || out.back() != s) out.push_back(s);
    }
  }
  out.push_back(total);
  return out;
}

SplitImages load_split(const fs::path& root, Split split, const DenoiserSpec* spec) {
  const DatasetManifest m = load_manifest(root / "manifest.json");
  SplitImages out;
  for (const ManifestItem* it : m.split(split)) {
    ImageGrid hr = read_image(root / it->path);
    const std::string id = fs::path(it->path).stem().string();
    out.denoised.push_back(spec ? cached_denoise(root, id, hr, *spec) : hr);
    out.ids.push_back(id);
    out.hr.push_back(std::move(hr));
  }
  return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<TrainingSample> sample_batch(const SplitImages& data, const TrainConfig& cfg,
                                         std::mt19937_64& rng) {
  if (data.hr.empty()) throw ConfigError("training split is empty");
  std::vector<TrainingSample> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch));
  const int t = cfg.tile_hr;
  int failures = 0;
  while (static_cast<int>(batch.size()) < cfg.batch) {
    const auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(data.hr.size()));
    const double s = cfg.s_min + uniform01(rng) * (cfg.s_max - cfg.s_min);
    const ImageGrid& img = data.hr[idx];
    const double u_r = uniform01(rng);
    const double u_c = uniform01(rng);
    if (img.rows() < t || img.cols() < t || lr_extent(t, s) < 8) {
      if (++failures >= 100) {
        throw ConfigError("could not draw a " + std::to_string(t) + "px tile after 100 attempts");
      }
      continue;
    }
    failures = 0;
    const int r0 = static_cast<int>(u_r * (img.rows() - t + 1));
    const int c0 = static_cast<int>(u_c * (img.cols() - t + 1));
    TrainingSample smp;
    smp.hr = img.crop(r0, c0, t, t);
    smp.denoised_hr = data.denoised[idx].crop(r0, c0, t, t);
    smp.lr = make_lr_pair(smp.hr, s).lr;
    smp.scale = s;
    batch.push_back(std::move(smp));
  }
  return batch;
}

LossTerms loss(Var pred, const Tensor& hr, const Tensor& denoised_hr, double lambda) {
  if (pred.shape() != hr.shape() || pred.shape() != denoised_hr.shape()) {
    throw UsageError("loss: prediction " + shape_str(pred.shape()) + " vs targets " +
                     shape_str(hr.shape()) + ", " + shape_str(denoised_hr.shape()));
  }
  LossTerms t;
  t.consistency = ops::mean_abs_error(pred, hr);
  t.denoise = ops::mean_squared_error(pred, denoised_hr);
  t.total = ops::add_scaled(t.consistency, t.denoise, static_cast<float>(lambda));
  return t;
}

namespace {

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string step_dir(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld", static_cast<long long>(step));
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,train_loss,val_psnr,val_vif,wall_ms\n";
  for (const auto& p : curve) {
    out += std::to_string(p.step) + "," + fmt_double(p.train_loss) + "," + fmt_double(p.val_psnr) + "," +
           fmt_double(p.val_vif) + "," + std::to_string(p.wall_ms) + "\n";
  }
  return out;
}

std::pair<double, double> validate_model(const Model& model, const SplitImages& data, double scale) {
  if (data.hr.empty()) return {0.0, 0.0};
  double psnr_sum = 0.0, vif_sum = 0.0;
  for (const ImageGrid& hr : data.hr) {
    const ImageGrid lr = make_lr_pair(hr, scale).lr;
    ImageGrid ref = hr;
    int rows = hr.rows(), cols = hr.cols();
    if (model.config().kind == ModelKind::conv) {
      rows = model.config().scale * lr.rows();
      cols = model.config().scale * lr.cols();
      ref = hr.crop(0, 0, rows, cols);
    }
    const ImageGrid pred = model.infer(lr, rows, cols);
    psnr_sum += psnr(pred, ref);
    vif_sum += vif(pred, ref);
  }
  const double n = static_cast<double>(data.hr.size());
  return {psnr_sum / n, vif_sum / n};
}

TrainResult train(const TrainConfig& cfg, const fs::path& out_dir, const EvalCallback& on_eval) {
  cfg.validate();
#if defined(__GLIBC__)
  static const bool heap_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)heap_tuned;
#endif
  ModelConfig mc = cfg.model;
  if (mc.kind == ModelKind::conv) mc.scale = static_cast<int>(cfg.s_max);
  const std::int64_t total = cfg.total_steps();

  const SplitImages train_set = load_split(cfg.dataset, Split::train, cfg.lambda > 0.0 ? &cfg.denoiser : nullptr);
  SplitImages val_set = load_split(cfg.dataset, Split::val, nullptr);
  if (train_set.hr.empty()) throw ConfigError("dataset has an empty train split");
  if (cfg.val_items > 0 && val_set.hr.size() > static_cast<std::size_t>(cfg.val_items)) {
    val_set.hr.resize(static_cast<std::size_t>(cfg.val_items));
    val_set.ids.resize(static_cast<std::size_t>(cfg.val_items));
    val_set.denoised.resize(static_cast<std::size_t>(cfg.val_items));
  }

  fs::create_directories(out_dir / "checkpoints");
  write_text(out_dir / "resolved-config.json", train_config_to_json(cfg));

  TrainResult result{{}, 0, -std::numeric_limits<double>::infinity(), Model(mc, cfg.seed)};
  Model& model = result.final_model;
  save_checkpoint(out_dir / "checkpoints" / step_dir(0), model, {0, cfg.seed});

  std::vector<Tensor*> param_ptrs;
  std::vector<std::string> names;
  for (auto& p : model.params()) {
    param_ptrs.push_back(&p.value);
    names.push_back(p.name);
  }
  AdamState state = AdamState::for_params(param_ptrs);
  std::mt19937_64 rng(splitmix64(cfg.seed));
  const auto schedule = eval_schedule(total, cfg.eval_every);
  std::size_t next_eval = 0;
  const auto t0 = std::chrono::steady_clock::now();
  double loss_acc = 0.0;
  std::int64_t loss_n = 0;

  std::vector<NamedTensor> last_good = model.params();
  auto abort_run = [&](std::int64_t step, const NumericError& e) {
    save_checkpoint(out_dir / "checkpoints" / "last_good", Model(mc, last_good), {step - 1, cfg.seed});
    write_text(out_dir / "curve.csv", curve_csv(result.curve));
    return NumericError("training aborted at step " + std::to_string(step) + ": " + e.what() +
                        " (last good parameters in checkpoints/last_good)");
  };

  for (std::int64_t step = 1; step <= total; ++step) {
    const auto batch = sample_batch(train_set, cfg, rng);
    try {
      Tape tape;
      const auto params = model.bind(tape, true);
      Var sum;
      for (const auto& smp : batch) {
        Var x = tape.constant(smp.lr.to_tensor());
        Var pred = model.forward(tape, params, x, smp.hr.rows(), smp.hr.cols());
        const LossTerms lt = loss(pred, smp.hr.to_tensor(), smp.denoised_hr.to_tensor(), cfg.lambda);
        sum = sum.valid() ? ops::add(sum, lt.total) : lt.total;
      }
      Var mean = ops::scale(sum, 1.0f / static_cast<float>(batch.size()));
      const double step_loss = mean.value()[0];
      if (!std::isfinite(step_loss)) throw NumericError("non-finite training loss");
      tape.backward(mean);
      std::vector<const Tensor*> grads;
      grads.reserve(params.size());
      for (const Var& v : params) grads.push_back(&tape.grad(v));
      for (std::size_t i = 0; i < last_good.size(); ++i) last_good[i].value = model.params()[i].value;
      adam_step(param_ptrs, grads, state, cfg.adam, names);
      loss_acc += step_loss;
      ++loss_n;
    } catch (const NumericError& e) {
      throw abort_run(step, e);
    }

    if (next_eval < schedule.size() && schedule[next_eval] == step) {
      ++next_eval;
      CurvePoint pt;
      pt.step = step;
      pt.train_loss = loss_acc / static_cast<double>(loss_n);
      loss_acc = 0.0;
      loss_n = 0;
      try {
        std::tie(pt.val_psnr, pt.val_vif) = validate_model(model, val_set, cfg.s_max);
      } catch (const NumericError& e) {
        throw abort_run(step, e);
      }
      if (cfg.record_wall_time) {
        pt.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      }
      result.curve.push_back(pt);
      save_checkpoint(out_dir / "checkpoints" / step_dir(step), model, {step, cfg.seed});
      if (pt.val_psnr > result.best_psnr) {
        result.best_psnr = pt.val_psnr;
        result.best_step = step;
        save_checkpoint(out_dir / "checkpoints" / "best", model, {step, cfg.seed});
      }
      write_text(out_dir / "curve.csv", curve_csv(result.curve));
      if (on_eval) on_eval(pt);
    }
  }
  if (total == 0) write_text(out_dir / "curve.csv", curve_csv(result.curve));
  return result;
}

}  // namespace coordsr
