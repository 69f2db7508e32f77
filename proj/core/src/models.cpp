#include "coordsr/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "coordsr/errors.hpp"
#include "coordsr/ops.hpp"

namespace coordsr {

ModelKind parse_model_kind(std::string_view s) {
  if (s == "coord") return ModelKind::coord;
  if (s == "conv") return ModelKind::conv;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

std::string to_string(ModelKind k) { return k == ModelKind::coord ? "coord" : "conv"; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.blocks = 16;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.d = 8;
  c.blocks = 2;
  c.mlp_layers = 3;
  c.hidden = 16;
  return c;
}

void ModelConfig::validate() const {
  std::vector<std::string> bad;
  if (d < 1) bad.push_back("d must be >= 1");
  if (blocks < 0) bad.push_back("blocks must be >= 0");
  if (kind == ModelKind::coord) {
    if (mlp_layers < 2) bad.push_back("mlp_layers must be >= 2");
    if (hidden < 1) bad.push_back("hidden must be >= 1");
  } else if (scale < 2 || scale > 4) {
    bad.push_back("conv scale must be 2, 3 or 4");
  }
  if (!bad.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw ConfigError(msg);
  }
}

std::size_t encoder_param_count(int d, int blocks) {
  const std::size_t dd = static_cast<std::size_t>(d);
  return 10 * dd + static_cast<std::size_t>(blocks) * (18 * dd * dd + 2 * dd) + 9 * dd * dd + dd;
}

std::size_t mlp_param_count(int in, int hidden, int layers) {
  const std::size_t h = static_cast<std::size_t>(hidden);
  return (static_cast<std::size_t>(in) * h + h) + static_cast<std::size_t>(layers - 2) * (h * h + h) +
         (h + 1);
}

std::size_t conv_decoder_param_count(int d, int scale) {
  const std::size_t dd = static_cast<std::size_t>(d);
  const std::size_t up = dd * static_cast<std::size_t>(scale * scale);
  return (up * dd * 9 + up) + (dd * 9 + 1);
}

namespace {

Tensor kaiming(Shape shape, int fan_in, float gain, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const float bound = gain * std::sqrt(6.0f / static_cast<float>(fan_in));
  std::uniform_real_distribution<float> u(-bound, bound);
  for (float& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  init(seed);
}

Model::Model(ModelConfig cfg, std::vector<NamedTensor> params) : cfg_(cfg) {
  cfg_.validate();
  Model fresh(cfg_, 0);
  if (fresh.params_.size() != params.size()) {
    throw ConfigError("parameter list does not match the model config");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (fresh.params_[i].name != params[i].name ||
        fresh.params_[i].value.shape() != params[i].value.shape()) {
      throw ConfigError("parameter " + params[i].name + " " + shape_str(params[i].value.shape()) +
                        " does not match expected " + fresh.params_[i].name + " " +
                        shape_str(fresh.params_[i].value.shape()));
    }
  }
  params_ = std::move(params);
  encoder_tensors_ = fresh.encoder_tensors_;
}

void Model::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int d = cfg_.d;
  auto conv = [&](const std::string& name, int cout, int cin, float gain) {
    params_.push_back({name + ".w", kaiming({cout, cin, 3, 3}, cin * 9, gain, rng)});
    params_.push_back({name + ".b", Tensor::zeros({cout})});
  };
  conv("enc.head", d, 1, 1.0f);
  for (int b = 0; b < cfg_.blocks; ++b) {
    conv("enc.block" + std::to_string(b) + ".conv1", d, d, 1.0f);
    conv("enc.block" + std::to_string(b) + ".conv2", d, d, 0.1f);
  }
  conv("enc.tail", d, d, 1.0f);
  encoder_tensors_ = params_.size();

  if (cfg_.kind == ModelKind::coord) {
    int in = d + (cfg_.liif_mode ? 2 : 0);
    for (int j = 0; j < cfg_.mlp_layers; ++j) {
      const int out = j + 1 == cfg_.mlp_layers ? 1 : cfg_.hidden;
      params_.push_back({"dec.fc" + std::to_string(j) + ".w", kaiming({out, in}, in, 1.0f, rng)});
      params_.push_back({"dec.fc" + std::to_string(j) + ".b", Tensor::zeros({out})});
      in = out;
    }
  } else {
    conv("dec.up", d * cfg_.scale * cfg_.scale, d, 1.0f);
    conv("dec.out", 1, d, 1.0f);
  }
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::size_t Model::encoder_param_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < encoder_tensors_; ++i) n += params_[i].value.numel();
  return n;
}

std::size_t Model::decoder_param_count() const { return param_count() - encoder_param_count(); }

std::vector<Var> Model::bind(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    Tensor t = p.value;
    t.set_requires_grad(trainable);
    out.push_back(tape.leaf(std::move(t)));
  }
  return out;
}

Var Model::encode(Tape& tape, std::span<const Var> p, Var x) const {
  (void)tape;
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 1) throw ConfigError("encoder input must be [N,1,H,W], got " + shape_str(s));
  if (s[2] < 8 || s[3] < 8) {
    throw DomainError("encoder input " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                      " is smaller than 8x8");
  }
  int layer = 0;
  auto guarded = [&](auto&& fn) {
    try {
      return fn();
    } catch (const NumericError& e) {
      throw NumericError("encoder layer " + std::to_string(layer) + ": " + e.what());
    }
  };
  std::size_t i = 0;
  Var head = guarded([&] { return ops::conv2d(x, p[i], p[i + 1]); });
  i += 2;
  Var y = head;
  for (int b = 0; b < cfg_.blocks; ++b) {
    ++layer;
    Var t = guarded([&] { return ops::relu(ops::conv2d(y, p[i], p[i + 1])); });
    ++layer;
    t = guarded([&] { return ops::conv2d(t, p[i + 2], p[i + 3]); });
    y = guarded([&] { return ops::add(y, t); });
    i += 4;
  }
  ++layer;
  y = guarded([&] { return ops::conv2d(y, p[i], p[i + 1]); });
  return guarded([&] { return ops::add(y, head); });
}

Var Model::mlp(Tape& tape, std::span<const Var> params, Var rows) const {
  (void)tape;
  const auto p = decoder_params(params);
  Var h = rows;
  for (int j = 0; j < cfg_.mlp_layers; ++j) {
    h = ops::linear(h, p[2 * j], p[2 * j + 1]);
    if (j + 1 < cfg_.mlp_layers) h = ops::relu(h);
  }
  return h;
}

Var Model::decode(Tape& tape, std::span<const Var> params, Var features,
                  const EnsembleGeometry& geom) const {
  if (cfg_.kind != ModelKind::coord) throw UsageError("decode() needs a coordinate model");
  const Shape& s = features.shape();
  const int n = s[0];
  if (cfg_.liif_mode) {
    Var codes = ops::gather_codes(features, geom, true);
    return ops::blend_neighbors(mlp(tape, params, codes), geom, n);
  }
  // g depends on the code alone, so evaluating it once per cell and
  // blending the cell outputs equals blending the four per-query outputs.
  Var cells = ops::from_rows(mlp(tape, params, ops::to_rows(features)), n, s[2], s[3]);
  return ops::ensemble_upsample(cells, geom);
}

Var Model::forward(Tape& tape, std::span<const Var> params, Var x, int out_rows, int out_cols) const {
  if (params.size() != params_.size()) throw UsageError("forward: parameter count mismatch");
  Var c = encode(tape, params, x);
  const int l = x.shape()[2], w = x.shape()[3];
  if (cfg_.kind == ModelKind::conv) {
    if (out_rows != cfg_.scale * l || out_cols != cfg_.scale * w) {
      throw UsageError("conv model trained at " + std::to_string(cfg_.scale) + "x cannot produce " +
                       std::to_string(out_rows) + "x" + std::to_string(out_cols) + " from " +
                       std::to_string(l) + "x" + std::to_string(w));
    }
    const auto p = decoder_params(params);
    Var up = ops::pixel_shuffle(ops::conv2d(c, p[0], p[1]), cfg_.scale);
    return ops::conv2d(up, p[2], p[3]);
  }
  return decode(tape, params, c, ensemble_geometry(l, w, out_rows, out_cols));
}

namespace {

EnsembleGeometry slice_rows(const EnsembleGeometry& g, int r0, int r1) {
  EnsembleGeometry s;
  s.grid_rows = g.grid_rows;
  s.grid_cols = g.grid_cols;
  s.out_rows = r1 - r0;
  s.out_cols = g.out_cols;
  const auto b = static_cast<std::size_t>(r0) * g.out_cols;
  const auto e = static_cast<std::size_t>(r1) * g.out_cols;
  s.cell.assign(g.cell.begin() + b, g.cell.begin() + e);
  s.weight.assign(g.weight.begin() + b, g.weight.begin() + e);
  s.offset.assign(g.offset.begin() + b, g.offset.begin() + e);
  return s;
}

}  // namespace

Tensor encode(const Model& model, const ImageGrid& x_lr) {
  Tape tape;
  const auto params = model.bind(tape, false);
  Var x = tape.constant(x_lr.to_tensor());
  return model.encode(tape, params, x).value();
}

double decode_point(const Model& model, const Tensor& features, ContinuousCoord query) {
  if (model.config().kind != ModelKind::coord) throw UsageError("decode_point needs a coordinate model");
  const Shape& s = features.shape();
  if (s.size() != 4 || s[0] != 1) throw ConfigError("features must be [1,d,l,w]");
  const EnsembleWeights e = ensemble_weights(query, s[2], s[3]);
  const int d = s[1];
  const bool liif = model.config().liif_mode;
  const int width = d + (liif ? 2 : 0);
  Tape tape;
  const auto params = model.bind(tape, false);
  Tensor rows({4, width});
  for (int k = 0; k < 4; ++k) {
    for (int c = 0; c < d; ++c) rows[k * width + c] = features.at(0, c, e.rows[k], e.cols[k]);
    if (liif) {
      rows[k * width + d] = static_cast<float>(e.dx[k]);
      rows[k * width + d + 1] = static_cast<float>(e.dy[k]);
    }
  }
  const Tensor out = model.mlp(tape, params, tape.constant(std::move(rows))).value();
  double v = 0.0;
  for (int k = 0; k < 4; ++k) v += e.weights[k] * out[k];
  return v;
}

ImageGrid decode_image(const Model& model, const Tensor& features, int out_rows, int out_cols) {
  if (model.config().kind != ModelKind::coord) throw UsageError("decode_image needs a coordinate model");
  const Shape& s = features.shape();
  if (s.size() != 4 || s[0] != 1) throw ConfigError("features must be [1,d,l,w]");
  const EnsembleGeometry geom = ensemble_geometry(s[2], s[3], out_rows, out_cols);
  ImageGrid out(out_rows, out_cols);
  // bound the tape footprint of per-query decoding
  const int chunk = model.config().liif_mode
                        ? std::max(1, 16384 / std::max(1, out_cols))
                        : out_rows;
  for (int r0 = 0; r0 < out_rows; r0 += chunk) {
    const int r1 = std::min(out_rows, r0 + chunk);
    Tape tape;
    const auto params = model.bind(tape, false);
    Var c = tape.constant(features);
    const EnsembleGeometry part = r1 - r0 == out_rows ? geom : slice_rows(geom, r0, r1);
    const Tensor img = model.decode(tape, params, c, part).value();
    std::copy(img.data().begin(), img.data().end(), &out(r0, 0));
  }
  return out;
}

ImageGrid conv_decode(const Model& model, const Tensor& features, int scale) {
  if (model.config().kind != ModelKind::conv) throw UsageError("conv_decode needs a conv model");
  if (scale != model.config().scale) {
    throw UsageError("conv decoder is fixed at " + std::to_string(model.config().scale) +
                     "x; requested " + std::to_string(scale) + "x");
  }
  Tape tape;
  const auto params = model.bind(tape, false);
  const auto p = std::span<const Var>(params).subspan(model.encoder_tensor_count());
  Var c = tape.constant(features);
  Var up = ops::pixel_shuffle(ops::conv2d(c, p[0], p[1]), scale);
  return ImageGrid::from_tensor(ops::conv2d(up, p[2], p[3]).value());
}

ImageGrid Model::infer(const ImageGrid& input, int out_rows, int out_cols) const {
  const Tensor c = coordsr::encode(*this, input);
  if (cfg_.kind == ModelKind::conv) {
    if (out_rows != cfg_.scale * input.rows() || out_cols != cfg_.scale * input.cols()) {
      throw UsageError("conv model trained at " + std::to_string(cfg_.scale) + "x cannot produce " +
                       std::to_string(out_rows) + "x" + std::to_string(out_cols) + " from " +
                       std::to_string(input.rows()) + "x" + std::to_string(input.cols()));
    }
    return conv_decode(*this, c, cfg_.scale).clamped();
  }
  return decode_image(*this, c, out_rows, out_cols).clamped();
}

}  // namespace coordsr
