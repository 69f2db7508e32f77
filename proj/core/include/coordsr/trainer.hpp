#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coordsr/adam.hpp"
#include "coordsr/checkpoint.hpp"
#include "coordsr/dataset.hpp"
#include "coordsr/denoise.hpp"
#include "coordsr/models.hpp"

namespace coordsr {

struct TrainConfig {
  std::filesystem::path dataset;  // directory holding manifest.json
  ModelConfig model;
  double s_min = 1.0;
  double s_max = 2.0;
  double lambda = 10.0;
  DenoiserSpec denoiser;
  /// Unset means 10^3 for coord models and 10^5 for conv models.
  std::optional<std::int64_t> steps;
  AdamOptions adam;
  int tile_hr = 48;
  int batch = 16;
  std::uint64_t seed = 0;
  /// 0 selects a log-spaced schedule (10 points per decade).
  std::int64_t eval_every = 0;
  /// 0 evaluates every validation item.
  int val_items = 0;
  bool record_wall_time = false;

  std::int64_t total_steps() const;
  /// Throws ConfigError listing every offending field.
  void validate() const;
};

/// JSON with TrainConfig field names: dataset, model ("coord"|"conv"), d,
/// blocks, mlp_layers, hidden, liif_mode, scale_range [s_min, s_max],
/// lambda, sigma, denoiser, T, lr, beta1, beta2, eps, tile_hr, batch, seed,
/// eval_every, val_items, record_wall_time. Unknown keys are rejected.
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Steps at which validation runs for a budget of `total` steps; always
/// ends with `total` (empty for total == 0).
std::vector<std::int64_t> eval_schedule(std::int64_t total, std::int64_t every);

struct TrainingSample {
  ImageGrid lr;
  ImageGrid hr;
  ImageGrid denoised_hr;
  double scale = 1.0;
};

/// Ground-truth images of a manifest split plus their cached D_sigma targets.
struct SplitImages {
  std::vector<std::string> ids;
  std::vector<ImageGrid> hr;
  std::vector<ImageGrid> denoised;
};

/// Loads `split` from `<root>/manifest.json`. Denoised targets are read
/// from (or written to) the dataset cache unless `spec` is null.
SplitImages load_split(const std::filesystem::path& root, Split split, const DenoiserSpec* spec);

/// Uniform [0,1) double from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& rng);

/// Draws one batch: per item an image, s ~ U[s_min, s_max], and a
/// tile_hr^2 crop at a uniform offset, downsampled by make_lr_pair.
/// Undersized draws are redrawn; 100 consecutive failures throw ConfigError.
std::vector<TrainingSample> sample_batch(const SplitImages& data, const TrainConfig& cfg,
                                         std::mt19937_64& rng);

struct LossTerms {
  Var total;
  Var consistency;  // mean |x_hat - x_hr|
  Var denoise;      // mean (x_hat - D(x_hr))^2
};

/// L_c + lambda * L_d. Throws UsageError on a shape mismatch.
LossTerms loss(Var pred, const Tensor& hr, const Tensor& denoised_hr, double lambda);

struct CurvePoint {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_psnr = 0.0;
  double val_vif = 0.0;
  std::int64_t wall_ms = 0;
};

std::string curve_csv(const std::vector<CurvePoint>& curve);

struct TrainResult {
  std::vector<CurvePoint> curve;
  std::int64_t best_step = 0;
  double best_psnr = 0.0;
  Model final_model;
};

using EvalCallback = std::function<void(const CurvePoint&)>;

/// Runs exactly total_steps() Adam steps. Under `out_dir` writes
/// resolved-config.json, curve.csv, checkpoints/step_<n>/ at every eval
/// point and the final step, and checkpoints/best/ (max val PSNR). On a
/// non-finite loss or gradient the current parameters are saved to
/// checkpoints/last_good/ and NumericError is rethrown.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const EvalCallback& on_eval = {});

/// Mean PSNR and VIF of `model` over `data` at downsampling `scale`.
std::pair<double, double> validate_model(const Model& model, const SplitImages& data, double scale);

}  // namespace coordsr
