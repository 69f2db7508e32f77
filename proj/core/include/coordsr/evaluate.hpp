#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coordsr/dataset.hpp"
#include "coordsr/models.hpp"

namespace coordsr {

struct MetricRow {
  std::string item;
  double psnr_db = 0.0;
  double vif = 0.0;
};

struct MetricReport {
  std::string split;
  double scale = 2.0;
  std::string model;  // "coord", "conv" or "bicubic"
  std::optional<double> lambda;
  std::vector<MetricRow> rows;  // sorted by item id
  MetricRow mean{"mean"};
  std::vector<MetricRow> bicubic_rows;
  std::optional<MetricRow> bicubic_mean;

  /// `item,psnr_db,vif`: one row per item, then `mean` and, when
  /// computed, `bicubic_mean`.
  std::string to_csv() const;
  /// Same content plus the config echo; infinities are written as "inf".
  std::string to_json() const;
};

struct EvalOptions {
  Split split = Split::test;
  double scale = 2.0;
  bool with_bicubic = true;
  std::optional<double> lambda;  // echoed only
};

/// Downsamples every item of the split by `scale`, reconstructs it at the
/// original dims with `model` (or only bicubic when `model` is null) and
/// scores it against the ground truth. Conv models reconstruct
/// scale x the LR dims and are scored on the matching crop; asking a conv
/// model for another scale throws UsageError. Empty splits throw ConfigError.
MetricReport evaluate(const Model* model, const std::filesystem::path& dataset_root,
                      const EvalOptions& opt);

}  // namespace coordsr
