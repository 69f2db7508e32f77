#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coordsr/dataset.hpp"
#include "coordsr/models.hpp"

namespace coordsr {

struct StudyExportOptions {
  Split split = Split::test;
  double scale = 2.0;
  std::uint64_t seed = 0;
  std::string study_id = "study";
  std::string label_a = "A";
  std::string label_b = "B";
};

struct StudyExportResult {
  std::vector<std::string> pair_ids;
  std::vector<bool> a_left;  // per pair: method A shown on the left
};

/// Per-pair A/B side assignment: bit i is set when A goes on the left.
std::vector<bool> study_side_assignment(std::size_t n, std::uint64_t seed);

/// Super-resolves every ground-truth image of the split by `scale` with
/// both models and writes
///   <out>/study/study.json     {study_id, seed, pairs[{pair_id,left,right}], anchors}
///   <out>/study/pairs/*.png    8-bit, named by pair id and side only
///   <out>/key.json             {study_id, method_a, method_b,
///                               pairs[{pair_id, item, a_side}]}
/// On any failure the partial outputs are removed and the error rethrown.
StudyExportResult export_study(const Model& a, const Model& b, const std::filesystem::path& dataset_root,
                               const StudyExportOptions& opt, const std::filesystem::path& out_dir);

}  // namespace coordsr
