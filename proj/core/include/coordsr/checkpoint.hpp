#pragma once

#include <cstdint>
#include <filesystem>

#include "coordsr/models.hpp"

namespace coordsr {

struct CheckpointMeta {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

/// Directory with descriptor.json {arch, d, blocks, mlp_layers, hidden,
/// liif_mode, scale, step, seed, params} and one <param>.ft1 per tensor.
/// Written to a sibling temp dir and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const Model& model, const CheckpointMeta& meta);

/// Throws ConfigError for a missing or malformed checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace coordsr
