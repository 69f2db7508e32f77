#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coordsr/image.hpp"
#include "coordsr/phantom.hpp"

namespace coordsr {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestItem {
  std::string path;   // relative to the manifest directory
  std::string group;  // volume/group id; splits never straddle a group
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<ManifestItem> items;
  std::uint64_t seed = 0;
  double sigma_k = 0.0;
  std::string source;  // "phantom" | "ingested"
  std::string kind;    // phantom kind, empty for ingested data

  std::vector<const ManifestItem*> split(Split s) const;
};

/// (path, group) candidates for a manifest.
struct ManifestCandidate {
  std::string path;
  std::string group;
};

/// Seeded shuffle of the groups, then greedy assignment to train, val and
/// test with item-count targets round(0.8 N), round(0.1 N) and the rest.
/// Throws ConfigError for fewer than 10 items.
DatasetManifest build_manifest(const std::vector<ManifestCandidate>& items, std::uint64_t seed);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Options for generating a dataset directory.
struct SimulateOptions {
  std::optional<PhantomKind> kind = PhantomKind::texture;
  std::filesystem::path input_dir;  // ingest PNG/FT1 files instead of phantoms
  int n = 128;
  int count = 20;
  double sigma_k = 0.03;
  int coils = 1;
  std::uint64_t seed = 0;
};

/// Writes images/<item>.ft1 (noisy ground truth), clean/<item>.ft1 for
/// phantom sources, and manifest.json under
/// `out_dir`. Item i uses phantom seed (seed ^ i). Ingested images come
/// from `input_dir`; files inside a subdirectory share that subdirectory as
/// their group.
DatasetManifest simulate_dataset(const SimulateOptions& opt, const std::filesystem::path& out_dir);

/// Portable Fisher-Yates driven by a 64-bit seed (independent of the
/// standard library's distribution implementations).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace coordsr
