#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "coordsr/image.hpp"

namespace coordsr {

enum class DenoiserKind { block_dct, gaussian, identity };

DenoiserKind parse_denoiser_kind(std::string_view s);
std::string to_string(DenoiserKind k);

/// Strength sigma is in [0,1]-intensity std units; sigma = 0 is identity
/// for every kind.
struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::block_dct;
  double sigma = 0.03;
  int block = 8;
  int stride = 4;
  double threshold_mult = 2.7;
};

using Block8 = std::array<std::array<double, 8>, 8>;

/// Orthonormal 8x8 DCT-II and its inverse.
Block8 dct2(const Block8& b);
Block8 idct2(const Block8& c);

/// block_dct: overlapping 8x8 blocks (stride 4, last block flush with the
/// border), hard-threshold AC coefficients with |c| < threshold_mult*sigma,
/// uniform overlap averaging. gaussian: separable blur with std 25*sigma px
/// truncated at 3 std, half-sample symmetric borders. Throws DomainError
/// for sigma < 0.
ImageGrid denoise(const ImageGrid& x, const DenoiserSpec& spec);

/// `<dataset>/denoised/<sigma>/<item>.ft1` (non-default kinds get a
/// "-<kind>" suffix on the sigma directory).
std::filesystem::path denoised_cache_path(const std::filesystem::path& dataset_root,
                                          const DenoiserSpec& spec, const std::string& item);

/// Loads the cached denoised image or computes and stores it.
ImageGrid cached_denoise(const std::filesystem::path& dataset_root, const std::string& item,
                         const ImageGrid& x, const DenoiserSpec& spec);

}  // namespace coordsr
