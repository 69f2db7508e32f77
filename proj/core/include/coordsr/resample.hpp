#pragma once

#include <array>
#include <vector>

#include "coordsr/image.hpp"

namespace coordsr {

/// Normalized image-plane location. Cell (i,j) of an l x w grid has its
/// center at ((j+0.5)/w, (i+0.5)/l).
struct ContinuousCoord {
  double x = 0.0;
  double y = 0.0;
};

/// The four grid cells surrounding a query and their bilinear weights.
/// Entries are ordered (r0,c0), (r0,c1), (r1,c0), (r1,c1).
struct EnsembleWeights {
  std::array<int, 4> rows{};
  std::array<int, 4> cols{};
  std::array<double, 4> weights{};
  /// Query minus neighbor center, in cell units: (dx, dy) per neighbor.
  std::array<double, 4> dx{};
  std::array<double, 4> dy{};
};

EnsembleWeights ensemble_weights(ContinuousCoord query, int grid_rows, int grid_cols);

/// Precomputed ensemble weights for every half-pixel center of an
/// out_rows x out_cols raster queried against a grid_rows x grid_cols grid.
struct EnsembleGeometry {
  int grid_rows = 0;
  int grid_cols = 0;
  int out_rows = 0;
  int out_cols = 0;
  std::vector<std::array<int, 4>> cell;        // flat grid index per neighbor
  std::vector<std::array<float, 4>> weight;
  std::vector<std::array<float, 8>> offset;    // (dx,dy) interleaved per neighbor

  std::size_t queries() const { return cell.size(); }
};

EnsembleGeometry ensemble_geometry(int grid_rows, int grid_cols, int out_rows, int out_cols);

/// Catmull-Rom cubic convolution kernel (a = -0.5).
double cubic_kernel(double x);

/// reflect-101 border index (…2 1 | 0 1 2 … n-1 | n-2 …).
int reflect101(int i, int n);

/// Separable cubic-convolution resize with half-pixel-center mapping and
/// reflect-101 borders. Works for any (possibly non-integer) ratio in each
/// direction. Downsampling applies the kernel at the source rate, without a
/// widened antialiasing footprint.
ImageGrid bicubic_resize(const ImageGrid& img, int out_rows, int out_cols);

/// floor(n/s) side length used for a low-resolution counterpart.
int lr_extent(int n, double scale);

struct LrPair {
  ImageGrid lr;
  double scale = 1.0;
};

/// Bicubic downsampling of `hr` by `scale` to floor(rows/scale) x
/// floor(cols/scale). Throws DomainError for scale < 1 or results < 8 px.
LrPair make_lr_pair(const ImageGrid& hr, double scale);

}  // namespace coordsr
