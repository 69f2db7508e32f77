#include "coordsr/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coordsr/errors.hpp"

namespace coordsr {

EnsembleWeights ensemble_weights(ContinuousCoord query, int grid_rows, int grid_cols) {
  if (grid_rows < 1 || grid_cols < 1) throw ConfigError("ensemble grid dims must be >= 1");
  if (!(query.x >= 0.0 && query.x <= 1.0 && query.y >= 0.0 && query.y <= 1.0)) {
    throw DomainError("query (" + std::to_string(query.x) + ", " + std::to_string(query.y) +
                      ") outside [0,1]^2");
  }
  // continuous cell coordinates; integer values sit on cell centers
  const double u = query.x * grid_cols - 0.5;
  const double v = query.y * grid_rows - 0.5;

  auto axis = [](double t, int n, int& i0, int& i1, double& frac) {
    if (n == 1) {
      i0 = i1 = 0;
      frac = 0.0;
      return;
    }
    const double tc = std::clamp(t, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(tc)), n - 2);
    i1 = i0 + 1;
    frac = tc - i0;
    // absorb round-off from the normalized-coordinate round trip
    if (frac < 1e-9) frac = 0.0;
    if (frac > 1.0 - 1e-9) frac = 1.0;
  };

  int r0, r1, c0, c1;
  double fy, fx;
  axis(v, grid_rows, r0, r1, fy);
  axis(u, grid_cols, c0, c1, fx);

  EnsembleWeights e;
  e.rows = {r0, r0, r1, r1};
  e.cols = {c0, c1, c0, c1};
  e.weights = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx};
  for (int k = 0; k < 4; ++k) {
    e.dx[k] = u - e.cols[k];
    e.dy[k] = v - e.rows[k];
  }
  return e;
}

EnsembleGeometry ensemble_geometry(int grid_rows, int grid_cols, int out_rows, int out_cols) {
  if (out_rows < 1 || out_cols < 1) throw ConfigError("output dims must be >= 1");
  EnsembleGeometry g;
  g.grid_rows = grid_rows;
  g.grid_cols = grid_cols;
  g.out_rows = out_rows;
  g.out_cols = out_cols;
  const std::size_t q = static_cast<std::size_t>(out_rows) * out_cols;
  g.cell.resize(q);
  g.weight.resize(q);
  g.offset.resize(q);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      const ContinuousCoord p{(c + 0.5) / out_cols, (r + 0.5) / out_rows};
      const EnsembleWeights e = ensemble_weights(p, grid_rows, grid_cols);
      const std::size_t i = static_cast<std::size_t>(r) * out_cols + c;
      for (int k = 0; k < 4; ++k) {
        g.cell[i][k] = e.rows[k] * grid_cols + e.cols[k];
        g.weight[i][k] = static_cast<float>(e.weights[k]);
        g.offset[i][2 * k] = static_cast<float>(e.dx[k]);
        g.offset[i][2 * k + 1] = static_cast<float>(e.dy[k]);
      }
    }
  }
  return g;
}

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

struct Taps {
  std::vector<std::array<int, 4>> idx;
  std::vector<std::array<double, 4>> w;
};

Taps make_taps(int in_n, int out_n) {
  Taps t;
  t.idx.resize(out_n);
  t.w.resize(out_n);
  const double ratio = static_cast<double>(in_n) / out_n;
  for (int o = 0; o < out_n; ++o) {
    const double src = (o + 0.5) * ratio - 0.5;
    const int x0 = static_cast<int>(std::floor(src));
    const double f = src - x0;
    for (int k = 0; k < 4; ++k) {
      t.idx[o][k] = reflect101(x0 - 1 + k, in_n);
      t.w[o][k] = cubic_kernel(f + 1.0 - k);
    }
  }
  return t;
}

}  // namespace

ImageGrid bicubic_resize(const ImageGrid& img, int out_rows, int out_cols) {
  if (img.empty()) throw ConfigError("bicubic_resize of an empty image");
  if (out_rows < 1 || out_cols < 1) throw ConfigError("bicubic_resize output dims must be >= 1");
  const int in_rows = img.rows();
  const int in_cols = img.cols();
  const Taps tc = make_taps(in_cols, out_cols);
  const Taps tr = make_taps(in_rows, out_rows);

  std::vector<double> horiz(static_cast<std::size_t>(in_rows) * out_cols);
  for (int r = 0; r < in_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += tc.w[c][k] * img(r, tc.idx[c][k]);
      horiz[static_cast<std::size_t>(r) * out_cols + c] = s;
    }
  }
  ImageGrid out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) {
        s += tr.w[r][k] * horiz[static_cast<std::size_t>(tr.idx[r][k]) * out_cols + c];
      }
      out(r, c) = static_cast<float>(s);
    }
  }
  return out;
}

int lr_extent(int n, double scale) {
  return static_cast<int>(std::floor(n / scale + 1e-9));
}

LrPair make_lr_pair(const ImageGrid& hr, double scale) {
  if (!(scale >= 1.0) || !std::isfinite(scale)) {
    throw DomainError("scale must be >= 1, got " + std::to_string(scale));
  }
  const int rows = lr_extent(hr.rows(), scale);
  const int cols = lr_extent(hr.cols(), scale);
  if (rows < 8 || cols < 8) {
    throw DomainError("low-resolution image " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " is smaller than 8x8");
  }
  return LrPair{bicubic_resize(hr, rows, cols), scale};
}

}  // namespace coordsr
