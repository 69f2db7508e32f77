#include "coordsr/denoise.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "coordsr/errors.hpp"
#include "coordsr/ft1.hpp"

namespace coordsr {

DenoiserKind parse_denoiser_kind(std::string_view s) {
  if (s == "block-dct" || s == "block_dct") return DenoiserKind::block_dct;
  if (s == "gaussian") return DenoiserKind::gaussian;
  if (s == "identity") return DenoiserKind::identity;
  throw ConfigError("unknown denoiser kind '" + std::string(s) + "'");
}

std::string to_string(DenoiserKind k) {
  switch (k) {
    case DenoiserKind::block_dct: return "block-dct";
    case DenoiserKind::gaussian: return "gaussian";
    case DenoiserKind::identity: return "identity";
  }
  return "?";
}

namespace {

const std::array<std::array<double, 8>, 8>& dct_matrix() {
  static const auto m = [] {
    std::array<std::array<double, 8>, 8> c{};
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) c[k][n] = a * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    }
    return c;
  }();
  return m;
}

// half-sample symmetric: ... b a | a b ... ; handles any overshoot
int reflect_symmetric(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<int> block_starts(int extent, int block, int stride) {
  std::vector<int> s;
  for (int p = 0; p + block <= extent; p += stride) s.push_back(p);
  if (s.empty() || s.back() != extent - block) s.push_back(extent - block);
  return s;
}

ImageGrid block_dct(const ImageGrid& x, const DenoiserSpec& spec) {
  if (spec.block != 8) throw ConfigError("block-dct denoiser supports 8x8 blocks only");
  if (spec.stride < 1) throw ConfigError("block-dct stride must be >= 1");
  if (x.rows() < 8 || x.cols() < 8) throw ConfigError("block-dct needs images of at least 8x8");
  const double thr = spec.threshold_mult * spec.sigma;
  const auto rs = block_starts(x.rows(), 8, spec.stride);
  const auto cs = block_starts(x.cols(), 8, spec.stride);

  std::vector<double> acc(x.size(), 0.0);
  std::vector<int> cnt(x.size(), 0);
  Block8 b;
  for (int r0 : rs) {
    for (int c0 : cs) {
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) b[i][j] = x(r0 + i, c0 + j);
      Block8 c = dct2(b);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          if ((i || j) && std::abs(c[i][j]) < thr) c[i][j] = 0.0;
      const Block8 y = idct2(c);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          const std::size_t p = static_cast<std::size_t>(r0 + i) * x.cols() + (c0 + j);
          acc[p] += y[i][j];
          cnt[p] += 1;
        }
    }
  }
  ImageGrid out(x.rows(), x.cols());
  auto px = out.pixels();
  for (std::size_t p = 0; p < px.size(); ++p) px[p] = static_cast<float>(acc[p] / cnt[p]);
  return out;
}

ImageGrid gaussian(const ImageGrid& x, double sigma) {
  const double sd = 25.0 * sigma;
  const int radius = static_cast<int>(std::ceil(3.0 * sd));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double ks = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sd * sd));
    ks += k[i + radius];
  }
  for (double& v : k) v /= ks;

  const int rows = x.rows(), cols = x.cols();
  std::vector<double> tmp(x.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) s += k[i + radius] * x(r, reflect_symmetric(c + i, cols));
      tmp[static_cast<std::size_t>(r) * cols + c] = s;
    }
  ImageGrid out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += k[i + radius] * tmp[static_cast<std::size_t>(reflect_symmetric(r + i, rows)) * cols + c];
      out(r, c) = static_cast<float>(s);
    }
  return out;
}

}  // namespace

Block8 dct2(const Block8& b) {
  const auto& m = dct_matrix();
  Block8 t{}, out{};
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += m[k][n] * b[n][j];
      t[k][j] = s;
    }
  for (int i = 0; i < 8; ++i)
    for (int k = 0; k < 8; ++k) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += t[i][n] * m[k][n];
      out[i][k] = s;
    }
  return out;
}

Block8 idct2(const Block8& c) {
  const auto& m = dct_matrix();
  Block8 t{}, out{};
  for (int n = 0; n < 8; ++n)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += m[k][n] * c[k][j];
      t[n][j] = s;
    }
  for (int i = 0; i < 8; ++i)
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += t[i][k] * m[k][n];
      out[i][n] = s;
    }
  return out;
}

ImageGrid denoise(const ImageGrid& x, const DenoiserSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw DomainError("denoiser sigma must be >= 0");
  if (spec.sigma == 0.0 || spec.kind == DenoiserKind::identity) return x;
  switch (spec.kind) {
    case DenoiserKind::block_dct: return block_dct(x, spec);
    case DenoiserKind::gaussian: return gaussian(x, spec.sigma);
    case DenoiserKind::identity: break;
  }
  return x;
}

std::filesystem::path denoised_cache_path(const std::filesystem::path& dataset_root,
                                          const DenoiserSpec& spec, const std::string& item) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", spec.sigma);
  std::string dir = buf;
  if (spec.kind != DenoiserKind::block_dct) dir += "-" + to_string(spec.kind);
  return dataset_root / "denoised" / dir / (item + ".ft1");
}

ImageGrid cached_denoise(const std::filesystem::path& dataset_root, const std::string& item,
                         const ImageGrid& x, const DenoiserSpec& spec) {
  const auto path = denoised_cache_path(dataset_root, spec, item);
  if (std::filesystem::exists(path)) {
    ImageGrid cached = read_image_ft1(path);
    if (cached.rows() == x.rows() && cached.cols() == x.cols()) return cached;
  }
  ImageGrid d = denoise(x, spec);
  std::filesystem::create_directories(path.parent_path());
  write_image_ft1(path, d);
  return d;
}

}  // namespace coordsr
