#include "coordsr/mri_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "coordsr/errors.hpp"

namespace coordsr {

std::vector<CoilMap> make_coil_maps(int coils, int rows, int cols, double smoothness,
                                    std::uint64_t seed) {
  if (coils < 1) throw ConfigError("coil count must be >= 1");
  if (!(smoothness > 0.0)) throw ConfigError("coil smoothness must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double side = std::max(rows, cols);
  const double sd = smoothness * side;

  std::vector<CoilMap> maps(static_cast<std::size_t>(coils));
  const double rot = unit(rng) * 2.0 * std::numbers::pi;
  for (int i = 0; i < coils; ++i) {
    const double ang = rot + 2.0 * std::numbers::pi * i / coils;
    const double cy = rows / 2.0 + 0.6 * rows * std::sin(ang);
    const double cx = cols / 2.0 + 0.6 * cols * std::cos(ang);
    const double phase0 = unit(rng) * 2.0 * std::numbers::pi;
    const double gy = (unit(rng) - 0.5) * 2.0 * std::numbers::pi / rows;
    const double gx = (unit(rng) - 0.5) * 2.0 * std::numbers::pi / cols;
    ComplexImage s(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double d2 = (r + 0.5 - cy) * (r + 0.5 - cy) + (c + 0.5 - cx) * (c + 0.5 - cx);
        // floor keeps every pixel covered by some coil
        const double mag = std::exp(-d2 / (2.0 * sd * sd)) + 1e-3;
        const double ph = phase0 + gy * r + gx * c;
        s(r, c) = cfloat(static_cast<float>(mag * std::cos(ph)), static_cast<float>(mag * std::sin(ph)));
      }
    }
    maps[static_cast<std::size_t>(i)].sensitivity = std::move(s);
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double ss = 0.0;
      for (const auto& m : maps) ss += std::norm(std::complex<double>(m.sensitivity(r, c)));
      const float inv = static_cast<float>(1.0 / std::sqrt(ss));
      for (auto& m : maps) m.sensitivity(r, c) *= inv;
    }
  }
  return maps;
}

ImageGrid simulate_measurement(const ImageGrid& x, const std::vector<CoilMap>& coils, double sigma_k,
                               std::uint64_t seed) {
  if (!(sigma_k >= 0.0)) throw DomainError("sigma_k must be >= 0, got " + std::to_string(sigma_k));
  const int rows = x.rows();
  const int cols = x.cols();
  for (const auto& c : coils) {
    if (c.sensitivity.rows() != rows || c.sensitivity.cols() != cols) {
      throw ConfigError("coil map dims do not match the image");
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma_k > 0.0 ? sigma_k : 1.0);

  std::vector<double> sum_sq(x.size(), 0.0);
  const std::size_t ncoils = coils.empty() ? 1 : coils.size();
  for (std::size_t i = 0; i < ncoils; ++i) {
    ComplexImage weighted(x);
    if (!coils.empty()) {
      const auto& s = coils[i].sensitivity.data();
      for (std::size_t p = 0; p < weighted.size(); ++p) weighted.data()[p] *= s[p];
    }
    KSpace y = fft2(weighted);
    if (sigma_k > 0.0) {
      for (auto& v : y.data()) {
        const double re = noise(rng);
        const double im = noise(rng);
        v += cfloat(static_cast<float>(re), static_cast<float>(im));
      }
    }
    const ComplexImage recon = ifft2(y);
    for (std::size_t p = 0; p < recon.size(); ++p) {
      sum_sq[p] += std::norm(std::complex<double>(recon.data()[p]));
    }
  }
  ImageGrid out(rows, cols);
  auto px = out.pixels();
  for (std::size_t p = 0; p < px.size(); ++p) {
    px[p] = static_cast<float>(std::clamp(std::sqrt(sum_sq[p]), 0.0, 1.0));
  }
  return out;
}

}  // namespace coordsr
