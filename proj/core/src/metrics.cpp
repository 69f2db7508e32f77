#include "coordsr/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "coordsr/errors.hpp"
#include "coordsr/resample.hpp"

namespace coordsr {

namespace {

void check_dims(const ImageGrid& a, const ImageGrid& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(who) + ": image dims differ (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

struct Plane {
  int rows = 0, cols = 0;
  std::vector<double> v;
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

Plane to_plane(const ImageGrid& img) {
  Plane p{img.rows(), img.cols(), std::vector<double>(img.size())};
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) p.v[i] = 255.0 * px[i];
  return p;
}

std::vector<double> gaussian_window(int size, double sd) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int half = size / 2;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - half) * (i - half) / (sd * sd));
    s += w[i];
  }
  for (double& x : w) x /= s;
  return w;
}

// separable "same" filtering with reflect-101 borders
Plane filter(const Plane& in, const std::vector<double>& w) {
  const int half = static_cast<int>(w.size()) / 2;
  Plane tmp{in.rows, in.cols, std::vector<double>(in.v.size())};
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) s += w[k + half] * in.at(r, reflect101(c + k, in.cols));
      tmp.at(r, c) = s;
    }
  Plane out{in.rows, in.cols, std::vector<double>(in.v.size())};
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) s += w[k + half] * tmp.at(reflect101(r + k, in.rows), c);
      out.at(r, c) = s;
    }
  return out;
}

Plane decimate(const Plane& in) {
  Plane out{(in.rows + 1) / 2, (in.cols + 1) / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.rows) * out.cols);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) = in.at(2 * r, 2 * c);
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p{a.rows, a.cols, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

}  // namespace

double mse(const ImageGrid& a, const ImageGrid& b) {
  check_dims(a, b, "mse");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    s += d * d;
  }
  return pa.empty() ? 0.0 : s / static_cast<double>(pa.size());
}

double psnr(const ImageGrid& estimate, const ImageGrid& reference, double peak) {
  check_dims(estimate, reference, "psnr");
  const double m = mse(estimate, reference);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

double vif(const ImageGrid& distorted, const ImageGrid& reference) {
  check_dims(distorted, reference, "vif");
  if (reference.rows() < 32 || reference.cols() < 32) {
    throw DomainError("vif needs images of at least 32x32");
  }
  constexpr double sigma_nsq = 2.0;
  constexpr double tiny = 1e-10;
  Plane ref = to_plane(reference);
  Plane dist = to_plane(distorted);
  double num = 0.0, den = 0.0;
  for (int k = 1; k <= 4; ++k) {
    const auto w = gaussian_window((1 << k) + 1, 0.5 * (1 << (k - 1)));
    if (k > 1) {
      ref = decimate(filter(ref, w));
      dist = decimate(filter(dist, w));
    }
    const Plane mu1 = filter(ref, w);
    const Plane mu2 = filter(dist, w);
    const Plane e11 = filter(product(ref, ref), w);
    const Plane e22 = filter(product(dist, dist), w);
    const Plane e12 = filter(product(ref, dist), w);
    for (std::size_t i = 0; i < ref.v.size(); ++i) {
      double s1 = std::max(0.0, e11.v[i] - mu1.v[i] * mu1.v[i]);
      double s2 = std::max(0.0, e22.v[i] - mu2.v[i] * mu2.v[i]);
      const double s12 = e12.v[i] - mu1.v[i] * mu2.v[i];
      double g = s12 / (s1 + tiny);
      double sv = s2 - g * s12;
      if (s1 < tiny) {
        g = 0.0;
        sv = s2;
        s1 = 0.0;
      }
      if (s2 < tiny) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0.0) {
        sv = s2;
        g = 0.0;
      }
      if (sv <= tiny) sv = tiny;
      num += std::log10(1.0 + g * g * s1 / (sv + sigma_nsq));
      den += std::log10(1.0 + s1 / sigma_nsq);
    }
  }
  if (den <= 0.0) return 1.0;
  return num / den;
}

}  // namespace coordsr
