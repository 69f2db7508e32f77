#include "coordsr/fft.hpp"

#include <cmath>
#include <numbers>

#include "coordsr/errors.hpp"

namespace coordsr {

ComplexImage::ComplexImage(int rows, int cols, cfloat fill) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw ConfigError("negative complex image dims");
  data_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

ComplexImage::ComplexImage(const ImageGrid& real) : ComplexImage(real.rows(), real.cols()) {
  const auto px = real.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) data_[i] = cfloat(px[i], 0.0f);
}

ImageGrid ComplexImage::magnitude() const {
  ImageGrid out(rows_, cols_);
  auto px = out.pixels();
  for (std::size_t i = 0; i < data_.size(); ++i) px[i] = std::abs(data_[i]);
  return out;
}

ImageGrid ComplexImage::real() const {
  ImageGrid out(rows_, cols_);
  auto px = out.pixels();
  for (std::size_t i = 0; i < data_.size(); ++i) px[i] = data_[i].real();
  return out;
}

namespace {

using cd = std::complex<double>;

std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t p = 3; p * p <= n; p += 2)
    if (n % p == 0) return p;
  return n;
}

// out[k] = sum_j in[j*stride] * w^(j*k), with twiddle table of the full
// transform length N and `tw_step` = N / n.
void fft_rec(const cd* in, std::size_t stride, cd* out, std::size_t n, const std::vector<cd>& tw,
             std::size_t tw_step) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = smallest_factor(n);
  const std::size_t m = n / p;
  if (m == 1) {
    // prime length: direct summation
    for (std::size_t k = 0; k < n; ++k) {
      cd s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += in[j * stride] * tw[((j * k) % n) * tw_step];
      out[k] = s;
    }
    return;
  }
  std::vector<cd> sub(n);
  for (std::size_t r = 0; r < p; ++r) {
    fft_rec(in + r * stride, stride * p, sub.data() + r * m, m, tw, tw_step * p);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t km = k % m;
    cd s = 0.0;
    for (std::size_t r = 0; r < p; ++r) s += sub[r * m + km] * tw[((r * k) % n) * tw_step];
    out[k] = s;
  }
}

}  // namespace

void fft1d(std::vector<cd>& x, bool inverse) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  std::vector<cd> tw(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    tw[i] = cd(std::cos(a), std::sin(a));
  }
  std::vector<cd> out(n);
  fft_rec(x.data(), 1, out.data(), n, tw, 1);
  x.swap(out);
}

namespace {

ComplexImage transform2(const ComplexImage& x, bool inverse) {
  const int rows = x.rows();
  const int cols = x.cols();
  if (rows < 1 || cols < 1) throw ConfigError("fft2 of an empty array");
  std::vector<cd> buf(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = cd(x.data()[i].real(), x.data()[i].imag());

  std::vector<cd> line(static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r) {
    std::copy_n(&buf[static_cast<std::size_t>(r) * cols], cols, line.begin());
    fft1d(line, inverse);
    std::copy_n(line.begin(), cols, &buf[static_cast<std::size_t>(r) * cols]);
  }
  line.resize(static_cast<std::size_t>(rows));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) line[r] = buf[static_cast<std::size_t>(r) * cols + c];
    fft1d(line, inverse);
    for (int r = 0; r < rows; ++r) buf[static_cast<std::size_t>(r) * cols + c] = line[r];
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(rows) * cols);
  ComplexImage out(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.data()[i] = cfloat(static_cast<float>(buf[i].real() * norm),
                           static_cast<float>(buf[i].imag() * norm));
  }
  return out;
}

// spectral energy split at half-Nyquist; returns {high, total_non_dc}
std::pair<double, double> spectral_split(const ImageGrid& img) {
  const KSpace k = fft2(img);
  double high = 0.0, total = 0.0;
  for (int r = 0; r < k.rows(); ++r) {
    const int fr = std::min(r, k.rows() - r);
    for (int c = 0; c < k.cols(); ++c) {
      if (r == 0 && c == 0) continue;
      const int fc = std::min(c, k.cols() - c);
      const double e = std::norm(std::complex<double>(k(r, c)));
      total += e;
      const double fy = static_cast<double>(fr) / k.rows();
      const double fx = static_cast<double>(fc) / k.cols();
      if (std::max(fy, fx) > 0.25) high += e;
    }
  }
  return {high, total};
}

}  // namespace

KSpace fft2(const ComplexImage& x) { return transform2(x, false); }
KSpace fft2(const ImageGrid& x) { return transform2(ComplexImage(x), false); }
ComplexImage ifft2(const KSpace& k) { return transform2(k, true); }

double high_frequency_energy_fraction(const ImageGrid& img) {
  const auto [high, total] = spectral_split(img);
  return total > 0.0 ? high / total : 0.0;
}

double high_frequency_energy(const ImageGrid& img) {
  return spectral_split(img).first / static_cast<double>(img.size());
}

}  // namespace coordsr
