#pragma once

#include <complex>
#include <vector>

#include "coordsr/image.hpp"

namespace coordsr {

using cfloat = std::complex<float>;

/// Complex 2D array, row-major. Used for k-space and coil maps.
class ComplexImage {
 public:
  ComplexImage() = default;
  ComplexImage(int rows, int cols, cfloat fill = {});
  explicit ComplexImage(const ImageGrid& real);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  cfloat& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  cfloat operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::vector<cfloat>& data() { return data_; }
  const std::vector<cfloat>& data() const { return data_; }

  ImageGrid magnitude() const;
  ImageGrid real() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cfloat> data_;
};

using KSpace = ComplexImage;

/// Unnormalized in-place 1D DFT of any length (mixed-radix Cooley-Tukey;
/// prime factors fall back to direct summation).
void fft1d(std::vector<std::complex<double>>& x, bool inverse);

/// Unitary 2D DFT (1/sqrt(rows*cols) in both directions). Any dims >= 1.
KSpace fft2(const ComplexImage& x);
KSpace fft2(const ImageGrid& x);
ComplexImage ifft2(const KSpace& k);

/// Fraction of non-DC spectral energy at frequencies with
/// max(|ky|/rows, |kx|/cols) > 1/4, i.e. above half the Nyquist rate.
double high_frequency_energy_fraction(const ImageGrid& img);

/// Absolute spectral energy above half-Nyquist (same band as above),
/// normalized per pixel.
double high_frequency_energy(const ImageGrid& img);

}  // namespace coordsr
