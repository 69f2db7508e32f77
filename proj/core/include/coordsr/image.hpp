#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coordsr/tensor.hpp"

namespace coordsr {

/// 2D grayscale raster, row-major, intensities nominally in [0,1].
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int rows, int cols, float fill = 0.0f);
  ImageGrid(int rows, int cols, std::vector<float> pixels);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return px_.size(); }
  bool empty() const { return px_.empty(); }

  float& operator()(int r, int c) { return px_[static_cast<std::size_t>(r) * cols_ + c]; }
  float operator()(int r, int c) const { return px_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<float> pixels() { return px_; }
  std::span<const float> pixels() const { return px_; }

  /// [1,1,rows,cols] tensor view copy.
  Tensor to_tensor() const;
  /// Accepts [H,W], [1,H,W] or [1,1,H,W].
  static ImageGrid from_tensor(const Tensor& t);

  ImageGrid crop(int row0, int col0, int rows, int cols) const;
  ImageGrid clamped(float lo = 0.0f, float hi = 1.0f) const;

  double mean() const;

  friend bool operator==(const ImageGrid& a, const ImageGrid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.px_ == b.px_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<float> px_;
};

}  // namespace coordsr
