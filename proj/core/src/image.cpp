#include "coordsr/image.hpp"

#include <algorithm>
#include <string>

#include "coordsr/errors.hpp"

namespace coordsr {

ImageGrid::ImageGrid(int rows, int cols, float fill) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw ConfigError("negative image dims");
  px_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

ImageGrid::ImageGrid(int rows, int cols, std::vector<float> pixels)
    : rows_(rows), cols_(cols), px_(std::move(pixels)) {
  if (rows < 0 || cols < 0 || px_.size() != static_cast<std::size_t>(rows) * cols) {
    throw ConfigError("image pixel count does not match " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
}

Tensor ImageGrid::to_tensor() const { return Tensor({1, 1, rows_, cols_}, px_); }

ImageGrid ImageGrid::from_tensor(const Tensor& t) {
  const Shape& s = t.shape();
  bool ok = (s.size() == 2) || (s.size() == 3 && s[0] == 1) ||
            (s.size() == 4 && s[0] == 1 && s[1] == 1);
  if (!ok) throw ConfigError("tensor " + shape_str(s) + " is not a single grayscale image");
  int h = s[s.size() - 2];
  int w = s[s.size() - 1];
  return ImageGrid(h, w, t.vec());
}

ImageGrid ImageGrid::crop(int row0, int col0, int rows, int cols) const {
  if (row0 < 0 || col0 < 0 || rows < 0 || cols < 0 || row0 + rows > rows_ || col0 + cols > cols_) {
    throw ConfigError("crop window outside image");
  }
  ImageGrid out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    std::copy_n(&px_[static_cast<std::size_t>(row0 + r) * cols_ + col0], cols, &out(r, 0));
  }
  return out;
}

ImageGrid ImageGrid::clamped(float lo, float hi) const {
  ImageGrid out = *this;
  for (float& v : out.px_) v = std::clamp(v, lo, hi);
  return out;
}

double ImageGrid::mean() const {
  if (px_.empty()) return 0.0;
  double s = 0.0;
  for (float v : px_) s += v;
  return s / static_cast<double>(px_.size());
}

}  // namespace coordsr
