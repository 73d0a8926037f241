#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pseudocyl {

/// A rectangular raster of 64-bit samples, nominally in [0, 1].
///
/// Storage is planar: each channel is a contiguous row-major plane, so
/// sample (r, c, ch) lives at `(ch * rows + r) * cols + c`.
class PlaneImage {
 public:
  PlaneImage() = default;

  PlaneImage(int rows, int cols, int channels, double fill = 0.0)
      : rows_(rows), cols_(cols), channels_(channels) {
    if (rows < 0 || cols < 0 || channels < 1) {
      throw std::invalid_argument("PlaneImage: invalid dimensions " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + "x" + std::to_string(channels));
    }
    samples_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(rows_) * cols_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  double& at(int r, int c, int ch = 0) { return samples_[index(r, c, ch)]; }
  double at(int r, int c, int ch = 0) const { return samples_[index(r, c, ch)]; }

  std::span<double> row(int r, int ch = 0) {
    return {samples_.data() + index(r, 0, ch), static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(int r, int ch = 0) const {
    return {samples_.data() + index(r, 0, ch), static_cast<std::size_t>(cols_)};
  }

  std::span<double> plane(int ch) { return {samples_.data() + ch * plane_size(), plane_size()}; }
  std::span<const double> plane(int ch) const {
    return {samples_.data() + ch * plane_size(), plane_size()};
  }

  std::vector<double>& samples() { return samples_; }
  const std::vector<double>& samples() const { return samples_; }

  bool same_shape(const PlaneImage& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && channels_ == other.channels_;
  }

  bool all_finite() const {
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Copy of rows [first, first + count).
  PlaneImage crop_rows(int first, int count) const {
    if (first < 0 || count < 0 || first + count > rows_) {
      throw std::out_of_range("crop_rows: row range outside image");
    }
    PlaneImage out(count, cols_, channels_);
    for (int ch = 0; ch < channels_; ++ch) {
      for (int r = 0; r < count; ++r) {
        auto src = row(first + r, ch);
        std::copy(src.begin(), src.end(), out.row(r, ch).begin());
      }
    }
    return out;
  }

  friend bool operator==(const PlaneImage&, const PlaneImage&) = default;

 private:
  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(ch) * rows_ + r) * cols_ + c;
  }

  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 0;
  std::vector<double> samples_;
};

inline double max_abs_diff(const PlaneImage& a, const PlaneImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    m = std::max(m, std::abs(a.samples()[k] - b.samples()[k]));
  }
  return m;
}

/// Snap samples to the 8-bit grid (round(v*255)/255, clamped to [0, 1]).
inline PlaneImage quantize_8bit(PlaneImage img) {
  for (double& v : img.samples()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return img;
}

}  // namespace pseudocyl
