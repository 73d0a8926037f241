#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pseudocyl {

inline constexpr double kPi = std::numbers::pi;

/// Latitude `theta` in [-pi/2, pi/2], longitude `phi` in [-pi, pi).
struct SphereCoord {
  double theta = 0.0;
  double phi = 0.0;
};

/// Real-valued position on a raster. Rows index latitude, columns longitude.
struct GridCoord {
  double row = 0.0;
  double col = 0.0;
};

namespace detail {

inline void require_index(long long idx, long long lo, long long hi, const char* what) {
  if (idx < lo || idx >= hi) {
    throw std::domain_error(std::string(what) + ": index " + std::to_string(idx) +
                            " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
}

}  // namespace detail

/// Wraps a longitude into [-pi, pi).
inline double normalize_longitude(double phi) {
  double w = std::fmod(phi + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  if (w >= 2.0 * kPi) w -= 2.0 * kPi;
  return w - kPi;
}

/// Floor-style modulo for reals; result in [0, m).
inline double wrap(double x, double m) {
  double r = std::fmod(x, m);
  if (r < 0.0) r += m;
  if (r >= m) r -= m;
  return r;
}

inline int wrap(int x, int m) {
  int r = x % m;
  return r < 0 ? r + m : r;
}

// Sample-center conventions: row i of an H-row raster sits at (i + 0.5) / H of the
// latitude span, and likewise for columns.

inline double erp_latitude(int row, int height) {
  detail::require_index(row, 0, height, "erp_latitude");
  return (0.5 - (row + 0.5) / height) * kPi;
}

/// Latitude of a row index that may lie outside [0, H); used by the neighbor search
/// before pole wrapping.
inline double erp_latitude_unchecked(double row, int height) {
  return (0.5 - (row + 0.5) / height) * kPi;
}

inline double erp_longitude(int col, int width) {
  detail::require_index(col, 0, width, "erp_longitude");
  return ((col + 0.5) / width - 0.5) * 2.0 * kPi;
}

/// Longitude of column `col` in a row of width `row_width` starting at `start`.
inline double pseudocyl_longitude(int col, int row_width, int start = 0) {
  if (row_width < 1) throw std::domain_error("pseudocyl_longitude: row width must be >= 1");
  detail::require_index(col, start, static_cast<long long>(start) + row_width, "pseudocyl_longitude");
  return ((col - start + 0.5) / row_width - 0.5) * 2.0 * kPi;
}

/// Centered start offset floor((W - W_i) / 2) used when drawing rows of varying width.
inline int centered_start(int width, int row_width) { return (width - row_width) / 2; }

inline double sinusoidal_width(double theta, int width) {
  if (std::abs(theta) > kPi / 2.0 + 1e-12) {
    throw std::domain_error("sinusoidal_width: latitude outside [-pi/2, pi/2]");
  }
  return std::cos(theta) * width;
}

inline double craster_latitude(int row, int height) {
  detail::require_index(row, 0, height, "craster_latitude");
  return 3.0 * std::asin(0.5 - (row + 0.5) / height);
}

/// Real row coordinate of latitude `theta` on an H-row raster (inverse of erp_latitude).
inline double latitude_to_row(double theta, int height) { return (0.5 - theta / kPi) * height - 0.5; }

/// Real column coordinate of longitude `phi` on a row of the given width.
inline double longitude_to_col(double phi, int row_width) {
  return (phi / (2.0 * kPi) + 0.5) * row_width - 0.5;
}

}  // namespace pseudocyl
