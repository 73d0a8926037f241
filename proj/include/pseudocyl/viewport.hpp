#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pseudocyl/geometry.hpp"
#include "pseudocyl/image.hpp"
#include "pseudocyl/representation.hpp"

namespace pseudocyl {

/// Rectilinear view of the sphere. The world frame is x = forward (theta = phi = 0),
/// y = east, z = up; a viewport looks along Rz(phi_c) * Ry(-theta_c) * x.
/// For a pole-centered viewport, image "up" points at the phi = pi meridian
/// (north pole) or phi = 0 meridian (south pole).
struct ViewportSpec {
  SphereCoord center;
  double fov_lat = kPi / 3.0;
  double fov_lon = kPi / 2.0;
  int height = 1;
  int width = 1;

  void validate() const {
    if (!(fov_lat > 0.0 && fov_lat < kPi) || !(fov_lon > 0.0 && fov_lon < kPi)) {
      throw std::invalid_argument("viewport: field of view must lie in (0, pi)");
    }
    if (height < 1 || width < 1) throw std::invalid_argument("viewport: size must be at least 1x1");
  }
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline SphereCoord direction_to_sphere(const Vec3& d) {
  return {std::atan2(d.z, std::hypot(d.x, d.y)), std::atan2(d.y, d.x)};
}

inline Vec3 sphere_to_direction(const SphereCoord& s) {
  return {std::cos(s.theta) * std::cos(s.phi), std::cos(s.theta) * std::sin(s.phi), std::sin(s.theta)};
}

/// Sphere direction seen through pixel (r, c) of the viewport.
inline SphereCoord viewport_ray(const ViewportSpec& spec, int r, int c) {
  const double u = (2.0 * (c + 0.5) / spec.width - 1.0) * std::tan(spec.fov_lon / 2.0);
  const double v = (1.0 - 2.0 * (r + 0.5) / spec.height) * std::tan(spec.fov_lat / 2.0);
  const double norm = std::sqrt(1.0 + u * u + v * v);
  const double dx = 1.0 / norm, dy = u / norm, dz = v / norm;
  const double ct = std::cos(spec.center.theta), st = std::sin(spec.center.theta);
  const double cp = std::cos(spec.center.phi), sp = std::sin(spec.center.phi);
  const double x1 = ct * dx - st * dz;
  const double z1 = st * dx + ct * dz;
  return direction_to_sphere({cp * x1 - sp * dy, sp * x1 + cp * dy, z1});
}

/// Tangent-plane coordinates (u, v) of a sphere point in the viewport frame, or
/// nothing if the point is behind the viewer.
inline std::optional<std::array<double, 2>> viewport_plane_coords(const ViewportSpec& spec,
                                                                   const SphereCoord& s) {
  const Vec3 d = sphere_to_direction(s);
  const double ct = std::cos(spec.center.theta), st = std::sin(spec.center.theta);
  const double cp = std::cos(spec.center.phi), sp = std::sin(spec.center.phi);
  const double x1 = cp * d.x + sp * d.y;
  const double y1 = -sp * d.x + cp * d.y;
  const double x2 = ct * x1 + st * d.z;
  const double z2 = -st * x1 + ct * d.z;
  if (x2 <= 0.0) return std::nullopt;
  return std::array<double, 2>{y1 / x2, z2 / x2};
}

inline bool viewport_contains(const ViewportSpec& spec, const SphereCoord& s, double slack = 1e-12) {
  const auto uv = viewport_plane_coords(spec, s);
  if (!uv) return false;
  return std::abs((*uv)[0]) <= std::tan(spec.fov_lon / 2.0) + slack &&
         std::abs((*uv)[1]) <= std::tan(spec.fov_lat / 2.0) + slack;
}

/// The fourteen viewports used for viewport-based quality: four longitudes on each
/// of the latitudes 0 and +-pi/4, plus both poles. Each is ceil(H/3) x ceil(W/4)
/// with a pi/3 x pi/2 field of view.
inline std::vector<ViewportSpec> canonical_viewports(int height, int width) {
  if (height < 4 || width < 4) throw std::invalid_argument("canonical_viewports: image must be at least 4x4");
  const int vh = (height + 2) / 3;
  const int vw = (width + 3) / 4;
  constexpr double q = kPi / 4.0;
  constexpr double h = kPi / 2.0;
  const std::array<SphereCoord, 14> centers{{{0, -h},
                                             {0, 0},
                                             {0, h},
                                             {0, kPi},
                                             {-q, -h},
                                             {-q, 0},
                                             {-q, h},
                                             {-q, kPi},
                                             {q, -h},
                                             {q, 0},
                                             {q, h},
                                             {q, kPi},
                                             {h, 0},
                                             {-h, 0}}};
  std::vector<ViewportSpec> out;
  out.reserve(centers.size());
  for (const auto& c : centers) out.push_back({c, kPi / 3.0, kPi / 2.0, vh, vw});
  return out;
}

/// Bilinear sphere lookup over a raster whose rows may differ in width: latitude is
/// clamped at the poles, longitude wraps. `row_of(r)` yields row r as a span.
template <class RowFn>
double sample_sphere(RowFn&& row_of, int height, const SphereCoord& s) {
  const double y = std::clamp(latitude_to_row(s.theta, height), 0.0, static_cast<double>(height - 1));
  const int r0 = static_cast<int>(std::floor(y));
  const int r1 = std::min(r0 + 1, height - 1);
  const double f = y - r0;
  const std::span<const double> a = row_of(r0);
  const std::span<const double> b = row_of(r1);
  const double va = sample_circular(a, longitude_to_col(s.phi, static_cast<int>(a.size())));
  const double vb = sample_circular(b, longitude_to_col(s.phi, static_cast<int>(b.size())));
  return (1.0 - f) * va + f * vb;
}

namespace detail {

template <class RowFn>
PlaneImage render_viewport(RowFn&& row_of, int height, int channels, const ViewportSpec& spec) {
  spec.validate();
  PlaneImage out(spec.height, spec.width, channels);
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const SphereCoord s = viewport_ray(spec, r, c);
      for (int ch = 0; ch < channels; ++ch) {
        out.at(r, c, ch) = sample_sphere([&](int row) { return row_of(row, ch); }, height, s);
      }
    }
  }
  return out;
}

}  // namespace detail

inline PlaneImage extract_viewport(const PlaneImage& erp, const ViewportSpec& spec) {
  if (erp.rows() < 1 || erp.cols() < 1) throw std::invalid_argument("extract_viewport: empty source");
  return detail::render_viewport([&](int r, int ch) { return erp.row(r, ch); }, erp.rows(), erp.channels(), spec);
}

inline PlaneImage extract_viewport(const TiledImage& tiled, const ViewportSpec& spec) {
  tiled.validate();
  return detail::render_viewport([&](int r, int ch) { return tiled.global_row(r, ch); }, tiled.config.height,
                                 tiled.channels(), spec);
}

/// Inverse of extract_viewport: paints `patch` onto an H x W ERP canvas through the
/// viewport geometry; samples outside the viewport frustum are `background`.
inline PlaneImage embed_viewport(const PlaneImage& patch, const ViewportSpec& spec, int height, int width,
                                 double background = 0.0) {
  spec.validate();
  if (patch.rows() != spec.height || patch.cols() != spec.width) {
    throw std::invalid_argument("embed_viewport: patch size disagrees with viewport spec");
  }
  PlaneImage out(height, width, patch.channels(), background);
  const double tu = std::tan(spec.fov_lon / 2.0);
  const double tv = std::tan(spec.fov_lat / 2.0);
  for (int r = 0; r < height; ++r) {
    const double theta = erp_latitude(r, height);
    for (int c = 0; c < width; ++c) {
      const auto uv = viewport_plane_coords(spec, {theta, erp_longitude(c, width)});
      if (!uv || std::abs((*uv)[0]) > tu || std::abs((*uv)[1]) > tv) continue;
      const double x = std::clamp(((*uv)[0] / tu + 1.0) * spec.width / 2.0 - 0.5, 0.0, spec.width - 1.0);
      const double y = std::clamp((1.0 - (*uv)[1] / tv) * spec.height / 2.0 - 0.5, 0.0, spec.height - 1.0);
      const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
      const int x1 = std::min(x0 + 1, spec.width - 1), y1 = std::min(y0 + 1, spec.height - 1);
      const double fx = x - x0, fy = y - y0;
      for (int ch = 0; ch < patch.channels(); ++ch) {
        const double top = (1 - fx) * patch.at(y0, x0, ch) + fx * patch.at(y0, x1, ch);
        const double bot = (1 - fx) * patch.at(y1, x0, ch) + fx * patch.at(y1, x1, ch);
        out.at(r, c, ch) = (1 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

}  // namespace pseudocyl
