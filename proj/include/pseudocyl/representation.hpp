#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudocyl/geometry.hpp"
#include "pseudocyl/image.hpp"

namespace pseudocyl {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Last tile index subject to the monotone-width constraint: floor((T-1)/2) - 1.
/// Negative when no tile is constrained (T <= 2).
inline int half_tile_index(int tile_count) { return (tile_count - 1) / 2 - 1; }

/// Width configuration of a tiled pseudocylindrical representation: an H x W ERP
/// image split into T = H / tile_height bands of equal height, band t resampled to
/// widths[t] columns.
struct PseudocylConfig {
  int height = 0;
  int width = 0;
  int tile_height = 0;
  std::vector<int> widths;

  int tile_count() const { return static_cast<int>(widths.size()); }
  int tile_of_row(int row) const { return row / tile_height; }
  int row_width(int row) const { return widths[static_cast<std::size_t>(tile_of_row(row))]; }

  /// Per-row widths, length H.
  std::vector<int> row_widths() const {
    std::vector<int> out(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r) out[static_cast<std::size_t>(r)] = row_width(r);
    return out;
  }

  long long pixel_count() const {
    long long n = 0;
    for (int w : widths) n += static_cast<long long>(w) * tile_height;
    return n;
  }

  void validate() const {
    if (height < 1 || width < 1) throw ConfigError("config: height and width must be positive");
    if (tile_height < 1) throw ConfigError("config: tile_height must be positive");
    if (height % tile_height != 0) {
      throw ConfigError("config: height " + std::to_string(height) +
                        " is not a multiple of tile_height " + std::to_string(tile_height));
    }
    if (tile_count() != height / tile_height) {
      throw ConfigError("config: expected " + std::to_string(height / tile_height) +
                        " widths, got " + std::to_string(tile_count()));
    }
    for (int w : widths) {
      if (w < 1 || w > width) {
        throw ConfigError("config: tile width " + std::to_string(w) + " outside [1, " +
                          std::to_string(width) + "]");
      }
    }
  }

  bool is_symmetric() const {
    const int t_count = tile_count();
    for (int t = 0; t < t_count; ++t) {
      if (widths[static_cast<std::size_t>(t)] != widths[static_cast<std::size_t>(t_count - 1 - t)]) {
        return false;
      }
    }
    return true;
  }

  /// Widths nondecreasing from the pole tile to tile T_half.
  bool is_monotone() const {
    const int last = half_tile_index(tile_count());
    for (int t = 1; t <= last; ++t) {
      if (widths[static_cast<std::size_t>(t - 1)] > widths[static_cast<std::size_t>(t)]) return false;
    }
    return true;
  }

  /// The plain ERP layout: every tile keeps the full width.
  static PseudocylConfig uniform(int height, int width, int tile_height) {
    PseudocylConfig cfg{height, width, tile_height, {}};
    if (tile_height < 1 || height % tile_height != 0) {
      throw ConfigError("config: height must be a positive multiple of tile_height");
    }
    cfg.widths.assign(static_cast<std::size_t>(height / tile_height), width);
    return cfg;
  }

  /// Tiled sinusoidal layout: each tile takes cos(theta)W at its central latitude,
  /// rounded and clamped to [1, W].
  static PseudocylConfig sinusoidal(int height, int width, int tile_height) {
    PseudocylConfig cfg = uniform(height, width, tile_height);
    const int t_count = cfg.tile_count();
    for (int t = 0; t <= (t_count - 1) / 2; ++t) {
      const double theta = (0.5 - (t + 0.5) / t_count) * kPi;
      const int w = std::clamp(static_cast<int>(std::lround(sinusoidal_width(theta, width))), 1, width);
      cfg.widths[static_cast<std::size_t>(t)] = w;
      cfg.widths[static_cast<std::size_t>(t_count - 1 - t)] = w;
    }
    return cfg;
  }

  friend bool operator==(const PseudocylConfig&, const PseudocylConfig&) = default;
};

inline void to_json(nlohmann::json& j, const PseudocylConfig& cfg) {
  j = nlohmann::json{{"height", cfg.height},
                     {"width", cfg.width},
                     {"tile_height", cfg.tile_height},
                     {"widths", cfg.widths}};
}

inline void from_json(const nlohmann::json& j, PseudocylConfig& cfg) {
  j.at("height").get_to(cfg.height);
  j.at("width").get_to(cfg.width);
  j.at("tile_height").get_to(cfg.tile_height);
  j.at("widths").get_to(cfg.widths);
  cfg.validate();
}

/// Tile t holds rows [t*tile_height, (t+1)*tile_height) resampled to widths[t] columns.
struct TiledImage {
  PseudocylConfig config;
  std::vector<PlaneImage> tiles;

  int channels() const { return tiles.empty() ? 0 : tiles.front().channels(); }

  std::span<const double> global_row(int row, int ch) const {
    return tiles[static_cast<std::size_t>(config.tile_of_row(row))].row(row % config.tile_height, ch);
  }

  void validate() const {
    config.validate();
    if (tiles.size() != config.widths.size()) throw ConfigError("tiled image: tile count mismatch");
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      if (tiles[t].rows() != config.tile_height || tiles[t].cols() != config.widths[t] ||
          tiles[t].channels() != tiles.front().channels()) {
        throw ConfigError("tiled image: tile " + std::to_string(t) + " does not match its config");
      }
    }
  }

  friend bool operator==(const TiledImage&, const TiledImage&) = default;
};

/// Linear interpolation on a circular row. Weights are (1 - f, f) with no special
/// case for integral positions.
inline double sample_circular(std::span<const double> row, double x) {
  const int w = static_cast<int>(row.size());
  const double xw = wrap(x, static_cast<double>(w));
  int i0 = static_cast<int>(std::floor(xw));
  if (i0 >= w) i0 -= w;
  const double f = xw - i0;
  const int i1 = i0 + 1 == w ? 0 : i0 + 1;
  return (1.0 - f) * row[static_cast<std::size_t>(i0)] + f * row[static_cast<std::size_t>(i1)];
}

/// Center-aligned resampling of a circular row to `dst.size()` samples:
/// dst[q] = src((Ws/Wd)(q + 0.5) - 0.5 + shift), `shift` in source samples.
inline void resize_row_into(std::span<const double> src, std::span<double> dst, double shift = 0.0) {
  const std::size_t ws = src.size();
  const std::size_t wd = dst.size();
  if (ws == 0 || wd == 0) throw std::invalid_argument("resize_row: empty row");
  if (ws == wd && shift == 0.0) {
    std::copy(src.begin(), src.end(), dst.begin());
    return;
  }
  const double ratio = static_cast<double>(ws) / static_cast<double>(wd);
  for (std::size_t q = 0; q < wd; ++q) {
    dst[q] = sample_circular(src, ratio * (static_cast<double>(q) + 0.5) - 0.5 + shift);
  }
}

inline std::vector<double> resize_row(std::span<const double> src, int target_width, double shift = 0.0) {
  if (target_width < 1) throw std::invalid_argument("resize_row: target width must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(target_width));
  resize_row_into(src, out, shift);
  return out;
}

/// Resamples every row of `img` to `target_width` columns.
inline PlaneImage resize_width(const PlaneImage& img, int target_width) {
  PlaneImage out(img.rows(), target_width, img.channels());
  for (int ch = 0; ch < img.channels(); ++ch) {
    for (int r = 0; r < img.rows(); ++r) resize_row_into(img.row(r, ch), out.row(r, ch));
  }
  return out;
}

inline TiledImage erp_to_tiled(const PlaneImage& erp, const PseudocylConfig& config) {
  config.validate();
  if (erp.rows() != config.height || erp.cols() != config.width) {
    throw ConfigError("erp_to_tiled: image is " + std::to_string(erp.rows()) + "x" +
                      std::to_string(erp.cols()) + " but config expects " +
                      std::to_string(config.height) + "x" + std::to_string(config.width));
  }
  TiledImage out{config, {}};
  out.tiles.reserve(config.widths.size());
  for (int t = 0; t < config.tile_count(); ++t) {
    PlaneImage tile(config.tile_height, config.widths[static_cast<std::size_t>(t)], erp.channels());
    for (int ch = 0; ch < erp.channels(); ++ch) {
      for (int r = 0; r < config.tile_height; ++r) {
        resize_row_into(erp.row(t * config.tile_height + r, ch), tile.row(r, ch));
      }
    }
    out.tiles.push_back(std::move(tile));
  }
  return out;
}

inline PlaneImage tiled_to_erp(const TiledImage& tiled) {
  tiled.validate();
  const PseudocylConfig& cfg = tiled.config;
  PlaneImage out(cfg.height, cfg.width, tiled.channels());
  for (int ch = 0; ch < out.channels(); ++ch) {
    for (int r = 0; r < cfg.height; ++r) resize_row_into(tiled.global_row(r, ch), out.row(r, ch));
  }
  return out;
}

/// Source row and column shift feeding global row `g` (possibly outside [0, H)).
/// Rows beyond a pole map to (-1 - g) mod H and turn half a revolution.
struct PadSource {
  int row = 0;
  double shift = 0.0;
};

inline PadSource pad_source(const PseudocylConfig& cfg, int g) {
  if (g >= 0 && g < cfg.height) return {g, 0.0};
  const int row = wrap(-1 - g, cfg.height);
  return {row, 0.5 * cfg.row_width(row)};
}

/// Pseudocylindrical padding of tile t by K samples on every side.
///
/// Vertical pads take the K nearest rows of the adjacent tile resized to W_t (across
/// a pole: the mirrored rows of the same tile, turned by half a revolution). The
/// horizontal pad is circular and is applied last so the corners are populated.
inline PlaneImage pad_tile(const TiledImage& tiled, int t, int radius) {
  const PseudocylConfig& cfg = tiled.config;
  if (t < 0 || t >= cfg.tile_count()) throw std::out_of_range("pad_tile: tile index out of range");
  if (radius < 0) throw std::invalid_argument("pad_tile: radius must be >= 0");
  if (radius > cfg.tile_height) {
    throw std::invalid_argument("pad_tile: radius " + std::to_string(radius) +
                                " exceeds tile height " + std::to_string(cfg.tile_height));
  }
  const PlaneImage& tile = tiled.tiles[static_cast<std::size_t>(t)];
  if (radius == 0) return tile;

  const int wt = tile.cols();
  const int ht = tile.rows();
  const int first_row = t * cfg.tile_height - radius;
  PlaneImage out(ht + 2 * radius, wt + 2 * radius, tile.channels());
  std::vector<double> line(static_cast<std::size_t>(wt));

  for (int ch = 0; ch < tile.channels(); ++ch) {
    for (int pr = 0; pr < ht + 2 * radius; ++pr) {
      const bool interior = pr >= radius && pr < radius + ht;
      std::span<const double> src;
      if (interior) {
        src = tile.row(pr - radius, ch);
      } else {
        const PadSource ps = pad_source(cfg, first_row + pr);
        resize_row_into(tiled.global_row(ps.row, ch), line, ps.shift);
        src = line;
      }
      auto dst = out.row(pr, ch);
      for (int c = 0; c < wt + 2 * radius; ++c) {
        dst[static_cast<std::size_t>(c)] = src[static_cast<std::size_t>(wrap(c - radius, wt))];
      }
    }
  }
  return out;
}

}  // namespace pseudocyl
