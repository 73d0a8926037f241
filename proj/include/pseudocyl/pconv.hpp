#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudocyl/geometry.hpp"
#include "pseudocyl/image.hpp"
#include "pseudocyl/representation.hpp"

namespace pseudocyl {

/// Dense (2K+1) x (2K+1) filter bank, weights laid out [out][in][i + K][j + K].
/// Applied as cross-correlation: y(p, q) = sum w(i, j) x(p + i, q + j).
struct ConvKernel {
  int radius = 0;
  int in_channels = 1;
  int out_channels = 1;
  std::vector<double> weights;

  int spread() const { return 2 * radius + 1; }

  std::size_t offset(int o, int c, int i, int j) const {
    const std::size_t s = static_cast<std::size_t>(spread());
    return ((static_cast<std::size_t>(o) * in_channels + c) * s + (i + radius)) * s + (j + radius);
  }
  double& at(int o, int c, int i, int j) { return weights[offset(o, c, i, j)]; }
  double at(int o, int c, int i, int j) const { return weights[offset(o, c, i, j)]; }

  void validate() const {
    if (radius < 0) throw std::invalid_argument("kernel: radius must be >= 0");
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("kernel: channel counts must be >= 1");
    const std::size_t expected =
        static_cast<std::size_t>(out_channels) * in_channels * spread() * spread();
    if (weights.size() != expected) {
      throw std::invalid_argument("kernel: expected " + std::to_string(expected) + " weights, got " +
                                  std::to_string(weights.size()));
    }
    for (double w : weights) {
      if (!std::isfinite(w)) throw std::invalid_argument("kernel: non-finite weight");
    }
  }

  static ConvKernel zeros(int radius, int in_channels, int out_channels) {
    ConvKernel k{radius, in_channels, out_channels, {}};
    k.weights.assign(static_cast<std::size_t>(out_channels) * in_channels * k.spread() * k.spread(), 0.0);
    return k;
  }

  /// Center tap 1 on the matching channel: the identity for in == out.
  static ConvKernel delta(int radius, int channels) {
    ConvKernel k = zeros(radius, channels, channels);
    for (int c = 0; c < channels; ++c) k.at(c, c, 0, 0) = 1.0;
    return k;
  }

  template <class Rng>
  static ConvKernel random(int radius, int in_channels, int out_channels, Rng& rng) {
    ConvKernel k = zeros(radius, in_channels, out_channels);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& w : k.weights) w = dist(rng);
    return k;
  }
};

inline void to_json(nlohmann::json& j, const ConvKernel& k) {
  j = nlohmann::json{{"radius", k.radius},
                     {"in_channels", k.in_channels},
                     {"out_channels", k.out_channels},
                     {"weights", k.weights}};
}

inline void from_json(const nlohmann::json& j, ConvKernel& k) {
  j.at("radius").get_to(k.radius);
  j.at("in_channels").get_to(k.in_channels);
  j.at("out_channels").get_to(k.out_channels);
  j.at("weights").get_to(k.weights);
  k.validate();
}

// Binary kernel file: magic "PCK1", then int32 radius, in_channels, out_channels
// (little endian), then out*in*(2K+1)^2 IEEE-754 doubles in row-major order.
inline constexpr std::array<char, 4> kKernelMagic{'P', 'C', 'K', '1'};

inline void save_kernel(const std::filesystem::path& path, const ConvKernel& k) {
  k.validate();
  if (path.extension() == ".json") {
    std::ofstream os(path);
    os << nlohmann::json(k).dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write kernel file '" + path.string() + "'");
    return;
  }
  std::ofstream os(path, std::ios::binary);
  os.write(kKernelMagic.data(), kKernelMagic.size());
  for (std::int32_t v : {static_cast<std::int32_t>(k.radius), static_cast<std::int32_t>(k.in_channels),
                         static_cast<std::int32_t>(k.out_channels)}) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  os.write(reinterpret_cast<const char*>(k.weights.data()),
           static_cast<std::streamsize>(k.weights.size() * sizeof(double)));
  if (!os) throw std::runtime_error("cannot write kernel file '" + path.string() + "'");
}

inline ConvKernel load_kernel(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open kernel file '" + path.string() + "'");
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kKernelMagic) {
    is.clear();
    is.seekg(0);
    return nlohmann::json::parse(is).get<ConvKernel>();
  }
  std::array<std::int32_t, 3> dims{};
  is.read(reinterpret_cast<char*>(dims.data()), sizeof dims);
  if (!is || dims[0] < 0 || dims[0] > 64 || dims[1] < 1 || dims[2] < 1) {
    throw std::runtime_error("kernel file '" + path.string() + "': bad header");
  }
  ConvKernel k = ConvKernel::zeros(dims[0], dims[1], dims[2]);
  is.read(reinterpret_cast<char*>(k.weights.data()),
          static_cast<std::streamsize>(k.weights.size() * sizeof(double)));
  if (!is) throw std::runtime_error("kernel file '" + path.string() + "': truncated weights");
  k.validate();
  return k;
}

// ---------------------------------------------------------------------------
// Neighbor search

enum class NeighborMode { kExact, kApprox };

/// Location of neighbor (i, j) of grid point (p, q) on a raster with per-row widths.
///
/// Exact mode scales the column offset by cos(theta_p) / cos(theta_{p+i}), with both
/// latitudes taken from the unwrapped row indices. Approximate mode drops that
/// ratio. Rows past a pole wrap to (-1 - p_i) mod H and turn by half the row width;
/// the column is finally wrapped into [0, W_{p_i}).
inline GridCoord neighbor_position(int p, int q, int i, int j, std::span<const int> row_widths,
                                   NeighborMode mode) {
  const int height = static_cast<int>(row_widths.size());
  if (p < 0 || p >= height) throw std::out_of_range("neighbor: row outside raster");
  const int unwrapped = p + i;
  const bool crossed = unwrapped < 0 || unwrapped >= height;
  const int row = crossed ? wrap(-1 - unwrapped, height) : unwrapped;
  const double wp = row_widths[static_cast<std::size_t>(p)];
  const double wn = row_widths[static_cast<std::size_t>(row)];
  double step = j;
  if (mode == NeighborMode::kExact && i != 0) {
    step *= std::cos(erp_latitude_unchecked(p, height)) / std::cos(erp_latitude_unchecked(unwrapped, height));
  }
  double col = (wn / wp) * (q + step + 0.5) - 0.5;
  if (crossed) col += 0.5 * wn;
  return {static_cast<double>(row), wrap(col, wn)};
}

inline GridCoord neighbor_exact(int p, int q, int i, int j, std::span<const int> row_widths) {
  return neighbor_position(p, q, i, j, row_widths, NeighborMode::kExact);
}

inline GridCoord neighbor_approx(int p, int q, int i, int j, std::span<const int> row_widths) {
  return neighbor_position(p, q, i, j, row_widths, NeighborMode::kApprox);
}

// ---------------------------------------------------------------------------
// Per-row raster used by the reference path

/// Raster whose rows may all differ in width. Rows stored per channel.
struct RowImage {
  int channels = 1;
  std::vector<int> widths;
  std::vector<std::vector<double>> rows;  // index ch * height + r

  int height() const { return static_cast<int>(widths.size()); }
  std::span<const double> row(int r, int ch) const { return rows[static_cast<std::size_t>(ch) * height() + r]; }
  std::span<double> row(int r, int ch) { return rows[static_cast<std::size_t>(ch) * height() + r]; }

  static RowImage with_widths(std::vector<int> widths, int channels) {
    RowImage img{channels, std::move(widths), {}};
    img.rows.resize(static_cast<std::size_t>(channels) * img.height());
    for (int ch = 0; ch < channels; ++ch) {
      for (int r = 0; r < img.height(); ++r) {
        img.rows[static_cast<std::size_t>(ch) * img.height() + r].assign(
            static_cast<std::size_t>(img.widths[static_cast<std::size_t>(r)]), 0.0);
      }
    }
    return img;
  }

  static RowImage from_tiled(const TiledImage& tiled) {
    RowImage img = with_widths(tiled.config.row_widths(), tiled.channels());
    for (int ch = 0; ch < img.channels; ++ch) {
      for (int r = 0; r < img.height(); ++r) {
        auto src = tiled.global_row(r, ch);
        std::copy(src.begin(), src.end(), img.row(r, ch).begin());
      }
    }
    return img;
  }

  TiledImage to_tiled(const PseudocylConfig& config) const {
    TiledImage out{config, {}};
    for (int t = 0; t < config.tile_count(); ++t) {
      PlaneImage tile(config.tile_height, config.widths[static_cast<std::size_t>(t)], channels);
      for (int ch = 0; ch < channels; ++ch) {
        for (int r = 0; r < config.tile_height; ++r) {
          auto src = row(t * config.tile_height + r, ch);
          if (static_cast<int>(src.size()) != tile.cols()) {
            throw ConfigError("RowImage::to_tiled: row width disagrees with config");
          }
          std::copy(src.begin(), src.end(), tile.row(r, ch).begin());
        }
      }
      out.tiles.push_back(std::move(tile));
    }
    return out;
  }
};

/// Direct evaluation of the pseudocylindrical convolution: every output sample is
/// the kernel-weighted sum of linearly interpolated neighbors.
inline RowImage pconv_reference(const RowImage& input, const ConvKernel& kernel, NeighborMode mode) {
  kernel.validate();
  if (input.channels != kernel.in_channels) {
    throw std::invalid_argument("pconv_reference: input has " + std::to_string(input.channels) +
                                " channels, kernel expects " + std::to_string(kernel.in_channels));
  }
  const int k = kernel.radius;
  const int height = input.height();
  RowImage out = RowImage::with_widths(input.widths, kernel.out_channels);
  std::vector<GridCoord> taps(static_cast<std::size_t>(kernel.spread() * kernel.spread()));
  std::vector<double> acc(static_cast<std::size_t>(kernel.out_channels));

  for (int p = 0; p < height; ++p) {
    const int wp = input.widths[static_cast<std::size_t>(p)];
    for (int q = 0; q < wp; ++q) {
      std::size_t n = 0;
      for (int i = -k; i <= k; ++i) {
        for (int j = -k; j <= k; ++j) taps[n++] = neighbor_position(p, q, i, j, input.widths, mode);
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int c = 0; c < input.channels; ++c) {
        n = 0;
        for (int i = -k; i <= k; ++i) {
          for (int j = -k; j <= k; ++j, ++n) {
            const double v = sample_circular(input.row(static_cast<int>(taps[n].row), c), taps[n].col);
            for (int o = 0; o < kernel.out_channels; ++o) acc[static_cast<std::size_t>(o)] += kernel.at(o, c, i, j) * v;
          }
        }
      }
      for (int o = 0; o < kernel.out_channels; ++o) {
        out.row(p, o)[static_cast<std::size_t>(q)] = acc[static_cast<std::size_t>(o)];
      }
    }
  }
  return out;
}

inline TiledImage pconv_reference(const TiledImage& input, const ConvKernel& kernel, NeighborMode mode) {
  input.validate();
  return pconv_reference(RowImage::from_tiled(input), kernel, mode).to_tiled(input.config);
}

// ---------------------------------------------------------------------------
// Standard convolution

/// Valid-region correlation of an already padded image: output is
/// (rows - 2K) x (cols - 2K) x out_channels.
inline PlaneImage conv_valid(const PlaneImage& padded, const ConvKernel& kernel) {
  const int k = kernel.radius;
  if (padded.channels() != kernel.in_channels) {
    throw std::invalid_argument("conv: input has " + std::to_string(padded.channels()) +
                                " channels, kernel expects " + std::to_string(kernel.in_channels));
  }
  const int rows = padded.rows() - 2 * k;
  const int cols = padded.cols() - 2 * k;
  if (rows < 0 || cols < 0) throw std::invalid_argument("conv: padded image smaller than kernel");
  PlaneImage out(rows, cols, kernel.out_channels);
  const std::size_t stride = static_cast<std::size_t>(padded.cols());
  for (int o = 0; o < kernel.out_channels; ++o) {
    double* dst_plane = out.plane(o).data();
    for (int c = 0; c < kernel.in_channels; ++c) {
      const double* src_plane = padded.plane(c).data();
      for (int i = 0; i < kernel.spread(); ++i) {
        for (int j = 0; j < kernel.spread(); ++j) {
          const double w = kernel.at(o, c, i - k, j - k);
          for (int r = 0; r < rows; ++r) {
            const double* __restrict src = src_plane + (r + i) * stride + j;
            double* __restrict dst = dst_plane + static_cast<std::size_t>(r) * cols;
            for (int x = 0; x < cols; ++x) dst[x] += w * src[x];
          }
        }
      }
    }
  }
  return out;
}

enum class Padding {
  kZero,
  kCircular,  // wrap on both axes
  kSphere,    // wrap longitude, cross the poles with a half-revolution turn
};

inline PlaneImage pad_plane(const PlaneImage& img, int radius, Padding padding) {
  if (radius == 0) return img;
  const int rows = img.rows();
  const int cols = img.cols();
  if ((padding != Padding::kZero) && (radius > rows || radius > cols)) {
    throw std::invalid_argument("pad_plane: radius larger than the image");
  }
  PlaneImage out(rows + 2 * radius, cols + 2 * radius, img.channels());
  std::vector<double> line(static_cast<std::size_t>(cols));
  for (int ch = 0; ch < img.channels(); ++ch) {
    for (int pr = 0; pr < rows + 2 * radius; ++pr) {
      const int g = pr - radius;
      std::span<const double> src;
      if (g >= 0 && g < rows) {
        src = img.row(g, ch);
      } else if (padding == Padding::kZero) {
        continue;
      } else if (padding == Padding::kCircular) {
        src = img.row(wrap(g, rows), ch);
      } else {
        resize_row_into(img.row(wrap(-1 - g, rows), ch), line, 0.5 * cols);
        src = line;
      }
      auto dst = out.row(pr, ch);
      for (int c = 0; c < cols + 2 * radius; ++c) {
        const int sc = c - radius;
        if (sc >= 0 && sc < cols) {
          dst[static_cast<std::size_t>(c)] = src[static_cast<std::size_t>(sc)];
        } else if (padding != Padding::kZero) {
          dst[static_cast<std::size_t>(c)] = src[static_cast<std::size_t>(wrap(sc, cols))];
        }
      }
    }
  }
  return out;
}

/// Same-size stride-1 correlation with the given boundary rule.
inline PlaneImage standard_conv(const PlaneImage& input, const ConvKernel& kernel, Padding padding) {
  kernel.validate();
  return conv_valid(pad_plane(input, kernel.radius, padding), kernel);
}

// ---------------------------------------------------------------------------
// Fast path

/// Pseudocylindrical convolution as standard convolution over padded tiles.
inline TiledImage pconv_fast(const TiledImage& input, const ConvKernel& kernel) {
  input.validate();
  kernel.validate();
  if (kernel.radius > input.config.tile_height) {
    throw std::invalid_argument("pconv_fast: kernel radius " + std::to_string(kernel.radius) +
                                " exceeds tile height " + std::to_string(input.config.tile_height));
  }
  TiledImage out{input.config, {}};
  out.tiles.reserve(input.tiles.size());
  for (int t = 0; t < input.config.tile_count(); ++t) {
    out.tiles.push_back(conv_valid(pad_tile(input, t, kernel.radius), kernel));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operation counts

struct OpCountReport {
  long long search_per_sample = 0;
  long long interp_per_sample = 0;
  long long inner_per_sample = 0;
  std::vector<long long> padding_per_tile;
  std::vector<long long> conv_per_tile;
  long long reference_total = 0;
  long long fast_total = 0;
};

/// Closed-form operation counts: per sample 28K^2+14K for neighbor search,
/// 20K^2+10K for interpolation and 8K^2+8K+1 for the inner product; padding a tile
/// costs 20K*W_t + (2K+H_t)*2K.
inline OpCountReport op_count_report(const PseudocylConfig& config, int radius) {
  config.validate();
  if (radius < 0) throw std::invalid_argument("op_count_report: radius must be >= 0");
  const long long k = radius;
  OpCountReport r;
  r.search_per_sample = 28 * k * k + 14 * k;
  r.interp_per_sample = 20 * k * k + 10 * k;
  r.inner_per_sample = 8 * k * k + 8 * k + 1;
  const long long ht = config.tile_height;
  for (int w : config.widths) {
    const long long pad = 20 * k * w + (2 * k + ht) * 2 * k;
    const long long conv = r.inner_per_sample * w * ht;
    r.padding_per_tile.push_back(pad);
    r.conv_per_tile.push_back(conv);
    r.fast_total += pad + conv;
  }
  r.reference_total = (r.search_per_sample + r.interp_per_sample + r.inner_per_sample) * config.pixel_count();
  return r;
}

}  // namespace pseudocyl
