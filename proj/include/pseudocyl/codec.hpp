#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pseudocyl/image.hpp"
#include "pseudocyl/image_io.hpp"
#include "pseudocyl/metrics.hpp"
#include "pseudocyl/parallel.hpp"
#include "pseudocyl/representation.hpp"

namespace pseudocyl {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncodeResult {
  long long bits = 0;
  PlaneImage recon;
};

// ---------------------------------------------------------------------------
// Builtin codec: 8x8 orthonormal DCT-II on 8-bit-scaled, level-shifted samples.
// AC coefficients use a uniform step of `qp`; DC uses a fixed unit step and is
// predicted from the previous block of the same channel. Each block costs
//   EG(dc residual) + EG(last) + sum_{k=1..last} EG(ac_k)
// where `last` is the zig-zag position of the final nonzero AC coefficient (0 if
// none) and EG is the order-0 exponential-Golomb length of the signed-to-unsigned
// mapped value.

namespace builtin {

inline constexpr int kBlock = 8;
inline constexpr double kDcStep = 1.0;

inline const std::array<double, 64>& dct_matrix() {
  static const std::array<double, 64> m = [] {
    std::array<double, 64> a{};
    for (int k = 0; k < kBlock; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int n = 0; n < kBlock; ++n) {
        a[static_cast<std::size_t>(k * kBlock + n)] = scale * std::cos(kPi * (2 * n + 1) * k / (2.0 * kBlock));
      }
    }
    return a;
  }();
  return m;
}

inline const std::array<int, 64>& zigzag() {
  static const std::array<int, 64> z = [] {
    std::array<int, 64> order{};
    int idx = 0;
    for (int s = 0; s < 2 * kBlock - 1; ++s) {
      for (int k = 0; k <= s; ++k) {
        const int r = s % 2 == 0 ? s - k : k;
        const int c = s - r;
        if (r < kBlock && c < kBlock) order[static_cast<std::size_t>(idx++)] = r * kBlock + c;
      }
    }
    return order;
  }();
  return z;
}

inline std::uint64_t signed_to_unsigned(long long v) {
  return v > 0 ? static_cast<std::uint64_t>(2 * v - 1) : static_cast<std::uint64_t>(-2 * v);
}

/// Length of the order-0 exponential-Golomb code of n.
inline int exp_golomb_length(std::uint64_t n) {
  int bits = 0;
  for (std::uint64_t v = n + 1; v > 1; v >>= 1) ++bits;
  return 2 * bits + 1;
}

// In-place separable 2D transform of an 8x8 block; `inverse` applies the transpose.
inline void transform(std::array<double, 64>& block, bool inverse) {
  const auto& m = dct_matrix();
  std::array<double, 64> tmp{};
  for (int r = 0; r < kBlock; ++r) {
    for (int k = 0; k < kBlock; ++k) {
      double s = 0.0;
      for (int n = 0; n < kBlock; ++n) {
        const double coef = inverse ? m[static_cast<std::size_t>(n * kBlock + k)] : m[static_cast<std::size_t>(k * kBlock + n)];
        s += coef * block[static_cast<std::size_t>(r * kBlock + n)];
      }
      tmp[static_cast<std::size_t>(r * kBlock + k)] = s;
    }
  }
  for (int c = 0; c < kBlock; ++c) {
    for (int k = 0; k < kBlock; ++k) {
      double s = 0.0;
      for (int n = 0; n < kBlock; ++n) {
        const double coef = inverse ? m[static_cast<std::size_t>(n * kBlock + k)] : m[static_cast<std::size_t>(k * kBlock + n)];
        s += coef * tmp[static_cast<std::size_t>(n * kBlock + c)];
      }
      block[static_cast<std::size_t>(k * kBlock + c)] = s;
    }
  }
}

}  // namespace builtin

inline EncodeResult builtin_encode(const PlaneImage& img, int qp) {
  using namespace builtin;
  if (qp < 1) throw CodecError("builtin codec: qp must be >= 1, got " + std::to_string(qp));
  if (img.rows() < 1 || img.cols() < 1) throw CodecError("builtin codec: empty image");
  const int rows = img.rows(), cols = img.cols();
  const int brows = (rows + kBlock - 1) / kBlock;
  const int bcols = (cols + kBlock - 1) / kBlock;
  const auto& zz = zigzag();
  EncodeResult res{0, PlaneImage(rows, cols, img.channels())};
  std::array<double, 64> block{};
  std::array<long long, 64> q{};

  for (int ch = 0; ch < img.channels(); ++ch) {
    long long prev_dc = 0;
    for (int by = 0; by < brows; ++by) {
      for (int bx = 0; bx < bcols; ++bx) {
        for (int y = 0; y < kBlock; ++y) {
          const int r = std::min(by * kBlock + y, rows - 1);
          for (int x = 0; x < kBlock; ++x) {
            const int c = std::min(bx * kBlock + x, cols - 1);
            block[static_cast<std::size_t>(y * kBlock + x)] = img.at(r, c, ch) * 255.0 - 128.0;
          }
        }
        transform(block, false);
        q[0] = std::llround(block[0] / kDcStep);
        for (int k = 1; k < 64; ++k) q[static_cast<std::size_t>(k)] = std::llround(block[static_cast<std::size_t>(k)] / qp);

        int last = 0;
        for (int k = 63; k >= 1; --k) {
          if (q[static_cast<std::size_t>(zz[static_cast<std::size_t>(k)])] != 0) {
            last = k;
            break;
          }
        }
        long long bits = exp_golomb_length(signed_to_unsigned(q[0] - prev_dc)) +
                         exp_golomb_length(static_cast<std::uint64_t>(last));
        for (int k = 1; k <= last; ++k) {
          bits += exp_golomb_length(signed_to_unsigned(q[static_cast<std::size_t>(zz[static_cast<std::size_t>(k)])]));
        }
        res.bits += bits;
        prev_dc = q[0];

        block[0] = static_cast<double>(q[0]) * kDcStep;
        for (int k = 1; k < 64; ++k) block[static_cast<std::size_t>(k)] = static_cast<double>(q[static_cast<std::size_t>(k)]) * qp;
        transform(block, true);
        for (int y = 0; y < kBlock && by * kBlock + y < rows; ++y) {
          for (int x = 0; x < kBlock && bx * kBlock + x < cols; ++x) {
            res.recon.at(by * kBlock + y, bx * kBlock + x, ch) =
                std::clamp((block[static_cast<std::size_t>(y * kBlock + x)] + 128.0) / 255.0, 0.0, 1.0);
          }
        }
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Codec adapter

enum class CodecKind { kBuiltin, kExternal };

/// External codecs are shell command templates. `command_template` must contain
/// {input}, {output} and {qp}; the input is an 8-bit PNG and the rate is the size of
/// {output} in bits. If `decode_template` is set it is run with {input} = encoded
/// file and {output} = PNG to read back; otherwise {output} itself is read as PNG.
struct CodecAdapter {
  CodecKind kind = CodecKind::kBuiltin;
  std::string command_template;
  std::string decode_template;
  std::string output_extension = ".png";
  std::vector<int> qp_range;

  void validate() const {
    if (qp_range.empty()) throw std::invalid_argument("codec: qp list is empty");
    if (!std::is_sorted(qp_range.begin(), qp_range.end())) throw std::invalid_argument("codec: qp list must be sorted");
    if (kind == CodecKind::kBuiltin) {
      for (int qp : qp_range) {
        if (qp < 1) throw std::invalid_argument("codec: builtin qp must be >= 1");
      }
      return;
    }
    for (const char* ph : {"{input}", "{output}", "{qp}"}) {
      if (command_template.find(ph) == std::string::npos) {
        throw std::invalid_argument(std::string("codec: command template lacks placeholder ") + ph);
      }
    }
    if (!decode_template.empty()) {
      for (const char* ph : {"{input}", "{output}"}) {
        if (decode_template.find(ph) == std::string::npos) {
          throw std::invalid_argument(std::string("codec: decode template lacks placeholder ") + ph);
        }
      }
    }
  }

  static CodecAdapter builtin(std::vector<int> qps) { return {CodecKind::kBuiltin, {}, {}, ".png", std::move(qps)}; }

  static CodecAdapter external(std::string command, std::vector<int> qps, std::string decode = {},
                               std::string extension = ".png") {
    return {CodecKind::kExternal, std::move(command), std::move(decode), std::move(extension), std::move(qps)};
  }
};

namespace detail {

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

/// Scratch directory: $PSEUDOCYL_TMPDIR if set, else the system temp directory.
inline std::filesystem::path scratch_dir() {
  if (const char* env = std::getenv("PSEUDOCYL_TMPDIR"); env && *env) return env;
  return std::filesystem::temp_directory_path();
}

inline std::string unique_stem() {
  static std::atomic<unsigned long long> counter{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream os;
  os << "pseudocyl-" << ::getpid() << '-' << counter++ << '-' << std::hex << rng();
  return os.str();
}

// Removes its files on scope exit.
struct ScratchFiles {
  std::vector<std::filesystem::path> paths;
  ~ScratchFiles() {
    std::error_code ec;
    for (const auto& p : paths) std::filesystem::remove(p, ec);
  }
  std::filesystem::path add(std::filesystem::path p) {
    paths.push_back(p);
    return p;
  }
};

inline std::string read_text(const std::filesystem::path& p, std::size_t limit = 4096) {
  std::ifstream is(p);
  std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (s.size() > limit) s = s.substr(s.size() - limit);
  return s;
}

inline void run_command(const std::string& cmd, const std::filesystem::path& log) {
  const std::string full = "(\n" + cmd + "\n) > '" + log.string() + "' 2>&1";
  const int status = std::system(full.c_str());
  if (status != 0) {
    throw CodecError("codec command failed (status " + std::to_string(status) + "): " + cmd + "\n" + read_text(log));
  }
}

}  // namespace detail

inline EncodeResult external_encode(const PlaneImage& img, int qp, const CodecAdapter& adapter) {
  adapter.validate();
  const std::filesystem::path dir = detail::scratch_dir();
  const std::string stem = detail::unique_stem();
  if (dir.string().find_first_of(" '\"") != std::string::npos) {
    throw CodecError("codec: scratch directory path must not contain spaces or quotes: " + dir.string());
  }
  detail::ScratchFiles files;
  const auto input = files.add(dir / (stem + "-in.png"));
  const auto output = files.add(dir / (stem + "-out" + adapter.output_extension));
  const auto log = files.add(dir / (stem + ".log"));
  write_png(input, img);

  std::string cmd = detail::replace_all(adapter.command_template, "{input}", input.string());
  cmd = detail::replace_all(cmd, "{output}", output.string());
  cmd = detail::replace_all(cmd, "{qp}", std::to_string(qp));
  detail::run_command(cmd, log);
  if (!std::filesystem::exists(output)) throw CodecError("codec produced no output file: " + cmd + "\n" + detail::read_text(log));

  EncodeResult res;
  res.bits = static_cast<long long>(std::filesystem::file_size(output)) * 8;
  std::filesystem::path decoded = output;
  if (!adapter.decode_template.empty()) {
    decoded = files.add(dir / (stem + "-dec.png"));
    std::string dcmd = detail::replace_all(adapter.decode_template, "{input}", output.string());
    dcmd = detail::replace_all(dcmd, "{output}", decoded.string());
    detail::run_command(dcmd, log);
  }
  try {
    res.recon = read_png(decoded);
  } catch (const ImageIoError& e) {
    throw CodecError(std::string("codec reconstruction unreadable: ") + e.what());
  }
  if (res.recon.rows() != img.rows() || res.recon.cols() != img.cols()) {
    throw CodecError("codec reconstruction has wrong size");
  }
  if (res.recon.channels() != img.channels()) {
    throw CodecError("codec reconstruction has " + std::to_string(res.recon.channels()) + " channels, expected " +
                     std::to_string(img.channels()));
  }
  return res;
}

inline EncodeResult encode(const PlaneImage& img, int qp, const CodecAdapter& adapter) {
  return adapter.kind == CodecKind::kBuiltin ? builtin_encode(img, qp) : external_encode(img, qp, adapter);
}

// ---------------------------------------------------------------------------
// Per-tile rate proxy

/// Rate of tile t measured in context: with the ERP resized to W_t, sub-image 1
/// covers rows [0, end of tile) and sub-image 2 rows [start of tile, H). Their
/// union is the whole resized image and their intersection is the tile, so the
/// tile's share is sub1 + sub2 - full, clamped at zero.
struct TileRateReport {
  int tile_index = 0;
  long long sub1_bits = 0;
  long long sub2_bits = 0;
  long long full_bits = 0;
  long long raw_bits() const { return sub1_bits + sub2_bits - full_bits; }
  double bits() const { return static_cast<double>(std::max(0LL, raw_bits())); }
};

namespace detail {

inline TileRateReport tile_rate_with_full(const PlaneImage& resized, const EncodeResult& full,
                                          const PseudocylConfig& config, int t, const CodecAdapter& codec, int qp) {
  const int h = config.height;
  const int begin = t * config.tile_height;
  const int end = begin + config.tile_height;
  TileRateReport rep;
  rep.tile_index = t;
  rep.full_bits = full.bits;
  rep.sub1_bits = end == h ? full.bits : encode(resized.crop_rows(0, end), qp, codec).bits;
  rep.sub2_bits = begin == 0 ? full.bits : encode(resized.crop_rows(begin, h - begin), qp, codec).bits;
  return rep;
}

}  // namespace detail

inline TileRateReport tile_rate(const PlaneImage& erp, const PseudocylConfig& config, int t, const CodecAdapter& codec,
                                int qp) {
  config.validate();
  if (t < 0 || t >= config.tile_count()) throw std::out_of_range("tile_rate: tile index out of range");
  if (erp.rows() != config.height || erp.cols() != config.width) throw ConfigError("tile_rate: image/config size mismatch");
  const PlaneImage resized = resize_width(erp, config.widths[static_cast<std::size_t>(t)]);
  return detail::tile_rate_with_full(resized, encode(resized, qp, codec), config, t, codec, qp);
}

struct Reconstruction {
  double total_bits = 0.0;
  std::vector<TileRateReport> tiles;
  TiledImage tiled;
  PlaneImage erp;
};

/// Codes the ERP image under `config`: each tile's pixels come from the decoded
/// width-W_t resized image, and the rate is the sum of the per-tile proxies.
inline Reconstruction reconstruct_config(const PlaneImage& erp, const PseudocylConfig& config, const CodecAdapter& codec,
                                         int qp) {
  config.validate();
  if (erp.rows() != config.height || erp.cols() != config.width) {
    throw ConfigError("reconstruct_config: image/config size mismatch");
  }
  struct Coded {
    PlaneImage resized;
    EncodeResult full;
  };
  std::map<int, Coded> by_width;
  Reconstruction out;
  out.tiled.config = config;
  for (int t = 0; t < config.tile_count(); ++t) {
    const int w = config.widths[static_cast<std::size_t>(t)];
    auto it = by_width.find(w);
    if (it == by_width.end()) {
      PlaneImage resized = resize_width(erp, w);
      EncodeResult full = encode(resized, qp, codec);
      it = by_width.emplace(w, Coded{std::move(resized), std::move(full)}).first;
    }
    const Coded& coded = it->second;
    out.tiles.push_back(detail::tile_rate_with_full(coded.resized, coded.full, config, t, codec, qp));
    out.total_bits += out.tiles.back().bits();
    out.tiled.tiles.push_back(coded.full.recon.crop_rows(t * config.tile_height, config.tile_height));
  }
  out.erp = tiled_to_erp(out.tiled);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset RD curves

struct DatasetImage {
  std::string name;
  PlaneImage image;
};

struct RdSample {
  double bpp = 0.0;
  double vmse = 0.0;
};

/// Per-image (bpp, VMSE) for each qp, indexed [image][qp].
inline std::vector<std::vector<RdSample>> rd_samples(std::span<const DatasetImage> dataset,
                                                     const PseudocylConfig& config, const CodecAdapter& codec,
                                                     unsigned threads = 1) {
  codec.validate();
  if (dataset.empty()) throw std::invalid_argument("rd_curve: dataset is empty");
  const std::size_t nq = codec.qp_range.size();
  std::vector<std::vector<RdSample>> samples(dataset.size(), std::vector<RdSample>(nq));
  parallel_for(dataset.size() * nq, threads, [&](std::size_t job) {
    const std::size_t i = job / nq, k = job % nq;
    const DatasetImage& item = dataset[i];
    const int qp = codec.qp_range[k];
    try {
      const Reconstruction rec = reconstruct_config(item.image, config, codec, qp);
      samples[i][k] = {rec.total_bits / (static_cast<double>(config.height) * config.width), vmse(item.image, rec.erp)};
    } catch (const std::exception& e) {
      throw CodecError("image '" + item.name + "' at qp " + std::to_string(qp) + ": " + e.what());
    }
  });
  return samples;
}

/// Dataset RD curve: rates and VMSE averaged separately over images coded with
/// the same qp, then sorted by rate.
inline RdCurve rd_curve(std::span<const DatasetImage> dataset, const PseudocylConfig& config, const CodecAdapter& codec,
                        unsigned threads = 1) {
  const auto samples = rd_samples(dataset, config, codec, threads);
  RdCurve curve;
  curve.kind = DistortionKind::kVmse;
  for (std::size_t k = 0; k < codec.qp_range.size(); ++k) {
    double bpp = 0.0, dist = 0.0;
    for (const auto& per_image : samples) {
      bpp += per_image[k].bpp;
      dist += per_image[k].vmse;
    }
    const double n = static_cast<double>(samples.size());
    curve.points.push_back({codec.qp_range[k], bpp / n, dist / n});
  }
  curve.sort_by_rate();
  return curve;
}

}  // namespace pseudocyl
