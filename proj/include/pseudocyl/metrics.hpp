#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pseudocyl/image.hpp"
#include "pseudocyl/viewport.hpp"

namespace pseudocyl {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_shape(const PlaneImage& a, const PlaneImage& b, const char* what) {
  if (!a.same_shape(b)) {
    throw MetricError(std::string(what) + ": image shapes differ (" + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + "x" + std::to_string(a.channels()) + " vs " +
                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + "x" +
                      std::to_string(b.channels()) + ")");
  }
}

inline double mse(const PlaneImage& ref, const PlaneImage& test) {
  require_same_shape(ref, test, "mse");
  if (ref.empty()) throw MetricError("mse: empty images");
  double sum = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const double d = ref.samples()[k] - test.samples()[k];
    sum += d * d;
  }
  return sum / static_cast<double>(ref.size());
}

/// 10 log10(peak^2 / mse); +infinity when mse is zero.
inline double psnr_from_mse(double mse_value, double peak = 1.0) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

inline double psnr(const PlaneImage& ref, const PlaneImage& test, double peak = 1.0) {
  return psnr_from_mse(mse(ref, test), peak);
}

// ---------------------------------------------------------------------------
// SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1,
// averaged over all valid window positions and then over channels.

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

inline std::array<double, kSsimWindow> ssim_gaussian_1d() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  for (int k = 0; k < kSsimWindow; ++k) {
    const double x = k - kSsimWindow / 2;
    g[static_cast<std::size_t>(k)] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[static_cast<std::size_t>(k)];
  }
  for (double& v : g) v /= sum;
  return g;
}

namespace detail {

// Separable valid-mode filter of one plane.
inline std::vector<double> gaussian_filter_valid(std::span<const double> plane, int rows, int cols) {
  const auto g = ssim_gaussian_1d();
  const int out_rows = rows - kSsimWindow + 1;
  const int out_cols = cols - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(rows) * out_cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(r) * cols + c + k];
      tmp[static_cast<std::size_t>(r) * out_cols + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_rows) * out_cols, 0.0);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(r + k) * out_cols + c];
      out[static_cast<std::size_t>(r) * out_cols + c] = s;
    }
  }
  return out;
}

}  // namespace detail

inline double ssim(const PlaneImage& ref, const PlaneImage& test) {
  require_same_shape(ref, test, "ssim");
  if (ref.rows() < kSsimWindow || ref.cols() < kSsimWindow) {
    throw MetricError("ssim: images must be at least 11x11, got " + std::to_string(ref.rows()) + "x" +
                      std::to_string(ref.cols()));
  }
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const int rows = ref.rows(), cols = ref.cols();
  const std::size_t n = ref.plane_size();
  double total = 0.0;
  std::vector<double> xx(n), yy(n), xy(n);
  for (int ch = 0; ch < ref.channels(); ++ch) {
    auto x = ref.plane(ch);
    auto y = test.plane(ch);
    for (std::size_t k = 0; k < n; ++k) {
      xx[k] = x[k] * x[k];
      yy[k] = y[k] * y[k];
      xy[k] = x[k] * y[k];
    }
    const auto mu_x = detail::gaussian_filter_valid(x, rows, cols);
    const auto mu_y = detail::gaussian_filter_valid(y, rows, cols);
    const auto s_xx = detail::gaussian_filter_valid(xx, rows, cols);
    const auto s_yy = detail::gaussian_filter_valid(yy, rows, cols);
    const auto s_xy = detail::gaussian_filter_valid(xy, rows, cols);
    double sum = 0.0;
    for (std::size_t k = 0; k < mu_x.size(); ++k) {
      const double mx = mu_x[k], my = mu_y[k];
      const double vx = s_xx[k] - mx * mx;
      const double vy = s_yy[k] - my * my;
      const double cov = s_xy[k] - mx * my;
      sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mu_x.size());
  }
  return total / ref.channels();
}

// ---------------------------------------------------------------------------
// Viewport-based metrics over the 14 canonical viewports.

struct ViewportScores {
  std::vector<double> mse;   // one per viewport
  std::vector<double> ssim;  // empty unless requested
  double vmse = 0.0;
  double vpsnr = 0.0;
  double vssim = 0.0;
  double vssim_loss() const { return 1.0 - vssim; }
};

inline ViewportScores viewport_scores(const PlaneImage& ref_erp, const PlaneImage& test_erp, bool with_ssim = true) {
  require_same_shape(ref_erp, test_erp, "viewport metrics");
  ViewportScores s;
  for (const auto& spec : canonical_viewports(ref_erp.rows(), ref_erp.cols())) {
    const PlaneImage a = extract_viewport(ref_erp, spec);
    const PlaneImage b = extract_viewport(test_erp, spec);
    s.mse.push_back(mse(a, b));
    if (with_ssim) s.ssim.push_back(ssim(a, b));
  }
  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  s.vmse = mean(s.mse);
  s.vpsnr = psnr_from_mse(s.vmse);
  s.vssim = mean(s.ssim);
  return s;
}

inline double vmse(const PlaneImage& ref_erp, const PlaneImage& test_erp) {
  return viewport_scores(ref_erp, test_erp, false).vmse;
}

inline double vpsnr(const PlaneImage& ref_erp, const PlaneImage& test_erp) {
  return psnr_from_mse(vmse(ref_erp, test_erp));
}

inline double vssim(const PlaneImage& ref_erp, const PlaneImage& test_erp) {
  return viewport_scores(ref_erp, test_erp, true).vssim;
}

inline double vssim_loss(const PlaneImage& ref_erp, const PlaneImage& test_erp) {
  return 1.0 - vssim(ref_erp, test_erp);
}

// ---------------------------------------------------------------------------
// Rate-distortion curves

enum class DistortionKind { kVmse, kVpsnr, kVssim };

inline std::string to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::kVmse: return "vmse";
    case DistortionKind::kVpsnr: return "vpsnr";
    case DistortionKind::kVssim: return "vssim";
  }
  return "?";
}

inline DistortionKind parse_distortion_kind(const std::string& s) {
  if (s == "vmse") return DistortionKind::kVmse;
  if (s == "vpsnr") return DistortionKind::kVpsnr;
  if (s == "vssim") return DistortionKind::kVssim;
  throw std::invalid_argument("unknown distortion kind '" + s + "' (expected vmse, vpsnr or vssim)");
}

struct RdPoint {
  int qp = 0;
  double bpp = 0.0;
  double distortion = 0.0;
  friend bool operator==(const RdPoint&, const RdPoint&) = default;
};

struct RdCurve {
  std::vector<RdPoint> points;
  DistortionKind kind = DistortionKind::kVmse;

  void sort_by_rate() {
    std::stable_sort(points.begin(), points.end(), [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  }
  friend bool operator==(const RdCurve&, const RdCurve&) = default;
};

inline void write_rd_csv(std::ostream& os, const RdCurve& curve) {
  os << "qp,bpp,distortion\n";
  os.precision(17);
  for (const auto& p : curve.points) os << p.qp << ',' << p.bpp << ',' << p.distortion << '\n';
}

inline void save_rd_csv(const std::filesystem::path& path, const RdCurve& curve) {
  std::ofstream os(path);
  write_rd_csv(os, curve);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
}

inline RdCurve read_rd_csv(std::istream& is, DistortionKind kind = DistortionKind::kVmse) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("RD csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "qp,bpp,distortion") throw std::runtime_error("RD csv: expected header 'qp,bpp,distortion', got '" + line + "'");
  RdCurve curve;
  curve.kind = kind;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    RdPoint p;
    char c1 = 0, c2 = 0;
    if (!(ls >> p.qp >> c1 >> p.bpp >> c2 >> p.distortion) || c1 != ',' || c2 != ',') {
      throw std::runtime_error("RD csv: malformed line " + std::to_string(lineno) + ": '" + line + "'");
    }
    curve.points.push_back(p);
  }
  curve.sort_by_rate();
  return curve;
}

inline RdCurve load_rd_csv(const std::filesystem::path& path, DistortionKind kind = DistortionKind::kVmse) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_rd_csv(is, kind);
}

// ---------------------------------------------------------------------------
// Bjontegaard metrics

struct BdResult {
  double rate_percent = 0.0;  // negative: the test curve needs fewer bits
  double distortion = 0.0;    // positive: the test curve has better quality
};

namespace detail {

// Least-squares cubic through (x, y), returned as coefficients of the normalized
// variable (x - shift) / scale.
struct Cubic {
  Eigen::Vector4d coef;
  double shift = 0.0;
  double scale = 1.0;
  double operator()(double x) const {
    const double t = (x - shift) / scale;
    return coef[0] + t * (coef[1] + t * (coef[2] + t * coef[3]));
  }
};

inline Cubic fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  Cubic c;
  c.shift = 0.5 * (*lo + *hi);
  c.scale = std::max(0.5 * (*hi - *lo), 1e-300);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(x.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = (x[k] - c.shift) / c.scale;
    a.row(static_cast<Eigen::Index>(k)) << 1.0, t, t * t, t * t * t;
    b[static_cast<Eigen::Index>(k)] = y[k];
  }
  c.coef = a.colPivHouseholderQr().solve(b);
  return c;
}

inline constexpr int kBdIntegrationSamples = 1000;

// Mean of (g - f) over [lo, hi] by the trapezoidal rule.
inline double mean_difference(const Cubic& f, const Cubic& g, double lo, double hi) {
  const double h = (hi - lo) / kBdIntegrationSamples;
  double sum = 0.0;
  for (int k = 0; k <= kBdIntegrationSamples; ++k) {
    const double x = k == kBdIntegrationSamples ? hi : lo + k * h;
    const double w = (k == 0 || k == kBdIntegrationSamples) ? 0.5 : 1.0;
    sum += w * (g(x) - f(x));
  }
  return sum * h / (hi - lo);
}

// Quality axis for fitting: VMSE curves are compared in dB so that "higher is better"
// holds for every kind.
inline double quality_value(const RdPoint& p, DistortionKind kind) {
  if (kind == DistortionKind::kVmse) return psnr_from_mse(p.distortion);
  return p.distortion;
}

}  // namespace detail

inline constexpr std::size_t kBdMinPoints = 4;

/// Classic Bjontegaard comparison of two RD curves: cubic fits of log10-rate vs
/// quality (and quality vs log10-rate), integrated over the overlapping interval.
/// For VMSE curves the quality axis is 10 log10(1 / VMSE).
inline BdResult bd_metrics(const RdCurve& anchor, const RdCurve& test) {
  if (anchor.points.size() < kBdMinPoints || test.points.size() < kBdMinPoints) {
    throw MetricError("bd_metrics: each curve needs at least 4 points");
  }
  if (anchor.kind != test.kind) throw MetricError("bd_metrics: curves measure different distortions");
  const auto unpack = [](const RdCurve& c, std::vector<double>& lr, std::vector<double>& q) {
    for (const auto& p : c.points) {
      if (!(p.bpp > 0.0)) throw MetricError("bd_metrics: rates must be positive");
      const double quality = detail::quality_value(p, c.kind);
      if (!std::isfinite(quality)) throw MetricError("bd_metrics: non-finite quality (lossless point?)");
      lr.push_back(std::log10(p.bpp));
      q.push_back(quality);
    }
  };
  std::vector<double> lr_a, q_a, lr_t, q_t;
  unpack(anchor, lr_a, q_a);
  unpack(test, lr_t, q_t);

  const double q_lo = std::max(*std::min_element(q_a.begin(), q_a.end()), *std::min_element(q_t.begin(), q_t.end()));
  const double q_hi = std::min(*std::max_element(q_a.begin(), q_a.end()), *std::max_element(q_t.begin(), q_t.end()));
  const double r_lo = std::max(*std::min_element(lr_a.begin(), lr_a.end()), *std::min_element(lr_t.begin(), lr_t.end()));
  const double r_hi = std::min(*std::max_element(lr_a.begin(), lr_a.end()), *std::max_element(lr_t.begin(), lr_t.end()));
  if (!(q_hi > q_lo) || !(r_hi > r_lo)) throw MetricError("bd_metrics: curves do not overlap");

  BdResult out;
  const double delta_log_rate =
      detail::mean_difference(detail::fit_cubic(q_a, lr_a), detail::fit_cubic(q_t, lr_t), q_lo, q_hi);
  out.rate_percent = (std::pow(10.0, delta_log_rate) - 1.0) * 100.0;
  out.distortion = detail::mean_difference(detail::fit_cubic(lr_a, q_a), detail::fit_cubic(lr_t, q_t), r_lo, r_hi);
  return out;
}

}  // namespace pseudocyl
