#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pseudocyl/metrics.hpp"
#include "test_support.hpp"

namespace pseudocyl {
namespace {

using testing::random_image;

PlaneImage rotate_columns(const PlaneImage& img, int shift) {
  PlaneImage out(img.rows(), img.cols(), img.channels());
  for (int ch = 0; ch < img.channels(); ++ch) {
    for (int r = 0; r < img.rows(); ++r) {
      for (int c = 0; c < img.cols(); ++c) out.at(r, (c + shift) % img.cols(), ch) = img.at(r, c, ch);
    }
  }
  return out;
}

PlaneImage add_noise(const PlaneImage& img, double amplitude, unsigned seed) {
  PlaneImage out = img;
  const PlaneImage n = random_image(img.rows(), img.cols(), img.channels(), seed);
  auto& dst = out.samples();
  const auto& src = n.samples();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::clamp(dst[k] + amplitude * (src[k] - 0.5), 0.0, 1.0);
  return out;
}

// Windowed SSIM evaluated by explicit summation over every 11x11 window with a
// freshly built 2-D Gaussian.
double ssim_oracle(const PlaneImage& x, const PlaneImage& y) {
  const int n = 11;
  const double sigma = 1.5;
  std::vector<double> w(n * n);
  double wsum = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double da = a - 5, db = b - 5;
      w[a * n + b] = std::exp(-(da * da + db * db) / (2 * sigma * sigma));
      wsum += w[a * n + b];
    }
  }
  for (double& v : w) v /= wsum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int ch = 0; ch < x.channels(); ++ch) {
    double acc = 0.0;
    int windows = 0;
    for (int r = 0; r + n <= x.rows(); ++r) {
      for (int c = 0; c + n <= x.cols(); ++c) {
        double mx = 0, my = 0;
        for (int a = 0; a < n; ++a) {
          for (int b = 0; b < n; ++b) {
            mx += w[a * n + b] * x.at(r + a, c + b, ch);
            my += w[a * n + b] * y.at(r + a, c + b, ch);
          }
        }
        double vx = 0, vy = 0, cov = 0;
        for (int a = 0; a < n; ++a) {
          for (int b = 0; b < n; ++b) {
            const double dx = x.at(r + a, c + b, ch) - mx, dy = y.at(r + a, c + b, ch) - my;
            vx += w[a * n + b] * dx * dx;
            vy += w[a * n + b] * dy * dy;
            cov += w[a * n + b] * dx * dy;
          }
        }
        acc += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    }
    total += acc / windows;
  }
  return total / x.channels();
}

RdCurve make_curve(std::vector<double> bpp, std::vector<double> quality, DistortionKind kind) {
  RdCurve c;
  c.kind = kind;
  for (std::size_t k = 0; k < bpp.size(); ++k) c.points.push_back({static_cast<int>(k), bpp[k], quality[k]});
  return c;
}

RdCurve sample_vpsnr_curve() {
  return make_curve({0.12, 0.25, 0.5, 1.0, 2.0}, {28.1, 31.0, 33.7, 36.2, 38.4}, DistortionKind::kVpsnr);
}

// ---------------------------------------------------------------------------

TEST(Mse, ClosedFormValues) {
  const PlaneImage zero(4, 5, 3, 0.0), one(4, 5, 3, 1.0), half(4, 5, 3, 0.5);
  EXPECT_EQ(mse(zero, zero), 0.0);
  EXPECT_TRUE(std::isinf(psnr(zero, zero)));
  EXPECT_DOUBLE_EQ(mse(zero, one), 1.0);
  EXPECT_DOUBLE_EQ(psnr(zero, one), 0.0);
  EXPECT_DOUBLE_EQ(mse(zero, half), 0.25);
  EXPECT_NEAR(psnr(zero, half), 6.0206, 1e-4);
  EXPECT_THROW(mse(zero, PlaneImage(4, 6, 3)), MetricError);
}

TEST(Ssim, IdenticalImagesScoreOne) {
  for (unsigned seed : {1u, 2u, 3u}) {
    const PlaneImage x = random_image(20, 23, 3, seed);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
  }
}

TEST(Ssim, MatchesDirectSummationOracle) {
  const PlaneImage x = random_image(16, 16, 3, 4);
  const PlaneImage y = add_noise(x, 0.3, 5);
  EXPECT_NEAR(ssim(x, y), ssim_oracle(x, y), 1e-12);
  const PlaneImage z = random_image(16, 16, 3, 6);
  EXPECT_NEAR(ssim(x, z), ssim_oracle(x, z), 1e-12);
}

TEST(Ssim, NegativeIsSymmetricAndBelowOne) {
  PlaneImage x(16, 16, 1);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) x.at(r, c) = (r / 4 + c / 4) % 2 ? 0.9 : 0.2;
  }
  PlaneImage neg = x;
  for (double& v : neg.samples()) v = 1.0 - v;
  const double a = ssim(x, neg), b = ssim(neg, x);
  EXPECT_LT(a, 1.0);
  EXPECT_DOUBLE_EQ(a, b);
}

TEST(Ssim, RejectsSmallImages) {
  const PlaneImage x(10, 20, 1);
  EXPECT_THROW(ssim(x, x), MetricError);
}

TEST(ViewportMetrics, ConstantOffset) {
  const PlaneImage ref = random_image(48, 96, 3, 7);
  PlaneImage test = ref;
  for (double& v : test.samples()) v += 0.1;
  EXPECT_NEAR(vmse(ref, test), 0.01, 1e-12);
  EXPECT_NEAR(vpsnr(ref, test), 20.0, 1e-9);
}

TEST(ViewportMetrics, MeanOfPerViewportScores) {
  const PlaneImage ref = testing::smooth_sphere_image(60, 120, 3, 8);
  const PlaneImage test = add_noise(ref, 0.2, 9);
  double m = 0.0, s = 0.0;
  const auto vps = canonical_viewports(60, 120);
  for (const auto& spec : vps) {
    const PlaneImage a = extract_viewport(ref, spec), b = extract_viewport(test, spec);
    m += mse(a, b);
    s += ssim(a, b);
  }
  const ViewportScores scores = viewport_scores(ref, test);
  EXPECT_EQ(scores.mse.size(), 14u);
  EXPECT_NEAR(scores.vmse, m / 14, 1e-15);
  EXPECT_NEAR(scores.vssim, s / 14, 1e-15);
  EXPECT_NEAR(scores.vpsnr, 10 * std::log10(14 / m), 1e-12);
  EXPECT_NEAR(vssim_loss(ref, test), 1.0 - s / 14, 1e-15);
}

TEST(ViewportMetrics, Ranges) {
  for (unsigned seed : {10u, 11u, 12u}) {
    const PlaneImage a = random_image(36, 72, 1, seed), b = random_image(36, 72, 1, seed + 100);
    const ViewportScores s = viewport_scores(a, b);
    EXPECT_GE(s.vmse, 0.0);
    EXPECT_GE(s.vssim, -1.0);
    EXPECT_LE(s.vssim, 1.0);
  }
}

// Rotating both inputs by W/4 permutes the twelve non-pole viewports. The two pole
// viewports span pi/3 x pi/2 and turn with the content, so they are excluded.
TEST(ViewportMetrics, QuarterTurnPermutesNonPoleViewports) {
  const int h = 48, w = 96;
  const PlaneImage ref = testing::smooth_sphere_image(h, w, 2, 13);
  const PlaneImage test = add_noise(ref, 0.2, 14);
  const ViewportScores a = viewport_scores(ref, test);
  const ViewportScores b = viewport_scores(rotate_columns(ref, w / 4), rotate_columns(test, w / 4));
  double ma = 0, mb = 0, sa = 0, sb = 0;
  for (std::size_t k = 0; k < 12; ++k) {
    ma += a.mse[k];
    mb += b.mse[k];
    sa += a.ssim[k];
    sb += b.ssim[k];
  }
  EXPECT_NEAR(ma, mb, 1e-12 * ma);
  EXPECT_NEAR(sa, sb, 1e-12);
  // Viewport (0, phi) of the rotated pair sees what (0, phi - pi/2) saw before.
  EXPECT_NEAR(b.mse[1], a.mse[0], 1e-12 * a.mse[0]);
  EXPECT_NEAR(b.mse[10], a.mse[9], 1e-12 * a.mse[9]);
}

// ---------------------------------------------------------------------------

TEST(Bd, IdenticalCurvesGiveZero) {
  const RdCurve a = sample_vpsnr_curve();
  const BdResult r = bd_metrics(a, a);
  EXPECT_EQ(r.rate_percent, 0.0);
  EXPECT_EQ(r.distortion, 0.0);
}

TEST(Bd, DoubledRatesGiveHundredPercent) {
  const RdCurve a = sample_vpsnr_curve();
  RdCurve b = a;
  for (auto& p : b.points) p.bpp *= 2;
  EXPECT_NEAR(bd_metrics(a, b).rate_percent, 100.0, 1e-6);
  EXPECT_NEAR(bd_metrics(b, a).rate_percent, -50.0, 1e-6);
}

TEST(Bd, OneDecibelOffset) {
  const RdCurve a = sample_vpsnr_curve();
  RdCurve b = a;
  for (auto& p : b.points) p.distortion += 1.0;
  EXPECT_NEAR(bd_metrics(a, b).distortion, 1.0, 1e-6);
  EXPECT_LT(bd_metrics(a, b).rate_percent, 0.0);

  // Same offset expressed through VMSE.
  RdCurve ma = a, mb = a;
  ma.kind = mb.kind = DistortionKind::kVmse;
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    ma.points[k].distortion = std::pow(10.0, -a.points[k].distortion / 10);
    mb.points[k].distortion = std::pow(10.0, -(a.points[k].distortion + 1.0) / 10);
  }
  EXPECT_NEAR(bd_metrics(ma, mb).distortion, 1.0, 1e-6);
}

TEST(Bd, ApproximatelyAntisymmetric) {
  const RdCurve a = sample_vpsnr_curve();
  const RdCurve b = make_curve({0.1, 0.22, 0.47, 0.9, 1.9}, {28.6, 31.4, 34.3, 36.5, 38.9}, DistortionKind::kVpsnr);
  const double ab = bd_metrics(a, b).distortion, ba = bd_metrics(b, a).distortion;
  EXPECT_NEAR(ab, -ba, 0.01 * std::abs(ab));
}

TEST(Bd, InvalidInputsRejected) {
  const RdCurve a = sample_vpsnr_curve();
  RdCurve short_curve = a;
  short_curve.points.resize(3);
  EXPECT_THROW(bd_metrics(a, short_curve), MetricError);
  RdCurve far = a;
  for (auto& p : far.points) p.distortion += 100.0;
  EXPECT_THROW(bd_metrics(a, far), MetricError);
  RdCurve other_kind = a;
  other_kind.kind = DistortionKind::kVssim;
  EXPECT_THROW(bd_metrics(a, other_kind), MetricError);
  RdCurve zero_rate = a;
  zero_rate.points[0].bpp = 0.0;
  EXPECT_THROW(bd_metrics(zero_rate, a), MetricError);
}

TEST(RdCsv, RoundTrip) {
  const RdCurve a = make_curve({0.5, 0.1, 0.3, 0.9}, {1e-3, 4e-3, 2e-3, 5e-4}, DistortionKind::kVmse);
  std::stringstream ss;
  write_rd_csv(ss, a);
  RdCurve sorted = a;
  sorted.sort_by_rate();
  EXPECT_EQ(read_rd_csv(ss), sorted);
}

TEST(RdCsv, MalformedRejected) {
  std::stringstream bad_header("rate,dist\n1,2\n");
  EXPECT_THROW(read_rd_csv(bad_header), std::runtime_error);
  std::stringstream bad_line("qp,bpp,distortion\n1;0.5;0.1\n");
  EXPECT_THROW(read_rd_csv(bad_line), std::runtime_error);
}

TEST(DistortionKind, Parse) {
  EXPECT_EQ(parse_distortion_kind("vpsnr"), DistortionKind::kVpsnr);
  EXPECT_EQ(to_string(DistortionKind::kVssim), "vssim");
  EXPECT_THROW(parse_distortion_kind("psnr"), std::invalid_argument);
}

}  // namespace
}  // namespace pseudocyl
