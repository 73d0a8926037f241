#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <random>

#include "pseudocyl/metrics.hpp"
#include "pseudocyl/representation.hpp"
#include "pseudocyl/tiled_io.hpp"
#include "test_support.hpp"

namespace pseudocyl {
namespace {

using testing::random_image;
using testing::random_tiled;

TEST(ResizeRow, EqualWidthIsIdentity) {
  const std::vector<double> src{0.3, 0.9, 0.1, 0.7, 0.2};
  EXPECT_EQ(resize_row(src, 5), src);
}

TEST(ResizeRow, ConstantStaysConstant) {
  const std::vector<double> src(13, 0.42);
  for (int w : {1, 2, 5, 13, 40}) {
    for (double v : resize_row(src, w)) EXPECT_DOUBLE_EQ(v, 0.42);
  }
}

TEST(ResizeRow, CenterAlignedDownsample) {
  const std::vector<double> src{0, 1, 2, 3};
  const auto out = resize_row(src, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 2.5);
}

TEST(ResizeRow, UpsampleWrapsCircularly) {
  // Position of output 0 is 0.5 * 0.5 - 0.5 = -0.25: blends the last and first sample.
  const std::vector<double> src{0, 4};
  const auto out = resize_row(src, 4);
  EXPECT_DOUBLE_EQ(out[0], 0.75 * 0 + 0.25 * 4);
  EXPECT_DOUBLE_EQ(out[1], 0.75 * 0 + 0.25 * 4);
  EXPECT_DOUBLE_EQ(out[3], 0.25 * 0 + 0.75 * 4);
}

TEST(Config, Validation) {
  PseudocylConfig cfg = PseudocylConfig::uniform(64, 128, 16);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.tile_count(), 4);
  cfg.widths[1] = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.widths[1] = 129;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.widths.pop_back();
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(PseudocylConfig::uniform(64, 128, 24), ConfigError);
}

TEST(Config, SymmetryAndMonotonicity) {
  PseudocylConfig cfg{64, 128, 8, {32, 64, 96, 128, 128, 96, 64, 32}};
  EXPECT_TRUE(cfg.is_symmetric());
  EXPECT_TRUE(cfg.is_monotone());
  EXPECT_EQ(half_tile_index(8), 2);
  cfg.widths = {64, 32, 96, 128, 128, 96, 32, 64};
  EXPECT_TRUE(cfg.is_symmetric());
  EXPECT_FALSE(cfg.is_monotone());
  cfg.widths = {32, 64, 96, 10, 128, 96, 64, 32};
  EXPECT_FALSE(cfg.is_symmetric());
  // Only tiles 0..T_half are constrained: tile 3 may be narrower than tile 2.
  cfg.widths = {32, 64, 96, 40, 40, 96, 64, 32};
  EXPECT_TRUE(cfg.is_monotone());
}

TEST(Config, SinusoidalPreset) {
  const auto cfg = PseudocylConfig::sinusoidal(512, 1024, 32);
  EXPECT_EQ(cfg.tile_count(), 16);
  EXPECT_TRUE(cfg.is_symmetric());
  EXPECT_TRUE(cfg.is_monotone());
  const int eq = cfg.widths[7];
  for (int w : cfg.widths) EXPECT_LE(w, eq);
  EXPECT_LT(cfg.widths[0], cfg.widths[1]);
}

TEST(Config, JsonRoundTrip) {
  const auto cfg = PseudocylConfig::sinusoidal(64, 128, 8);
  const nlohmann::json j = cfg;
  EXPECT_EQ(j.at("tile_height"), 8);
  EXPECT_EQ(j.get<PseudocylConfig>(), cfg);
  nlohmann::json bad = j;
  bad["tile_height"] = 7;
  EXPECT_THROW(bad.get<PseudocylConfig>(), ConfigError);
}

TEST(ErpToTiled, UniformWidthsAreRowSlices) {
  const PlaneImage erp = random_image(32, 48, 3, 1);
  const auto cfg = PseudocylConfig::uniform(32, 48, 8);
  const TiledImage tiled = erp_to_tiled(erp, cfg);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(tiled.tiles[static_cast<std::size_t>(t)], erp.crop_rows(8 * t, 8));
  EXPECT_EQ(tiled_to_erp(tiled), erp);
}

TEST(ErpToTiled, RejectsSizeMismatch) {
  EXPECT_THROW(erp_to_tiled(random_image(32, 40, 1, 1), PseudocylConfig::uniform(32, 48, 8)), ConfigError);
}

TEST(ErpToTiled, SinusoidalEquatorTileIsWidest) {
  const auto cfg = PseudocylConfig::sinusoidal(64, 128, 8);
  const TiledImage tiled = erp_to_tiled(random_image(64, 128, 1, 2), cfg);
  int widest = 0;
  for (const auto& tile : tiled.tiles) widest = std::max(widest, tile.cols());
  EXPECT_EQ(widest, tiled.tiles[3].cols());
  EXPECT_EQ(widest, tiled.tiles[4].cols());
}

TEST(TiledToErp, ConstantTilesGiveConstantErp) {
  const auto cfg = PseudocylConfig::sinusoidal(32, 64, 8);
  TiledImage tiled = random_tiled(cfg, 2, 3);
  for (auto& tile : tiled.tiles) {
    for (int ch = 0; ch < 2; ++ch) {
      for (double& v : tile.plane(ch)) v = ch == 0 ? 0.25 : 0.75;
    }
  }
  const PlaneImage erp = tiled_to_erp(tiled);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 64; ++c) {
      EXPECT_DOUBLE_EQ(erp.at(r, c, 0), 0.25);
      EXPECT_DOUBLE_EQ(erp.at(r, c, 1), 0.75);
    }
  }
}

TEST(ErpToTiled, MirroredInputGivesMirroredTiles) {
  std::mt19937_64 rng(5);
  const auto cfg = testing::random_config(48, 64, 8, rng);
  const PlaneImage erp = random_image(48, 64, 2, 6);
  PlaneImage flipped(48, 64, 2);
  for (int ch = 0; ch < 2; ++ch) {
    for (int r = 0; r < 48; ++r) {
      for (int c = 0; c < 64; ++c) flipped.at(47 - r, c, ch) = erp.at(r, c, ch);
    }
  }
  const TiledImage a = erp_to_tiled(erp, cfg);
  const TiledImage b = erp_to_tiled(flipped, cfg);
  const int t_count = cfg.tile_count();
  for (int t = 0; t < t_count; ++t) {
    const PlaneImage& ta = a.tiles[static_cast<std::size_t>(t)];
    const PlaneImage& tb = b.tiles[static_cast<std::size_t>(t_count - 1 - t)];
    ASSERT_EQ(ta.cols(), tb.cols());
    for (int ch = 0; ch < 2; ++ch) {
      for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < ta.cols(); ++c) EXPECT_EQ(ta.at(r, c, ch), tb.at(7 - r, c, ch));
      }
    }
  }
}

// Round-trip loss of the sinusoidal layout, judged against tiles built by direct
// spherical resampling: each tile sample is the mean of the analytic signal over a
// 4x4 grid spanning its sphere cell.
TEST(TiledToErp, SinusoidalRoundTripCloseToDirectResampling) {
  const int h = 512, w = 1024;
  const auto signal = [](double theta, double phi) {
    const Vec3 v = sphere_to_direction({theta, phi});
    return 0.5 + 0.2 * std::sin(2.0 * (0.7 * v.x - 0.4 * v.y + 0.5 * v.z)) + 0.1 * std::cos(3.0 * v.y * v.z);
  };
  PlaneImage erp(h, w, 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) erp.at(r, c) = signal(erp_latitude(r, h), erp_longitude(c, w));
  }
  const auto cfg = PseudocylConfig::sinusoidal(h, w, 32);

  TiledImage direct{cfg, {}};
  for (int t = 0; t < cfg.tile_count(); ++t) {
    const int wt = cfg.widths[static_cast<std::size_t>(t)];
    PlaneImage tile(cfg.tile_height, wt, 1);
    for (int r = 0; r < cfg.tile_height; ++r) {
      const int g = t * cfg.tile_height + r;
      for (int c = 0; c < wt; ++c) {
        double acc = 0.0;
        for (int sy = 0; sy < 4; ++sy) {
          const double theta = (0.5 - (g + (sy + 0.5) / 4.0) / h) * kPi;
          for (int sx = 0; sx < 4; ++sx) acc += signal(theta, ((c + (sx + 0.5) / 4.0) / wt - 0.5) * 2 * kPi);
        }
        tile.at(r, c) = acc / 16.0;
      }
    }
    direct.tiles.push_back(std::move(tile));
  }

  const double oracle = vmse(erp, tiled_to_erp(direct));
  const double ours = vmse(erp, tiled_to_erp(erp_to_tiled(erp, cfg)));
  std::ostringstream msg;
  msg << std::scientific << "oracle " << oracle << " round trip " << ours;
  RecordProperty("vmse", msg.str());
  std::cout << "[ vmse     ] " << msg.str() << "\n";
  EXPECT_GT(oracle, 0.0);
  EXPECT_LE(ours, 2.0 * oracle + 1e-12) << msg.str();
}

TEST(PadTile, ZeroRadiusReturnsTile) {
  const auto cfg = PseudocylConfig::sinusoidal(32, 64, 8);
  const TiledImage tiled = random_tiled(cfg, 1, 7);
  EXPECT_EQ(pad_tile(tiled, 1, 0), tiled.tiles[1]);
}

TEST(PadTile, RadiusBeyondTileHeightRejected) {
  const TiledImage tiled = random_tiled(PseudocylConfig::uniform(32, 64, 4), 1, 7);
  EXPECT_THROW(pad_tile(tiled, 1, 5), std::invalid_argument);
  EXPECT_NO_THROW(pad_tile(tiled, 1, 4));
}

TEST(PadTile, UniformInteriorPadsAreNeighborRows) {
  const TiledImage tiled = random_tiled(PseudocylConfig::uniform(32, 20, 8), 2, 8);
  const int k = 3;
  const PlaneImage padded = pad_tile(tiled, 2, k);
  for (int ch = 0; ch < 2; ++ch) {
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < 20; ++c) {
        EXPECT_EQ(padded.at(r, c + k, ch), tiled.tiles[1].at(8 - k + r, c, ch));
        EXPECT_EQ(padded.at(k + 8 + r, c + k, ch), tiled.tiles[3].at(r, c, ch));
      }
    }
  }
}

TEST(PadTile, PoleRowTurnsHalfRevolution) {
  PseudocylConfig cfg{16, 16, 4, {6, 12, 12, 6}};
  const TiledImage tiled = random_tiled(cfg, 1, 9);
  const PlaneImage padded = pad_tile(tiled, 0, 1);
  for (int c = 0; c < 6; ++c) EXPECT_EQ(padded.at(0, c + 1), tiled.tiles[0].at(0, (c + 3) % 6));
  const PlaneImage bottom = pad_tile(tiled, 3, 2);
  for (int c = 0; c < 6; ++c) {
    EXPECT_EQ(bottom.at(4 + 2, c + 2), tiled.tiles[3].at(3, (c + 3) % 6));
    EXPECT_EQ(bottom.at(4 + 3, c + 2), tiled.tiles[3].at(2, (c + 3) % 6));
  }
}

TEST(PadTile, OddPoleWidthInterpolatesHalfPixel) {
  PseudocylConfig cfg{8, 8, 4, {5, 5}};
  const TiledImage tiled = random_tiled(cfg, 1, 10);
  const PlaneImage padded = pad_tile(tiled, 0, 1);
  for (int c = 0; c < 5; ++c) {
    const double expected = 0.5 * tiled.tiles[0].at(0, (c + 2) % 5) + 0.5 * tiled.tiles[0].at(0, (c + 3) % 5);
    EXPECT_NEAR(padded.at(0, c + 1), expected, 1e-15);
  }
}

TEST(PadTile, InteriorUntouchedAndCornersCircular) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cfg = testing::random_config(40, 30, 8, rng);
    const TiledImage tiled = random_tiled(cfg, 2, 100 + trial);
    for (int t = 0; t < cfg.tile_count(); ++t) {
      for (int k : {1, 2, 8}) {
        const PlaneImage padded = pad_tile(tiled, t, k);
        const PlaneImage& tile = tiled.tiles[static_cast<std::size_t>(t)];
        const int wt = tile.cols();
        ASSERT_EQ(padded.rows(), 8 + 2 * k);
        ASSERT_EQ(padded.cols(), wt + 2 * k);
        for (int ch = 0; ch < 2; ++ch) {
          for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < wt; ++c) ASSERT_EQ(padded.at(r + k, c + k, ch), tile.at(r, c, ch));
          }
          for (int r = 0; r < padded.rows(); ++r) {
            for (int c = 0; c < padded.cols(); ++c) {
              ASSERT_EQ(padded.at(r, c, ch), padded.at(r, k + wrap(c - k, wt), ch));
            }
          }
        }
      }
    }
  }
}

TEST(PadSource, PoleWrapIsAnInvolution) {
  for (int h : {8, 9, 64}) {
    for (int g = -h; g < 2 * h; ++g) {
      const int once = wrap(-1 - g, h);
      EXPECT_EQ(wrap(-1 - once, h), wrap(g, h));
    }
  }
  for (int w : {2, 6, 128}) {
    for (int q = 0; q < w; ++q) EXPECT_EQ(wrap(q + w / 2 + w / 2, w), q);
  }
}

TEST(TiledIo, SaveLoadRoundTripsEightBitContent) {
  const auto cfg = PseudocylConfig::sinusoidal(32, 64, 8);
  TiledImage tiled = random_tiled(cfg, 3, 12);
  for (auto& tile : tiled.tiles) tile = quantize_8bit(std::move(tile));
  const auto dir = std::filesystem::temp_directory_path() / "pseudocyl_tiled_io_test";
  std::filesystem::remove_all(dir);
  save_tiled(dir, tiled);
  EXPECT_EQ(load_tiled(dir), tiled);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace pseudocyl
