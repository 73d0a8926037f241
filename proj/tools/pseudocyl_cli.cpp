// pseudocyl: command-line front end for the pseudocylindrical toolkit.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pseudocyl/pseudocyl.hpp"

namespace fs = std::filesystem;
using namespace pseudocyl;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CodecOptions {
  std::string kind = "builtin";
  std::string command;
  std::string decode_command;
  std::string extension = ".png";
  std::vector<int> qps{8, 16, 24, 32};

  void add_to(CLI::App& cmd) {
    cmd.add_option("--codec", kind, "builtin or external")->check(CLI::IsMember({"builtin", "external"}));
    cmd.add_option("--codec-cmd", command, "encode template with {input} {output} {qp}");
    cmd.add_option("--codec-decode-cmd", decode_command, "optional decode template with {input} {output}");
    cmd.add_option("--codec-ext", extension, "extension of the encoded file");
    cmd.add_option("--qps", qps, "comma separated qp list")->delimiter(',');
  }

  CodecAdapter adapter() const {
    std::vector<int> sorted = qps;
    std::sort(sorted.begin(), sorted.end());
    CodecAdapter a = kind == "builtin" ? CodecAdapter::builtin(sorted)
                                       : CodecAdapter::external(command, sorted, decode_command, extension);
    try {
      a.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return a;
  }
};

unsigned thread_count(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<DatasetImage> load_dataset(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("dataset '" + dir.string() + "' contains no PNG files");
  std::vector<DatasetImage> out;
  for (const auto& f : files) {
    out.push_back({f.filename().string(), read_png(f)});
    if (out.back().image.rows() != out.front().image.rows() || out.back().image.cols() != out.front().image.cols()) {
      throw UsageError("dataset image '" + f.filename().string() + "' differs in size from '" + out.front().name + "'");
    }
  }
  return out;
}

PseudocylConfig config_from_flags(const std::string& config_path, const std::string& preset, int tile_height,
                                  int height, int width) {
  if (!config_path.empty()) {
    PseudocylConfig cfg = load_config(config_path);
    if (cfg.height != height || cfg.width != width) {
      throw UsageError("config is for " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width) +
                       " but the image is " + std::to_string(height) + "x" + std::to_string(width));
    }
    return cfg;
  }
  if (height % tile_height != 0) {
    throw UsageError("tile height " + std::to_string(tile_height) + " does not divide image height " +
                     std::to_string(height));
  }
  return preset == "erp" ? PseudocylConfig::uniform(height, width, tile_height)
                         : PseudocylConfig::sinusoidal(height, width, tile_height);
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Directional test pattern for the over-sampling demo.
PlaneImage stripe_patch(int rows, int cols) {
  PlaneImage p(rows, cols, 3);
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double u = static_cast<double>(c) / cols, v = static_cast<double>(r) / rows;
        p.at(r, c, ch) = 0.5 + 0.35 * std::sin(2 * kPi * (14 * u + 3 * v) + ch) * std::cos(2 * kPi * 5 * v);
      }
    }
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudocylindrical representation and convolution toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (default: hardware concurrency)")->check(CLI::NonNegativeNumber);

  // convert
  auto* convert = app.add_subcommand("convert", "ERP image <-> tiled pseudocylindrical representation");
  std::string cv_dir = "to-tiled", cv_in, cv_out, cv_config, cv_preset = "sinusoidal";
  int cv_tile_height = 32;
  convert->add_option("--direction", cv_dir)->check(CLI::IsMember({"to-tiled", "to-erp"}));
  convert->add_option("--input", cv_in, "ERP PNG (to-tiled) or tile directory (to-erp)")->required()->check(CLI::ExistingPath);
  convert->add_option("--output", cv_out, "tile directory (to-tiled) or ERP PNG (to-erp)")->required();
  convert->add_option("--config", cv_config, "width configuration JSON")->check(CLI::ExistingFile);
  convert->add_option("--preset", cv_preset, "used without --config")->check(CLI::IsMember({"erp", "sinusoidal"}));
  convert->add_option("--tile-height", cv_tile_height)->check(CLI::PositiveNumber);

  // optimize
  auto* optimize = app.add_subcommand("optimize", "search tile widths on a dataset");
  std::string op_dataset, op_out = "config.json", op_log = "search_log.json";
  int op_tiles = 8, op_levels = 4;
  bool op_exhaustive = false;
  long long op_cap = kDefaultExhaustiveCap;
  CodecOptions op_codec;
  optimize->add_option("--dataset", op_dataset, "directory of equally sized ERP PNGs")->required()->check(CLI::ExistingDirectory);
  optimize->add_option("--tiles", op_tiles)->check(CLI::PositiveNumber);
  optimize->add_option("--levels", op_levels)->check(CLI::PositiveNumber);
  optimize->add_option("--out", op_out, "config JSON");
  optimize->add_option("--log", op_log, "search log JSON");
  optimize->add_flag("--exhaustive", op_exhaustive, "score every legal configuration");
  optimize->add_option("--cap", op_cap, "limit for --exhaustive");
  op_codec.add_to(*optimize);

  // rd
  auto* rd = app.add_subcommand("rd", "rate-distortion curve of a configuration on a dataset");
  std::string rd_dataset, rd_config, rd_out = "rd.csv", rd_preset = "sinusoidal";
  int rd_tile_height = 32;
  CodecOptions rd_codec;
  rd->add_option("--dataset", rd_dataset)->required()->check(CLI::ExistingDirectory);
  rd->add_option("--config", rd_config)->check(CLI::ExistingFile);
  rd->add_option("--preset", rd_preset)->check(CLI::IsMember({"erp", "sinusoidal"}));
  rd->add_option("--tile-height", rd_tile_height)->check(CLI::PositiveNumber);
  rd->add_option("--out", rd_out, "CSV with header qp,bpp,distortion");
  rd_codec.add_to(*rd);

  // bd
  auto* bd = app.add_subcommand("bd", "Bjontegaard delta between two RD CSVs");
  std::string bd_anchor, bd_test, bd_kind = "vmse";
  bd->add_option("--anchor", bd_anchor)->required()->check(CLI::ExistingFile);
  bd->add_option("--test", bd_test)->required()->check(CLI::ExistingFile);
  bd->add_option("--kind", bd_kind)->check(CLI::IsMember({"vmse", "vpsnr", "vssim"}));

  // viewports
  auto* viewports = app.add_subcommand("viewports", "render the 14 evaluation viewports");
  std::string vp_in, vp_out = "viewports";
  viewports->add_option("--input", vp_in, "ERP PNG")->required()->check(CLI::ExistingFile);
  viewports->add_option("--out", vp_out, "output directory");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "viewport metrics between two ERP images");
  std::string mt_ref, mt_test;
  metrics->add_option("--ref", mt_ref)->required()->check(CLI::ExistingFile);
  metrics->add_option("--test", mt_test)->required()->check(CLI::ExistingFile);

  // conv-demo
  auto* conv_demo = app.add_subcommand("conv-demo", "compare padded and per-sample pseudocylindrical convolution");
  int cd_height = 512, cd_width = 1024, cd_tile_height = 32, cd_radius = 1, cd_channels = 3, cd_repeats = 5;
  unsigned cd_seed = 1;
  std::string cd_kernel, cd_preset = "sinusoidal";
  conv_demo->add_option("--height", cd_height)->check(CLI::PositiveNumber);
  conv_demo->add_option("--width", cd_width)->check(CLI::PositiveNumber);
  conv_demo->add_option("--tile-height", cd_tile_height)->check(CLI::PositiveNumber);
  conv_demo->add_option("--radius", cd_radius)->check(CLI::NonNegativeNumber);
  conv_demo->add_option("--channels", cd_channels)->check(CLI::PositiveNumber);
  conv_demo->add_option("--repeats", cd_repeats)->check(CLI::PositiveNumber);
  conv_demo->add_option("--seed", cd_seed);
  conv_demo->add_option("--preset", cd_preset)->check(CLI::IsMember({"erp", "sinusoidal"}));
  conv_demo->add_option("--kernel", cd_kernel, "kernel file (binary or .json); overrides radius/channels")
      ->check(CLI::ExistingFile);

  // oversample-demo
  auto* oversample = app.add_subcommand("oversample-demo", "bytes of one patch placed at different latitudes");
  int os_height = 512, os_width = 1024, os_qp = 16;
  oversample->add_option("--height", os_height)->check(CLI::PositiveNumber);
  oversample->add_option("--width", os_width)->check(CLI::PositiveNumber);
  oversample->add_option("--qp", os_qp)->check(CLI::PositiveNumber);

  // pmf
  auto* pmf = app.add_subcommand("pmf", "print the discretized mixture-of-Gaussians pmf over quantization centers");
  std::vector<double> pm_centers{1, 2, 3, 4, 5, 6, 7, 8}, pm_weights{1.0}, pm_means{0.0}, pm_sigmas{1.0};
  pmf->add_option("--centers", pm_centers)->delimiter(',');
  pmf->add_option("--weights", pm_weights)->delimiter(',');
  pmf->add_option("--means", pm_means)->delimiter(',');
  pmf->add_option("--sigmas", pm_sigmas)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const unsigned nthreads = thread_count(threads);
  try {
    if (*convert) {
      if (cv_dir == "to-tiled") {
        const PlaneImage erp = read_png(cv_in);
        const PseudocylConfig cfg = config_from_flags(cv_config, cv_preset, cv_tile_height, erp.rows(), erp.cols());
        save_tiled(cv_out, erp_to_tiled(erp, cfg));
        std::cout << "wrote " << cfg.tile_count() << " tiles of height " << cfg.tile_height << " to " << cv_out << "\n";
      } else {
        const TiledImage tiled = load_tiled(cv_in);
        write_png_atomically(cv_out, tiled_to_erp(tiled));
        std::cout << "wrote " << tiled.config.height << "x" << tiled.config.width << " ERP image to " << cv_out << "\n";
      }
    } else if (*optimize) {
      const auto dataset = load_dataset(op_dataset);
      const SearchSpace space{dataset.front().image.rows(), dataset.front().image.cols(), op_tiles, op_levels};
      try {
        space.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      ConfigScorer scorer(dataset, space, op_codec.adapter());
      nlohmann::json log;
      std::vector<int> widths;
      if (op_exhaustive) {
        const ExhaustiveResult res = exhaustive_optimize(scorer, op_cap, nthreads);
        widths = res.widths;
        log["anchor"] = res.anchor;
        log["configs"] = nlohmann::json::array();
        for (const auto& s : res.scored) {
          log["configs"].push_back({{"widths", s.widths},
                                    {"curve", s.curve},
                                    {"bd_rate_vs_anchor", std::isfinite(s.bd_rate_vs_anchor)
                                                              ? nlohmann::json(s.bd_rate_vs_anchor)
                                                              : nlohmann::json("incomparable")}});
        }
      } else {
        try {
          const GreedyResult res = greedy_optimize(scorer, nthreads);
          widths = res.widths;
          log = res.log;
        } catch (const SearchAborted& e) {
          write_text_atomically(op_log, nlohmann::json(e.partial_log()).dump(2) + "\n");
          throw;
        }
      }
      log["widths"] = widths;
      log["evaluations"] = scorer.evaluations();
      const PseudocylConfig cfg = space.make_config(widths);
      save_config(op_out, cfg);
      write_text_atomically(op_log, log.dump(2) + "\n");
      std::cout << "widths:";
      for (int w : widths) std::cout << ' ' << w;
      std::cout << "\nconfigurations scored: " << scorer.evaluations() << "\n";
    } else if (*rd) {
      const auto dataset = load_dataset(rd_dataset);
      const auto& first = dataset.front().image;
      const PseudocylConfig cfg = config_from_flags(rd_config, rd_preset, rd_tile_height, first.rows(), first.cols());
      const RdCurve curve = rd_curve(dataset, cfg, rd_codec.adapter(), nthreads);
      save_rd_csv(rd_out, curve);
      write_rd_csv(std::cout, curve);
    } else if (*bd) {
      const DistortionKind kind = parse_distortion_kind(bd_kind);
      const BdResult res = bd_metrics(load_rd_csv(bd_anchor, kind), load_rd_csv(bd_test, kind));
      std::printf("BD-rate: %.2f%%\n", res.rate_percent);
      std::printf("BD-%s: %.6f\n", kind == DistortionKind::kVssim ? "VSSIM" : "VPSNR", res.distortion);
    } else if (*viewports) {
      const PlaneImage erp = read_png(vp_in);
      fs::create_directories(vp_out);
      const auto specs = canonical_viewports(erp.rows(), erp.cols());
      for (std::size_t k = 0; k < specs.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "viewport_%02zu.png", k);
        write_png_atomically(fs::path(vp_out) / name, extract_viewport(erp, specs[k]));
        std::printf("%s center (%.4f, %.4f)\n", name, specs[k].center.theta, specs[k].center.phi);
      }
    } else if (*metrics) {
      const ViewportScores s = viewport_scores(read_png(mt_ref), read_png(mt_test));
      std::printf("VMSE=%.8g VPSNR=%.4f VSSIM=%.6f\n", s.vmse, s.vpsnr, s.vssim);
    } else if (*conv_demo) {
      std::mt19937_64 rng(cd_seed);
      const ConvKernel kernel = cd_kernel.empty() ? ConvKernel::random(cd_radius, cd_channels, cd_channels, rng)
                                                  : load_kernel(cd_kernel);
      if (cd_height % cd_tile_height != 0) throw UsageError("--tile-height must divide --height");
      const PseudocylConfig cfg = cd_preset == "erp" ? PseudocylConfig::uniform(cd_height, cd_width, cd_tile_height)
                                                     : PseudocylConfig::sinusoidal(cd_height, cd_width, cd_tile_height);
      std::uniform_real_distribution<double> dist(0.0, 1.0);
      TiledImage input{cfg, {}};
      for (int w : cfg.widths) {
        PlaneImage tile(cfg.tile_height, w, kernel.in_channels);
        for (double& v : tile.samples()) v = dist(rng);
        input.tiles.push_back(std::move(tile));
      }
      const long long pixels = cfg.pixel_count();
      const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pixels) / 2.0)));
      PlaneImage plane(side, std::max(1, static_cast<int>(pixels / std::max(1, side))), kernel.in_channels);
      for (double& v : plane.samples()) v = dist(rng);

      TiledImage fast, reference;
      std::vector<double> t_fast, t_ref, t_std;
      for (int rep = 0; rep < cd_repeats; ++rep) {
        t_fast.push_back(seconds([&] { fast = pconv_fast(input, kernel); }));
        t_std.push_back(seconds([&] { (void)standard_conv(plane, kernel, Padding::kZero); }));
      }
      t_ref.push_back(seconds([&] { reference = pconv_reference(input, kernel, NeighborMode::kApprox); }));
      double diff = 0.0;
      for (std::size_t t = 0; t < fast.tiles.size(); ++t) diff = std::max(diff, max_abs_diff(fast.tiles[t], reference.tiles[t]));
      const OpCountReport ops = op_count_report(cfg, kernel.radius);
      long long pad_ops = 0;
      for (long long p : ops.padding_per_tile) pad_ops += p;
      std::printf("tiles: %d, samples: %lld, radius: %d, channels: %d -> %d\n", cfg.tile_count(), pixels, kernel.radius,
                  kernel.in_channels, kernel.out_channels);
      std::printf("max |fast - reference| = %.3e\n", diff);
      std::printf("%-28s %12s %16s\n", "method", "seconds", "ops (closed form)");
      std::printf("%-28s %12.4f %16lld\n", "per-sample reference", t_ref.front(), ops.reference_total);
      std::printf("%-28s %12.4f %16lld\n", "padded (fast)", median(t_fast), ops.fast_total);
      std::printf("%-28s %12.4f %16s\n", "standard zero-padded conv", median(t_std), "-");
      std::printf("padding ops: %lld\n", pad_ops);
    } else if (*oversample) {
      const CodecAdapter codec = CodecAdapter::builtin({os_qp});
      ViewportSpec spec;
      spec.height = (os_height + 2) / 3;
      spec.width = (os_width + 3) / 4;
      const PlaneImage patch = stripe_patch(spec.height, spec.width);
      std::printf("%-10s %12s\n", "latitude", "bytes");
      for (double theta : {-kPi / 3, 0.0, kPi / 3}) {
        spec.center = {theta, 0.0};
        const PlaneImage erp = embed_viewport(patch, spec, os_height, os_width, 0.5);
        const EncodeResult res = builtin_encode(quantize_8bit(erp), os_qp);
        std::printf("%+10.4f %12lld\n", theta, (res.bits + 7) / 8);
      }
    } else if (*pmf) {
      std::vector<double> variances;
      for (double s : pm_sigmas) variances.push_back(s * s);
      const MogParams mog{pm_weights, pm_means, variances};
      const auto p = mog_pmf(pm_centers, mog);
      std::printf("%-6s %12s %12s %10s\n", "index", "center", "pmf", "bits");
      for (std::size_t l = 0; l < p.size(); ++l) {
        std::printf("%-6zu %12.6g %12.6e %10.4f\n", l, pm_centers[l], p[l], code_length(p, static_cast<int>(l)));
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
