#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pseudocyl/codec.hpp"
#include "pseudocyl/metrics.hpp"
#include "pseudocyl/parallel.hpp"
#include "pseudocyl/representation.hpp"

namespace pseudocyl {

/// Symmetric, pole-to-T_half monotone width configurations over L quantized
/// widths (l + 1) * floor(W / L).
struct SearchSpace {
  int height = 0;
  int width = 0;
  int tiles = 1;
  int levels = 1;

  int tile_height() const { return height / tiles; }
  int half_index() const { return half_tile_index(tiles); }

  std::vector<int> quantized_widths() const {
    std::vector<int> w;
    for (int l = 0; l < levels; ++l) w.push_back((l + 1) * (width / levels));
    return w;
  }
  int max_width() const { return levels * (width / levels); }

  void validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("search space: image size must be positive");
    if (tiles < 1 || height % tiles != 0) {
      throw std::invalid_argument("search space: tile count " + std::to_string(tiles) + " must divide height " +
                                  std::to_string(height));
    }
    if (levels < 1 || width / levels < 1) {
      throw std::invalid_argument("search space: need 1 <= levels <= width, got " + std::to_string(levels));
    }
  }

  PseudocylConfig make_config(std::vector<int> widths) const {
    PseudocylConfig cfg{height, width, tile_height(), std::move(widths)};
    cfg.validate();
    return cfg;
  }

  /// True when `widths` is symmetric, monotone up to T_half, quantized, and keeps
  /// the unoptimized middle tiles at the largest level.
  bool contains(const std::vector<int>& widths) const {
    if (static_cast<int>(widths.size()) != tiles) return false;
    const auto levels_w = quantized_widths();
    const PseudocylConfig cfg{height, width, tile_height(), widths};
    if (!cfg.is_symmetric() || !cfg.is_monotone()) return false;
    for (int t = 0; t < tiles; ++t) {
      const int w = widths[static_cast<std::size_t>(t)];
      if (std::find(levels_w.begin(), levels_w.end(), w) == levels_w.end()) return false;
      const bool optimized = t <= half_index() || t >= tiles - 1 - half_index();
      if (!optimized && w != max_width()) return false;
    }
    return true;
  }
};

/// Scores width configurations on a dataset, caching curves by configuration.
class ConfigScorer {
 public:
  ConfigScorer(std::span<const DatasetImage> dataset, const SearchSpace& space, CodecAdapter codec)
      : dataset_(dataset), space_(space), codec_(std::move(codec)) {
    space_.validate();
    codec_.validate();
    if (dataset_.empty()) throw std::invalid_argument("optimizer: dataset is empty");
    for (const auto& item : dataset_) {
      if (item.image.rows() != space_.height || item.image.cols() != space_.width) {
        throw std::invalid_argument("optimizer: image '" + item.name + "' does not match the search space size");
      }
    }
  }

  RdCurve score(const std::vector<int>& widths) {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(widths); it != cache_.end()) return it->second;
    }
    RdCurve curve = rd_curve(dataset_, space_.make_config(widths), codec_);
    std::lock_guard lock(mu_);
    ++evaluations_;
    return cache_.emplace(widths, std::move(curve)).first->second;
  }

  int evaluations() const { return evaluations_; }
  const SearchSpace& space() const { return space_; }

 private:
  std::span<const DatasetImage> dataset_;
  SearchSpace space_;
  CodecAdapter codec_;
  std::mutex mu_;
  std::map<std::vector<int>, RdCurve> cache_;
  int evaluations_ = 0;
};

/// BD-rate of `test` against `anchor`, or +infinity when the curves cannot be
/// compared (no overlapping quality range).
inline double bd_rate_or_inf(const RdCurve& anchor, const RdCurve& test) {
  try {
    return bd_metrics(anchor, test).rate_percent;
  } catch (const MetricError&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct SearchStep {
  int tile = 0;
  int width = 0;
  RdCurve curve;
  std::optional<double> bd_rate_vs_incumbent;  // empty for the first candidate of a step
  bool accepted = false;
};

struct SearchLog {
  RdCurve anchor;  // all tiles at the largest quantized width
  std::vector<SearchStep> steps;
};

inline void to_json(nlohmann::json& j, const RdCurve& c) {
  j = nlohmann::json::array();
  for (const auto& p : c.points) j.push_back({{"qp", p.qp}, {"bpp", p.bpp}, {"distortion", p.distortion}});
}

inline void to_json(nlohmann::json& j, const SearchLog& log) {
  j = nlohmann::json{{"anchor", log.anchor}, {"steps", nlohmann::json::array()}};
  for (const auto& s : log.steps) {
    nlohmann::json step{{"tile", s.tile}, {"width", s.width}, {"accepted", s.accepted}, {"curve", s.curve}};
    if (s.bd_rate_vs_incumbent) {
      const double bd = *s.bd_rate_vs_incumbent;
      step["bd_rate_vs_incumbent"] = std::isfinite(bd) ? nlohmann::json(bd) : nlohmann::json("incomparable");
    } else {
      step["bd_rate_vs_incumbent"] = nullptr;
    }
    j["steps"].push_back(std::move(step));
  }
}

/// Thrown when scoring fails mid-search; carries the log up to the failure.
class SearchAborted : public CodecError {
 public:
  SearchAborted(const std::string& what, SearchLog partial) : CodecError(what), partial_(std::move(partial)) {}
  const SearchLog& partial_log() const { return partial_; }

 private:
  SearchLog partial_;
};

struct GreedyResult {
  std::vector<int> widths;
  SearchLog log;
};

/// Greedy pole-to-equator search. All tiles start at the largest quantized width;
/// for t = 0..T_half the candidates run from the previous tile's choice (the
/// smallest level for t = 0) up to the largest, with the mirror tile tied to tile
/// t. Within a step the first candidate becomes the incumbent and a later one
/// replaces it only with a strictly negative BD-rate against it, so ties keep the
/// smaller width.
inline GreedyResult greedy_optimize(ConfigScorer& scorer, unsigned threads = 1) {
  const SearchSpace& space = scorer.space();
  const auto levels = space.quantized_widths();
  GreedyResult res;
  res.widths.assign(static_cast<std::size_t>(space.tiles), space.max_width());
  try {
    res.log.anchor = scorer.score(res.widths);
  } catch (const std::exception& e) {
    throw SearchAborted(e.what(), res.log);
  }
  if (space.levels == 1) return res;

  for (int t = 0; t <= space.half_index(); ++t) {
    const int start = t == 0 ? levels.front() : res.widths[static_cast<std::size_t>(t - 1)];
    std::vector<int> candidates;
    for (int w : levels) {
      if (w >= start) candidates.push_back(w);
    }
    std::vector<RdCurve> curves(candidates.size());
    try {
      parallel_for(candidates.size(), threads, [&](std::size_t k) {
        std::vector<int> widths = res.widths;
        widths[static_cast<std::size_t>(t)] = candidates[k];
        widths[static_cast<std::size_t>(space.tiles - 1 - t)] = candidates[k];
        curves[k] = scorer.score(widths);
      });
    } catch (const std::exception& e) {
      throw SearchAborted(std::string("greedy search, tile ") + std::to_string(t) + ": " + e.what(), res.log);
    }

    std::size_t best = 0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      SearchStep step{t, candidates[k], curves[k], std::nullopt, k == 0};
      if (k > 0) {
        const double bd = bd_rate_or_inf(curves[best], curves[k]);
        step.bd_rate_vs_incumbent = bd;
        if (bd < 0.0) {
          best = k;
          step.accepted = true;
        }
      }
      res.log.steps.push_back(std::move(step));
    }
    res.widths[static_cast<std::size_t>(t)] = candidates[best];
    res.widths[static_cast<std::size_t>(space.tiles - 1 - t)] = candidates[best];
  }
  return res;
}

inline GreedyResult greedy_optimize(std::span<const DatasetImage> dataset, const SearchSpace& space,
                                    const CodecAdapter& codec, unsigned threads = 1) {
  ConfigScorer scorer(dataset, space, codec);
  return greedy_optimize(scorer, threads);
}

struct ScoredConfig {
  std::vector<int> widths;
  RdCurve curve;
  double bd_rate_vs_anchor = 0.0;
};

struct ExhaustiveResult {
  std::vector<int> widths;
  RdCurve anchor;
  std::vector<ScoredConfig> scored;
};

inline constexpr long long kDefaultExhaustiveCap = 10000;

/// Number of legal configurations: nondecreasing sequences of length T_half + 1
/// over L levels, i.e. C(L + T_half, T_half + 1).
inline long long legal_config_count(const SearchSpace& space) {
  const int n = space.half_index() + 1;
  if (n <= 0) return 1;
  long long c = 1;
  for (int k = 1; k <= n; ++k) c = c * (space.levels - 1 + k) / k;
  return c;
}

/// Scores every legal configuration and returns the one with the lowest BD-rate
/// against the all-largest-width anchor (ties: first in lexicographic order).
inline ExhaustiveResult exhaustive_optimize(ConfigScorer& scorer, long long cap = kDefaultExhaustiveCap,
                                            unsigned threads = 1) {
  const SearchSpace& space = scorer.space();
  const long long count = legal_config_count(space);
  if (count > cap) {
    throw std::length_error("exhaustive search: " + std::to_string(count) + " configurations exceed the cap of " +
                            std::to_string(cap));
  }
  const auto levels = space.quantized_widths();
  const int n = space.half_index() + 1;
  std::vector<std::vector<int>> configs;
  if (n <= 0) {
    configs.emplace_back(static_cast<std::size_t>(space.tiles), space.max_width());
  } else {
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      std::vector<int> widths(static_cast<std::size_t>(space.tiles), space.max_width());
      for (int t = 0; t < n; ++t) {
        widths[static_cast<std::size_t>(t)] = levels[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])];
        widths[static_cast<std::size_t>(space.tiles - 1 - t)] = widths[static_cast<std::size_t>(t)];
      }
      configs.push_back(std::move(widths));
      int pos = n - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == space.levels - 1) --pos;
      if (pos < 0) break;
      const int v = idx[static_cast<std::size_t>(pos)] + 1;
      for (int k = pos; k < n; ++k) idx[static_cast<std::size_t>(k)] = v;
    }
  }

  ExhaustiveResult res;
  res.anchor = scorer.score(std::vector<int>(static_cast<std::size_t>(space.tiles), space.max_width()));
  res.scored.resize(configs.size());
  parallel_for(configs.size(), threads, [&](std::size_t k) {
    res.scored[k].widths = configs[k];
    res.scored[k].curve = scorer.score(configs[k]);
  });
  std::size_t best = 0;
  for (std::size_t k = 0; k < res.scored.size(); ++k) {
    res.scored[k].bd_rate_vs_anchor = bd_rate_or_inf(res.anchor, res.scored[k].curve);
    if (res.scored[k].bd_rate_vs_anchor < res.scored[best].bd_rate_vs_anchor) best = k;
  }
  res.widths = res.scored[best].widths;
  return res;
}

inline ExhaustiveResult exhaustive_optimize(std::span<const DatasetImage> dataset, const SearchSpace& space,
                                            const CodecAdapter& codec, long long cap = kDefaultExhaustiveCap,
                                            unsigned threads = 1) {
  ConfigScorer scorer(dataset, space, codec);
  return exhaustive_optimize(scorer, cap, threads);
}

}  // namespace pseudocyl
