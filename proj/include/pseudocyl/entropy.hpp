#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pseudocyl {

/// Per-channel quantizer parameters: center l of channel k is sum_{l' <= l} exp(omega[k][l']).
struct QuantizerParams {
  int channels = 1;
  int levels = 1;
  std::vector<double> omega;  // channels x levels, row-major

  double log_step(int k, int l) const { return omega[static_cast<std::size_t>(k) * levels + l]; }
};

/// Quantization centers, channels x levels row-major. Strictly increasing within a
/// channel because every step is exp(.) > 0.
inline std::vector<double> quant_centers(const QuantizerParams& params) {
  if (params.channels < 1 || params.levels < 1 ||
      params.omega.size() != static_cast<std::size_t>(params.channels) * params.levels) {
    throw std::invalid_argument("quant_centers: omega must hold channels x levels values");
  }
  std::vector<double> centers(params.omega.size());
  for (int k = 0; k < params.channels; ++k) {
    double acc = 0.0;
    for (int l = 0; l < params.levels; ++l) {
      const double w = params.log_step(k, l);
      if (!std::isfinite(w)) throw std::invalid_argument("quant_centers: non-finite omega");
      acc += std::exp(w);
      centers[static_cast<std::size_t>(k) * params.levels + l] = acc;
    }
  }
  return centers;
}

struct QuantizedValue {
  int index = 0;
  double value = 0.0;
};

/// Nearest center; an exact midpoint goes to the lower index.
inline QuantizedValue quantize(double code, std::span<const double> centers) {
  if (centers.empty()) throw std::invalid_argument("quantize: no centers");
  const auto it = std::lower_bound(centers.begin(), centers.end(), code);
  if (it == centers.begin()) return {0, centers.front()};
  if (it == centers.end()) return {static_cast<int>(centers.size()) - 1, centers.back()};
  const int hi = static_cast<int>(it - centers.begin());
  const int lo = hi - 1;
  const double d_lo = code - centers[static_cast<std::size_t>(lo)];
  const double d_hi = centers[static_cast<std::size_t>(hi)] - code;
  return d_hi < d_lo ? QuantizedValue{hi, centers[static_cast<std::size_t>(hi)]}
                     : QuantizedValue{lo, centers[static_cast<std::size_t>(lo)]};
}

/// Gaussian mixture describing one code's continuous density.
struct MogParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  void validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
      throw std::invalid_argument("mixture: weights, means and variances must have equal nonzero length");
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
      if (!(weights[m] >= 0.0) || !std::isfinite(weights[m])) throw std::invalid_argument("mixture: negative weight");
      if (!(variances[m] >= 0.0) || !std::isfinite(variances[m])) throw std::invalid_argument("mixture: negative variance");
      if (!std::isfinite(means[m])) throw std::invalid_argument("mixture: non-finite mean");
      sum += weights[m];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("mixture: weights sum to " + std::to_string(sum));
  }
};

/// Standard normal CDF, 0.5 erfc(-x / sqrt 2).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Probability of each quantization bin under the mixture. Bin l spans the
/// midpoints to its neighbors; the outer bins extend to -inf and +inf. A
/// zero-variance component is a point mass on the bin its mean quantizes to.
inline std::vector<double> mog_pmf(std::span<const double> centers, const MogParams& mog) {
  mog.validate();
  if (centers.empty()) throw std::invalid_argument("mog_pmf: no centers");
  for (std::size_t l = 1; l < centers.size(); ++l) {
    if (!(centers[l] > centers[l - 1])) throw std::invalid_argument("mog_pmf: centers must be strictly increasing");
  }
  const std::size_t n = centers.size();
  std::vector<double> pmf(n, 0.0);
  for (std::size_t m = 0; m < mog.weights.size(); ++m) {
    const double pi = mog.weights[m];
    if (pi == 0.0) continue;
    const double sigma = std::sqrt(mog.variances[m]);
    if (sigma == 0.0) {
      pmf[static_cast<std::size_t>(quantize(mog.means[m], centers).index)] += pi;
      continue;
    }
    double lower_cdf = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      const double upper_cdf =
          l + 1 == n ? 1.0 : normal_cdf((0.5 * (centers[l] + centers[l + 1]) - mog.means[m]) / sigma);
      pmf[l] += pi * (upper_cdf - lower_cdf);
      lower_cdf = upper_cdf;
    }
  }
  return pmf;
}

/// -log2 pmf[index]; +infinity when the symbol has zero probability.
inline double code_length(std::span<const double> pmf, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= pmf.size()) {
    throw std::out_of_range("code_length: index outside pmf");
  }
  const double p = pmf[static_cast<std::size_t>(index)];
  if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log2(p);
}

}  // namespace pseudocyl
