#include "loster/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace loster {

void AugmentConfig::validate() const {
  if (n_segments < 1) throw std::invalid_argument("AugmentConfig: n_segments must be >= 1");
  if (warp_knots < 2) throw std::invalid_argument("AugmentConfig: warp_knots must be >= 2");
  if (warp_sigma < 0.0) throw std::invalid_argument("AugmentConfig: warp_sigma must be >= 0");
}

std::vector<double> permute_segments(const std::vector<double>& x, std::size_t n_segments,
                                     Rng& rng) {
  const std::size_t len = x.size();
  if (n_segments < 1 || n_segments > len) {
    throw std::invalid_argument("permute_segments: n_segments must lie in [1, L]");
  }
  if (n_segments == 1) return x;

  std::vector<std::size_t> order(n_segments);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());

  std::vector<double> out;
  out.reserve(len);
  for (std::size_t s : order) {
    const std::size_t begin = s * len / n_segments;
    const std::size_t end = (s + 1) * len / n_segments;
    out.insert(out.end(), x.begin() + begin, x.begin() + end);
  }
  return out;
}

std::vector<double> time_warp(const std::vector<double>& x, std::size_t knots, double sigma,
                              Rng& rng) {
  const std::size_t len = x.size();
  if (knots < 2) throw std::invalid_argument("time_warp: need at least 2 knots");
  if (len < knots) {
    throw std::invalid_argument("time_warp: series length " + std::to_string(len) +
                                " shorter than warp_knots " + std::to_string(knots));
  }
  if (len == 1) return x;

  // Positive rate multipliers at evenly spaced knot positions.
  std::vector<double> knot_rate(knots);
  for (double& r : knot_rate) r = std::max(0.05, 1.0 + sigma * rng.normal());

  // Piecewise-linear rate per unit step, accumulated into a monotone warp.
  std::vector<double> warped(len, 0.0);
  double cum = 0.0;
  for (std::size_t t = 0; t + 1 < len; ++t) {
    const double pos = static_cast<double>(t) * static_cast<double>(knots - 1) /
                       static_cast<double>(len - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), knots - 2);
    const double frac = pos - static_cast<double>(lo);
    cum += knot_rate[lo] * (1.0 - frac) + knot_rate[lo + 1] * frac;
    warped[t + 1] = cum;
  }
  const double span = static_cast<double>(len - 1) / warped.back();

  std::vector<double> out(len);
  out[0] = x[0];
  out[len - 1] = x[len - 1];  // endpoint-pinned
  for (std::size_t t = 1; t + 1 < len; ++t) {
    const double pos = warped[t] * span;
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), len - 2);
    const double frac = pos - static_cast<double>(lo);
    out[t] = x[lo] * (1.0 - frac) + x[lo + 1] * frac;
  }
  return out;
}

std::vector<double> augment(const std::vector<double>& x, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<double> out = x;
  if (cfg.rotation && rng.uniform() < 0.5) {
    for (double& v : out) v = -v;
  }
  if (cfg.permutation) {
    out = permute_segments(out, cfg.n_segments, rng);
  }
  if (cfg.timewarp) {
    out = time_warp(out, cfg.warp_knots, cfg.warp_sigma, rng);
  }
  return out;
}

DenseMatrix augment_dataset(const DenseMatrix& series, const AugmentConfig& cfg,
                            std::uint64_t master_seed) {
  const Rng base(master_seed);
  DenseMatrix out(series.rows(), series.cols());
  for (std::size_t i = 0; i < series.rows(); ++i) {
    std::vector<double> x(series.row(i), series.row(i) + series.cols());
    Rng stream = base.derive(i);
    const std::vector<double> xa = augment(x, cfg, stream);
    std::copy(xa.begin(), xa.end(), out.row(i));
  }
  return out;
}

}  // namespace loster
