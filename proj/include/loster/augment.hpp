#pragma once

#include <cstdint>
#include <vector>

#include "loster/matrix.hpp"
#include "loster/rng.hpp"

namespace loster {

// Composition of rotation, segment permutation and time-warping used to build
// the second view. For univariate series the rotation component specializes
// to a global sign flip with probability 1/2.
struct AugmentConfig {
  bool rotation = true;
  bool permutation = true;
  std::size_t n_segments = 4;
  bool timewarp = true;
  std::size_t warp_knots = 4;
  double warp_sigma = 0.2;

  void validate() const;
};

// Applies the enabled transforms in fixed order: rotation, permutation,
// time-warping. Output length equals input length.
std::vector<double> augment(const std::vector<double>& x, const AugmentConfig& cfg, Rng& rng);

// Splits x into n_segments contiguous segments with boundaries at
// floor(i*L/n_segments), shuffles the segment order uniformly, concatenates.
std::vector<double> permute_segments(const std::vector<double>& x, std::size_t n_segments, Rng& rng);

// Smooth monotone distortion of the time axis: per-step rates interpolated
// from `knots` control values (1 + sigma * normal, clamped positive) are
// accumulated, rescaled to span [0, L-1] and the series is linearly resampled.
// Endpoint-pinned: out[0] == x[0] and out[L-1] == x[L-1].
std::vector<double> time_warp(const std::vector<double>& x, std::size_t knots, double sigma, Rng& rng);

// Augments every row of `series` once, with an independent per-row stream
// derived from (master_seed, row). The result is computed in advance; the
// trainer never re-augments.
DenseMatrix augment_dataset(const DenseMatrix& series, const AugmentConfig& cfg,
                            std::uint64_t master_seed);

}  // namespace loster
