#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace loster {

// Deterministic random source. Every stochastic component of a run draws from
// an Rng derived from one master seed, so runs are reproducible bit for bit
// in single-threaded execution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  // Gumbel(0,1) sample: -log(-log(u)) with u strictly inside (0,1).
  double gumbel() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(-std::log(u));
  }

  // Uniform index in [0, bound).
  std::size_t index(std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(engine_);
  }

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  // Independent stream for sub-task `stream` (e.g. per-series augmentation).
  // Depends only on the construction seed, not on how far this Rng advanced.
  Rng derive(std::uint64_t stream) const {
    std::uint64_t x = seed_ ^ (stream + 0x9e3779b97f4a7c15ULL);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return Rng(x);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace loster
