#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "loster/augment.hpp"

using namespace loster;

TEST_CASE("disabled configuration is the identity") {
  AugmentConfig cfg;
  cfg.rotation = false;
  cfg.permutation = false;
  cfg.timewarp = false;
  Rng rng(1);
  const std::vector<double> x{1.0, -2.0, 3.0, 0.5};
  CHECK(augment(x, cfg, rng) == x);
}

TEST_CASE("augment keeps the length and stays finite") {
  AugmentConfig cfg;
  Rng rng(2);
  std::vector<double> x(37);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(0.3 * static_cast<double>(t));
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<double> xa = augment(x, cfg, rng);
    CHECK(xa.size() == x.size());
    for (double v : xa) CHECK(std::isfinite(v));
  }
}

TEST_CASE("fixed seed gives identical augmentations") {
  AugmentConfig cfg;
  std::vector<double> x(24);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = 0.1 * static_cast<double>(t * t % 7);
  Rng a(77), b(77);
  CHECK(augment(x, cfg, a) == augment(x, cfg, b));
}

TEST_CASE("permute_segments stated cases") {
  SUBCASE("one segment is the identity") {
    Rng rng(3);
    const std::vector<double> x{4.0, 3.0, 2.0, 1.0};
    CHECK(permute_segments(x, 1, rng) == x);
  }
  SUBCASE("values are preserved as a multiset") {
    Rng rng(4);
    std::vector<double> x(23);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = static_cast<double>(t);
    for (std::size_t segs = 2; segs <= 7; ++segs) {
      std::vector<double> out = permute_segments(x, segs, rng);
      std::sort(out.begin(), out.end());
      CHECK(out == x);
    }
  }
  SUBCASE("a swapping stream exchanges the two halves") {
    // find a seed whose first shuffle of {0,1} swaps the order
    std::uint64_t seed = 0;
    for (; seed < 100; ++seed) {
      Rng probe(seed);
      std::vector<int> order{0, 1};
      probe.shuffle(order.begin(), order.end());
      if (order[0] == 1) break;
    }
    REQUIRE(seed < 100);
    Rng rng(seed);
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> expected{3.0, 4.0, 1.0, 2.0};
    CHECK(permute_segments(x, 2, rng) == expected);
  }
  SUBCASE("more segments than samples is rejected") {
    Rng rng(5);
    CHECK_THROWS_AS(permute_segments({1.0, 2.0}, 3, rng), std::invalid_argument);
  }
}

TEST_CASE("time_warp pins the endpoints") {
  Rng rng(6);
  std::vector<double> x(31);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::cos(0.4 * static_cast<double>(t)) + 0.01 * static_cast<double>(t);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> out = time_warp(x, 4, 0.3, rng);
    CHECK(out.size() == x.size());
    CHECK(out.front() == x.front());
    CHECK(out.back() == x.back());
    for (double v : out) CHECK(std::isfinite(v));
  }
}

TEST_CASE("time_warp rejects series shorter than the knot count") {
  Rng rng(7);
  CHECK_THROWS_AS(time_warp({1.0, 2.0, 3.0}, 4, 0.2, rng), std::invalid_argument);
  AugmentConfig cfg;
  cfg.permutation = false;
  cfg.rotation = false;
  cfg.warp_knots = 8;
  CHECK_THROWS_AS(augment({1.0, 2.0, 3.0}, cfg, rng), std::invalid_argument);
}

TEST_CASE("augment_dataset derives one stream per series") {
  AugmentConfig cfg;
  DenseMatrix series(3, 16);
  Rng rng(8);
  for (std::size_t i = 0; i < series.size(); ++i) series.data()[i] = rng.normal();
  const DenseMatrix a = augment_dataset(series, cfg, 42);
  const DenseMatrix b = augment_dataset(series, cfg, 42);
  CHECK(a == b);
  const DenseMatrix c = augment_dataset(series, cfg, 43);
  CHECK_FALSE(a == c);
}

TEST_CASE("config invariants are enforced") {
  AugmentConfig cfg;
  cfg.n_segments = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = AugmentConfig{};
  cfg.warp_knots = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = AugmentConfig{};
  cfg.warp_sigma = -0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
