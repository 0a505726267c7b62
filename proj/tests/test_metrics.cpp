#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "loster/metrics.hpp"
#include "loster/rng.hpp"
#include "oracles.hpp"

using namespace loster;

namespace {

std::vector<int> random_labels(std::size_t n, int k, Rng& rng) {
  std::vector<int> out(n);
  for (int& v : out) v = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
  return out;
}

// Renumbers labels by first appearance, matching the table's row/column order.
std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, _] = ids.try_emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

TEST_CASE("rand_index stated cases") {
  CHECK(rand_index({0, 1, 2, 0}, {0, 1, 2, 0}) == doctest::Approx(1.0));
  // relabeling permutation leaves it at 1
  CHECK(rand_index({0, 0, 1, 2}, {5, 5, 9, 7}) == doctest::Approx(1.0));
  // pair enumeration: TP=0, TN=1 of 3 pairs
  CHECK(rand_index({0, 0, 1}, {0, 1, 1}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(rand_index({0}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(rand_index({0, 1}, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("nmi stated cases") {
  CHECK(nmi({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(nmi({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));  // relabeled
  CHECK(nmi({0, 0, 1, 1}, {0, 0, 0, 0}) == doctest::Approx(0.0));  // degenerate entropy
  CHECK(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0));  // independent partitions
  CHECK_THROWS_AS(nmi({0, 1}, {0, 1, 0}), std::invalid_argument);
}

TEST_CASE("contingency stated cases") {
  SUBCASE("diagonal table") {
    const ContingencyTable table = contingency({0, 1}, {0, 1});
    REQUIRE(table.counts.size() == 2);
    CHECK(table.counts[0][0] == 1);
    CHECK(table.counts[0][1] == 0);
    CHECK(table.counts[1][0] == 0);
    CHECK(table.counts[1][1] == 1);
  }
  SUBCASE("marginals equal label histograms") {
    const std::vector<int> g{0, 0, 1, 2, 2, 2};
    const std::vector<int> a{1, 1, 0, 0, 1, 1};  // first appearance: 1 -> 0, 0 -> 1
    const ContingencyTable table = contingency(g, a);
    CHECK(table.truth_sizes == std::vector<std::int64_t>{2, 1, 3});
    CHECK(table.pred_sizes == std::vector<std::int64_t>{4, 2});
    CHECK(table.total == 6);
  }
  SUBCASE("random table matches a double-loop count") {
    Rng rng(7);
    const std::vector<int> g = canonical(random_labels(50, 4, rng));
    const std::vector<int> a = canonical(random_labels(50, 3, rng));
    const ContingencyTable table = contingency(g, a);
    const auto naive = oracle::contingency(g, a);
    std::int64_t checked = 0;
    for (const auto& [key, count] : naive) {
      CHECK(table.counts[key.first][key.second] == count);
      checked += count;
    }
    CHECK(checked == 50);
  }
}

TEST_CASE("metrics are symmetric and relabeling-invariant") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.index(40);
    const std::vector<int> g = random_labels(n, 4, rng);
    const std::vector<int> a = random_labels(n, 3, rng);
    CHECK(rand_index(g, a) == doctest::Approx(rand_index(a, g)).epsilon(1e-12));
    CHECK(nmi(g, a) == doctest::Approx(nmi(a, g)).epsilon(1e-12));

    std::vector<int> relabeled(a.size());
    const int mapping[3] = {7, 2, 11};
    for (std::size_t i = 0; i < a.size(); ++i) relabeled[i] = mapping[a[i]];
    CHECK(rand_index(g, relabeled) == doctest::Approx(rand_index(g, a)).epsilon(1e-12));
    CHECK(nmi(g, relabeled) == doctest::Approx(nmi(g, a)).epsilon(1e-12));
  }
}

TEST_CASE("metrics match the brute-force oracles on random pairs") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(49);
    const int kg = 1 + static_cast<int>(rng.index(6));
    const int ka = 1 + static_cast<int>(rng.index(6));
    const std::vector<int> g = random_labels(n, kg, rng);
    const std::vector<int> a = random_labels(n, ka, rng);
    CHECK(rand_index(g, a) == doctest::Approx(oracle::rand_index(g, a)).epsilon(1e-10));
    CHECK(nmi(g, a) == doctest::Approx(oracle::nmi(g, a)).epsilon(1e-10));
  }
}
