#pragma once

#include <cstdint>
#include <vector>

namespace loster {

// Joint counts between a ground-truth partition G and a predicted partition A.
struct ContingencyTable {
  std::vector<std::vector<std::int64_t>> counts;  // counts[i][j] = |G_i ∩ A_j|
  std::vector<std::int64_t> truth_sizes;          // |G_i|
  std::vector<std::int64_t> pred_sizes;           // |A_j|
  std::int64_t total = 0;
};

ContingencyTable contingency(const std::vector<int>& truth, const std::vector<int>& pred);

// Fraction of sample pairs on which the two partitions agree. n >= 2.
double rand_index(const std::vector<int>& truth, const std::vector<int>& pred);

// Mutual information normalized by the geometric mean of the entropies,
// with 0 log 0 = 0. Returns 0 when either partition has zero entropy.
double nmi(const std::vector<int>& truth, const std::vector<int>& pred);

}  // namespace loster
