#include "loster/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace loster {

namespace {

std::vector<int> dense_ids(const std::vector<int>& labels) {
  std::unordered_map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = ids.try_emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

ContingencyTable contingency(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("contingency: label vectors differ in length");
  }
  const std::vector<int> g = dense_ids(truth);
  const std::vector<int> a = dense_ids(pred);
  int gk = 0, ak = 0;
  for (int v : g) gk = std::max(gk, v + 1);
  for (int v : a) ak = std::max(ak, v + 1);

  ContingencyTable table;
  table.counts.assign(gk, std::vector<std::int64_t>(ak, 0));
  table.truth_sizes.assign(gk, 0);
  table.pred_sizes.assign(ak, 0);
  table.total = static_cast<std::int64_t>(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    ++table.counts[g[i]][a[i]];
    ++table.truth_sizes[g[i]];
    ++table.pred_sizes[a[i]];
  }
  return table;
}

double rand_index(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("rand_index: label vectors differ in length");
  }
  if (truth.size() < 2) {
    throw std::invalid_argument("rand_index: need at least two samples");
  }
  const ContingencyTable table = contingency(truth, pred);
  auto pairs2 = [](std::int64_t v) { return 0.5 * static_cast<double>(v) * static_cast<double>(v - 1); };

  double same_both = 0.0;  // pairs co-clustered in both partitions
  for (const auto& row : table.counts) {
    for (std::int64_t v : row) same_both += pairs2(v);
  }
  double same_truth = 0.0, same_pred = 0.0;
  for (std::int64_t v : table.truth_sizes) same_truth += pairs2(v);
  for (std::int64_t v : table.pred_sizes) same_pred += pairs2(v);

  const double all_pairs = pairs2(table.total);
  // pairs separated in both = all - (same in truth) - (same in pred) + (same in both)
  const double diff_both = all_pairs - same_truth - same_pred + same_both;
  return (same_both + diff_both) / all_pairs;
}

double nmi(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("nmi: label vectors differ in length");
  }
  if (truth.empty()) {
    throw std::invalid_argument("nmi: empty label vectors");
  }
  const ContingencyTable table = contingency(truth, pred);
  const double n = static_cast<double>(table.total);

  double mutual = 0.0;
  for (std::size_t i = 0; i < table.counts.size(); ++i) {
    for (std::size_t j = 0; j < table.counts[i].size(); ++j) {
      const std::int64_t nij = table.counts[i][j];
      if (nij == 0) continue;  // 0 log 0 = 0
      const double gi = static_cast<double>(table.truth_sizes[i]);
      const double aj = static_cast<double>(table.pred_sizes[j]);
      mutual += (static_cast<double>(nij) / n) * std::log(n * static_cast<double>(nij) / (gi * aj));
    }
  }
  auto entropy = [n](const std::vector<std::int64_t>& sizes) {
    double h = 0.0;
    for (std::int64_t s : sizes) {
      if (s == 0) continue;
      const double p = static_cast<double>(s) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  const double ht = entropy(table.truth_sizes);
  const double hp = entropy(table.pred_sizes);
  if (ht <= 0.0 || hp <= 0.0) return 0.0;  // degenerate single-cluster partition
  const double value = mutual / std::sqrt(ht * hp);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace loster
