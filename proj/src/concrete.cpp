#include "loster/concrete.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace loster {

namespace {

void require_row_stochastic(const DenseMatrix& q, const char* op) {
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double* row = q.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < q.cols(); ++j) s += row[j];
    if (std::abs(s - 1.0) > 1e-9) {
      throw std::invalid_argument(std::string(op) + ": row " + std::to_string(i) +
                                  " sums to " + std::to_string(s));
    }
  }
}

double sq_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

}  // namespace

void ClusterConfig::validate() const {
  if (k < 1) throw std::invalid_argument("ClusterConfig: k must be >= 1");
  if (sigma <= 0.0) throw std::invalid_argument("ClusterConfig: sigma must be positive");
  if (tau <= 0.0) throw std::invalid_argument("ClusterConfig: tau must be positive");
  if (tau_floor <= 0.0) throw std::invalid_argument("ClusterConfig: tau_floor must be positive");
}

AssignmentMatrix AssignmentMatrix::soft(DenseMatrix q) {
  require_row_stochastic(q, "AssignmentMatrix::soft");
  return AssignmentMatrix{std::move(q), AssignKind::kSoft};
}

AssignmentMatrix AssignmentMatrix::hard(DenseMatrix q) {
  require_row_stochastic(q, "AssignmentMatrix::hard");
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double* row = q.row(i);
    for (std::size_t j = 0; j < q.cols(); ++j) {
      if (row[j] != 0.0 && row[j] != 1.0) {
        throw std::invalid_argument("AssignmentMatrix::hard: row " + std::to_string(i) +
                                    " is not one-hot");
      }
    }
  }
  return AssignmentMatrix{std::move(q), AssignKind::kHard};
}

Var assignment_probs(Tape& t, Var z, Var centroids, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("assignment_probs: sigma must be positive");
  Var dist = pairwise_sqdist(t, z, centroids);
  return softmax_rows(t, scale(t, dist, -1.0 / (sigma * sigma)));
}

DenseMatrix sample_gumbel(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix g(rows, cols);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.gumbel();
  return g;
}

Var gumbel_softmax(Tape& t, Var probs, double tau, const DenseMatrix& noise) {
  if (tau <= 0.0) throw std::invalid_argument("gumbel_softmax: tau must be positive");
  Var logits = add_noise(t, log_clamped(t, probs, 1e-12), noise);
  return softmax_rows(t, scale(t, logits, 1.0 / tau));
}

Var gumbel_softmax_sample(Tape& t, Var probs, double tau, Rng& rng) {
  const DenseMatrix& p = t.value(probs);
  return gumbel_softmax(t, probs, tau, sample_gumbel(p.rows(), p.cols(), rng));
}

Var straight_through(Tape& t, Var q) {
  require_row_stochastic(t.value(q), "straight_through");
  return straight_through_rows(t, q);
}

Var kmeans_loss(Tape& t, Var z, Var q, Var centroids) {
  const DenseMatrix& vz = t.value(z);
  const DenseMatrix& vq = t.value(q);
  const DenseMatrix& vm = t.value(centroids);
  if (vq.rows() != vz.rows() || vq.cols() != vm.rows() || vm.cols() != vz.cols()) {
    throw ShapeError("kmeans_loss: z " + shape_string(vz) + ", q " + shape_string(vq) +
                     ", centroids " + shape_string(vm));
  }
  require_row_stochastic(vq, "kmeans_loss");
  Var assigned = matmul(t, q, centroids);
  return scale(t, frobenius_sq(t, sub(t, z, assigned)), 1.0 / static_cast<double>(vz.rows()));
}

DenseMatrix kmeanspp_init(const DenseMatrix& z, std::size_t k, Rng& rng, int lloyd_iterations) {
  const std::size_t n = z.rows(), d = z.cols();
  if (k < 1) throw std::invalid_argument("kmeanspp_init: k must be >= 1");
  if (k > n) {
    throw std::invalid_argument("kmeanspp_init: k=" + std::to_string(k) + " exceeds n=" +
                                std::to_string(n));
  }

  DenseMatrix centroids(k, d);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());

  // first centroid uniform, each next sampled proportionally to the squared
  // distance to the nearest chosen centroid
  std::size_t chosen = rng.index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : min_dist) total += v;
      if (total > 0.0) {
        double ticket = rng.uniform() * total;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (min_dist[i] <= 0.0) continue;
          pick = i;
          ticket -= min_dist[i];
          if (ticket <= 0.0) break;
        }
        chosen = pick;
      } else {
        chosen = rng.index(n);  // all residual mass zero (duplicate points)
      }
    }
    std::copy(z.row(chosen), z.row(chosen) + d, centroids.row(c));
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], sq_distance(z.row(i), centroids.row(c), d));
    }
  }

  for (int it = 0; it < lloyd_iterations; ++it) {
    const std::vector<int> labels = nearest_centroid_labels(z, centroids);
    DenseMatrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double* srow = sums.row(labels[i]);
      const double* zrow = z.row(i);
      for (std::size_t c = 0; c < d; ++c) srow[c] += zrow[c];
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      double* crow = centroids.row(c);
      const double* srow = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) crow[j] = srow[j] / static_cast<double>(counts[c]);
    }
  }
  return centroids;
}

std::vector<int> nearest_centroid_labels(const DenseMatrix& z, const DenseMatrix& centroids) {
  if (z.cols() != centroids.cols()) {
    throw ShapeError("nearest_centroid_labels: z " + shape_string(z) + " vs centroids " +
                     shape_string(centroids));
  }
  const std::size_t n = z.rows(), k = centroids.rows(), d = z.cols();
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double dist = sq_distance(z.row(i), centroids.row(j), d);
      if (dist < best) {
        best = dist;
        best_j = static_cast<int>(j);
      }
    }
    labels[i] = best_j;
  }
  return labels;
}

}  // namespace loster
