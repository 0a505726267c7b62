#pragma once

#include <vector>

#include "loster/ops.hpp"
#include "loster/rng.hpp"
#include "loster/tape.hpp"

namespace loster {

struct ClusterConfig {
  std::size_t k = 2;
  double sigma = 1.0;       // RBF bandwidth
  double tau = 10.0;        // Gumbel-softmax temperature
  double tau_floor = 0.01;  // annealing floor

  void validate() const;
};

enum class AssignKind { kSoft, kHard };

// Row-stochastic assignment matrix; hard means every row is one-hot.
struct AssignmentMatrix {
  DenseMatrix q;
  AssignKind kind = AssignKind::kSoft;

  static AssignmentMatrix soft(DenseMatrix q);  // validates row sums within 1e-9
  static AssignmentMatrix hard(DenseMatrix q);  // additionally requires {0,1} one-hot rows
};

// Normalized RBF cluster probabilities:
//   p[i,j] = exp(-||z_i - mu_j||^2 / sigma^2) / sum_c exp(-||z_i - mu_c||^2 / sigma^2)
// computed with max-subtraction; rows sum to 1.
Var assignment_probs(Tape& t, Var z, Var centroids, double sigma);

DenseMatrix sample_gumbel(std::size_t rows, std::size_t cols, Rng& rng);

// Relaxed categorical sample per row:
//   q[j] = softmax_j((log max(p[j], 1e-12) + g[j]) / tau)
// The noise is a constant during backward (reparameterization).
Var gumbel_softmax(Tape& t, Var probs, double tau, const DenseMatrix& noise);
Var gumbel_softmax_sample(Tape& t, Var probs, double tau, Rng& rng);

// One-hot at the row argmax in the forward pass, gradient passed through the
// soft input unchanged. Rows must sum to 1; ties break to the lowest index.
Var straight_through(Tape& t, Var q);

// (1/n) * sum_i ||z_i - q_i M||^2 for row-stochastic q (one-hot rows give the
// classical hard k-means objective).
Var kmeans_loss(Tape& t, Var z, Var q, Var centroids);

// k-means++ seeding followed by `lloyd_iterations` refinement sweeps
// (0 = pure seeding). Requires k <= n.
DenseMatrix kmeanspp_init(const DenseMatrix& z, std::size_t k, Rng& rng,
                          int lloyd_iterations = 10);

// Nearest-centroid labels, ties to the lowest index. Equals the argmax of
// assignment_probs for any sigma > 0.
std::vector<int> nearest_centroid_labels(const DenseMatrix& z, const DenseMatrix& centroids);

}  // namespace loster
