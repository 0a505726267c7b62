#pragma once

#include "loster/ops.hpp"
#include "loster/tape.hpp"

namespace loster {

struct ContrastiveConfig {
  double tau_instance = 1.0;
  double tau_cluster = 1.0;
  // When true, drops the j == i same-view term from the denominator and
  // admits the positive pair into it (the conventional NT-Xent form). The
  // default keeps the self-similarity term and excludes the positive pair.
  bool exclude_self = false;

  void validate() const;
};

// Instance-level contrastive loss over a batch and its augmented view, with
// cosine similarity and temperature tau. Symmetric: averages the per-row
// terms of both views over 2n.
Var instance_loss(Tape& t, Var z, Var z_aug, double tau, bool exclude_self = false);

// Cluster-level contrastive loss over assignment columns (cluster
// representations in R^n), plus the entropy regularizer that discourages
// degenerate one-big-cluster solutions:
//   (1/2k) * sum_i (l_qi + l_qi_aug) - H.
// Rows of both inputs must sum to 1.
Var cluster_loss(Tape& t, Var q, Var q_aug, double tau);

// v / ||v||_2 for a plain vector; throws on zero norm.
DenseMatrix l2_normalize(const DenseMatrix& v);

}  // namespace loster
