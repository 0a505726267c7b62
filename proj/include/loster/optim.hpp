#pragma once

#include <vector>

#include "loster/tape.hpp"

namespace loster {

// Plain gradient descent: p.value -= lr * p.grad, nothing else.
void sgd_step(const std::vector<Parameter*>& params, double lr);

// Rescales all gradients so their joint L2 norm is at most max_norm; a
// no-op when the norm is already within the bound or max_norm <= 0.
// Returns the pre-clip norm.
double clip_gradient_norm(const std::vector<Parameter*>& params, double max_norm);

// Adam with bias correction; moments keyed by registration order.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Parameter*> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  double learning_rate() const { return lr_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace loster
