#include "loster/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace loster {

void sgd_step(const std::vector<Parameter*>& params, double lr) {
  for (Parameter* p : params) {
    double* value = p->value.data();
    const double* grad = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) value[i] -= lr * grad[i];
  }
}

double clip_gradient_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      sq += p->grad.data()[i] * p->grad.data()[i];
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm <= 0.0 || norm <= max_norm) return norm;
  const double scale = max_norm / norm;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad.data()[i] *= scale;
  }
  return norm;
}

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw std::invalid_argument("AdamOptimizer: lr must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Parameter& p = *params_[pi];
    double* value = p.value.data();
    const double* grad = p.grad.data();
    double* m = m_[pi].data();
    double* v = v_[pi].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      value[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

}  // namespace loster
