#include "loster/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace loster {

Var Tape::constant(DenseMatrix value) {
  if (!value.is_finite()) {
    throw std::invalid_argument("Tape::constant: non-finite input");
  }
  return emplace(std::move(value), /*requires_grad=*/false);
}

Var Tape::param(Parameter& p) {
  if (!p.value.is_finite()) {
    throw std::invalid_argument("Tape::param: parameter '" + p.name + "' has non-finite values");
  }
  if (!p.grad.same_shape(p.value)) {
    p.grad = DenseMatrix(p.value.rows(), p.value.cols());
  }
  Var v = emplace(p.value, /*requires_grad=*/true);
  Parameter* target = &p;
  nodes_[v.id].parameter = target;
  set_backward(v, [id = v.id, target](Tape& t) {
    const DenseMatrix& g = t.grad_buffer(id);
    double* out = target->grad.data();
    const double* in = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += in[i];
  });
  return v;
}

double Tape::scalar(Var v) const {
  const DenseMatrix& m = nodes_[check(v)].value;
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("Tape::scalar: node is " + shape_string(m) + ", expected 1x1");
  }
  return m(0, 0);
}

const DenseMatrix& Tape::grad(Var v) {
  return grad_buffer(check(v));
}

void Tape::backward(Var loss) {
  const int id = check(loss);
  const DenseMatrix& lv = nodes_[id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("Tape::backward: loss is " + shape_string(lv) + ", expected a scalar");
  }
  if (!std::isfinite(lv(0, 0))) {
    throw std::runtime_error("Tape::backward: loss is not finite");
  }
  if (backward_ran_) {
    throw std::logic_error("Tape::backward: called twice on the same recorded pass");
  }
  backward_ran_ = true;

  grad_buffer(id)(0, 0) = 1.0;
  for (int i = id; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.grad_live || !node.requires_grad || !node.backward) continue;
    node.backward(*this);
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_ran_ = false;
}

Var Tape::emplace(DenseMatrix value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

DenseMatrix& Tape::grad_buffer(int id) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.grad_live) {
    node.grad = DenseMatrix(node.value.rows(), node.value.cols());
    node.grad_live = true;
  }
  return node.grad;
}

void Tape::accumulate(int id, const DenseMatrix& g) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.requires_grad) return;
  DenseMatrix& buf = grad_buffer(id);
  if (!buf.same_shape(g)) {
    throw ShapeError("Tape::accumulate: gradient " + shape_string(g) + " for node " + shape_string(buf));
  }
  double* out = buf.data();
  const double* in = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] += in[i];
}

int Tape::check(Var v) const {
  if (v.owner != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::logic_error("Tape: Var does not belong to this tape");
  }
  return v.id;
}

}  // namespace loster
