#pragma once

#include <functional>
#include <string>
#include <vector>

#include "loster/matrix.hpp"

namespace loster {

// A learnable tensor. Backward passes accumulate d(loss)/d(value) into grad.
struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Parameter() = default;
  Parameter(std::string name_, DenseMatrix value_)
      : name(std::move(name_)), value(std::move(value_)),
        grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node on a specific tape.
struct Var {
  int id = -1;
  const Tape* owner = nullptr;
};

// Record of one forward pass. Nodes are appended in topological order, so a
// single reverse sweep yields exact gradients of a scalar with respect to
// every registered parameter. Gradients accumulate additively when a value
// or parameter is used more than once. A tape is single-threaded while a
// forward/backward pass is in flight.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that takes no gradient.
  Var constant(DenseMatrix value);

  // Leaf registered to a parameter; backward adds into p.grad.
  Var param(Parameter& p);

  const DenseMatrix& value(Var v) const { return nodes_[check(v)].value; }
  double scalar(Var v) const;

  // Gradient received by node v; zeros if the node played no role.
  const DenseMatrix& grad(Var v);

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. `loss` must be
  // a 1x1 node on this tape. May be called once per recorded pass.
  void backward(Var loss);

  void reset();
  std::size_t node_count() const { return nodes_.size(); }

  // --- op implementation hooks ---
  Var emplace(DenseMatrix value, bool requires_grad);
  void set_backward(Var v, BackwardFn fn) { nodes_[check(v)].backward = std::move(fn); }
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  DenseMatrix& grad_buffer(int id);
  void accumulate(int id, const DenseMatrix& g);
  int check(Var v) const;

 private:
  struct Node {
    DenseMatrix value;
    DenseMatrix grad;
    bool grad_live = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* parameter = nullptr;
  };

  std::vector<Node> nodes_;
  bool backward_ran_ = false;
};

}  // namespace loster
