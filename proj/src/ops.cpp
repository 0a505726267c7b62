#include "loster/ops.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace loster {

namespace {

std::atomic<int> g_max_threads{1};

// Runs fn(begin, end) over [0, n) in contiguous chunks. Each index is handled
// by exactly one thread with a fixed inner order, so results do not depend on
// the thread count.
template <typename Fn>
void parallel_rows(std::size_t n, std::size_t work_per_row, const Fn& fn) {
  const int threads = g_max_threads.load(std::memory_order_relaxed);
  if (threads <= 1 || n < 2 || n * work_per_row < (1u << 20)) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t parts = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(parts - 1);
  const std::size_t chunk = (n + parts - 1) / parts;
  for (std::size_t p = 1; p < parts; ++p) {
    const std::size_t lo = p * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

// C[n x b] += A[n x a] * B[a x b]
void gemm_nn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  parallel_rows(n, k * m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* arow = a.row(i);
      double* crow = c.row(i);
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = arow[p];
        const double* brow = b.row(p);
        for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
      }
    }
  });
}

// C[n x m] += A[n x d] * B[m x d]^T
void gemm_nt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  const std::size_t n = a.rows(), d = a.cols(), m = b.rows();
  parallel_rows(n, d * m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* arow = a.row(i);
      double* crow = c.row(i);
      for (std::size_t j = 0; j < m; ++j) {
        const double* brow = b.row(j);
        double s = 0.0;
        for (std::size_t p = 0; p < d; ++p) s += arow[p] * brow[p];
        crow[j] += s;
      }
    }
  });
}

// C[a x m] += A[n x a]^T * B[n x m]
void gemm_tn(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    const double* brow = b.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double api = arow[p];
      double* crow = c.row(p);
      for (std::size_t j = 0; j < m; ++j) crow[j] += api * brow[j];
    }
  }
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

template <typename Fwd, typename Bwd>
Var elementwise_binary(Tape& t, Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
  const int ia = t.check(a), ib = t.check(b);
  const DenseMatrix& va = t.value(a);
  const DenseMatrix& vb = t.value(b);
  require_same_shape(va, vb, name);
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = fwd(va.data()[i], vb.data()[i]);
  }
  const bool req = t.requires_grad(a) || t.requires_grad(b);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia, ib, bwd](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      bwd(tp, g, ia, ib);
    });
  }
  return o;
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }
int max_threads() { return g_max_threads.load(std::memory_order_relaxed); }

Var add(Tape& t, Var a, Var b) {
  return elementwise_binary(
      t, a, b, "add", [](double x, double y) { return x + y; },
      [](Tape& tp, const DenseMatrix& g, int ia, int ib) {
        tp.accumulate(ia, g);
        tp.accumulate(ib, g);
      });
}

Var sub(Tape& t, Var a, Var b) {
  return elementwise_binary(
      t, a, b, "sub", [](double x, double y) { return x - y; },
      [](Tape& tp, const DenseMatrix& g, int ia, int ib) {
        tp.accumulate(ia, g);
        DenseMatrix neg(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) neg.data()[i] = -g.data()[i];
        tp.accumulate(ib, neg);
      });
}

Var mul(Tape& t, Var a, Var b) {
  return elementwise_binary(
      t, a, b, "mul", [](double x, double y) { return x * y; },
      [](Tape& tp, const DenseMatrix& g, int ia, int ib) {
        const DenseMatrix& va = tp.value(Var{ia, &tp});
        const DenseMatrix& vb = tp.value(Var{ib, &tp});
        DenseMatrix da(g.rows(), g.cols());
        DenseMatrix db(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          da.data()[i] = g.data()[i] * vb.data()[i];
          db.data()[i] = g.data()[i] * va.data()[i];
        }
        tp.accumulate(ia, da);
        tp.accumulate(ib, db);
      });
}

Var scale(Tape& t, Var a, double c) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = c * va.data()[i];
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia, c](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      DenseMatrix da(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] = c * g.data()[i];
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var add_scalar(Tape& t, Var a, double c) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = va.data()[i] + c;
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) { tp.accumulate(ia, tp.grad_buffer(id)); });
  }
  return o;
}

Var exp_elem(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(va.data()[i]);
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& y = tp.value(Var{id, &tp});
      DenseMatrix da(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] = g.data()[i] * y.data()[i];
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var log_clamped(Tape& t, Var a, double floor) {
  if (floor <= 0.0) throw std::invalid_argument("log_clamped: floor must be positive");
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = std::log(std::max(va.data()[i], floor));
  }
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia, floor](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double xv = x.data()[i];
        da.data()[i] = xv > floor ? g.data()[i] / xv : 0.0;
      }
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var relu(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(va.data()[i], 0.0);
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    // subgradient 0 at exactly 0
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) {
        da.data()[i] = x.data()[i] > 0.0 ? g.data()[i] : 0.0;
      }
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var add_noise(Tape& t, Var a, const DenseMatrix& noise) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  require_same_shape(va, noise, "add_noise");
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = va.data()[i] + noise.data()[i];
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) { tp.accumulate(ia, tp.grad_buffer(id)); });
  }
  return o;
}

Var matmul(Tape& t, Var a, Var b) {
  const int ia = t.check(a), ib = t.check(b);
  const DenseMatrix& va = t.value(a);
  const DenseMatrix& vb = t.value(b);
  if (va.cols() != vb.rows()) {
    throw ShapeError("matmul: " + shape_string(va) + " * " + shape_string(vb));
  }
  DenseMatrix out(va.rows(), vb.cols());
  gemm_nn(va, vb, out);
  const bool req = t.requires_grad(a) || t.requires_grad(b);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia, ib](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& va2 = tp.value(Var{ia, &tp});
      const DenseMatrix& vb2 = tp.value(Var{ib, &tp});
      if (tp.requires_grad(Var{ia, &tp})) {
        DenseMatrix da(va2.rows(), va2.cols());
        gemm_nt(g, vb2, da);  // dA = G * B^T
        tp.accumulate(ia, da);
      }
      if (tp.requires_grad(Var{ib, &tp})) {
        DenseMatrix db(vb2.rows(), vb2.cols());
        gemm_tn(va2, g, db);  // dB = A^T * G
        tp.accumulate(ib, db);
      }
    });
  }
  return o;
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const int ia = t.check(a), ib = t.check(b);
  const DenseMatrix& va = t.value(a);
  const DenseMatrix& vb = t.value(b);
  if (va.cols() != vb.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(va) + " * " + shape_string(vb) + "^T");
  }
  DenseMatrix out(va.rows(), vb.rows());
  gemm_nt(va, vb, out);
  const bool req = t.requires_grad(a) || t.requires_grad(b);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia, ib](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& va2 = tp.value(Var{ia, &tp});
      const DenseMatrix& vb2 = tp.value(Var{ib, &tp});
      if (tp.requires_grad(Var{ia, &tp})) {
        DenseMatrix da(va2.rows(), va2.cols());
        gemm_nn(g, vb2, da);  // dA = G * B
        tp.accumulate(ia, da);
      }
      if (tp.requires_grad(Var{ib, &tp})) {
        DenseMatrix db(vb2.rows(), vb2.cols());
        gemm_tn(g, va2, db);  // dB = G^T * A
        tp.accumulate(ib, db);
      }
    });
  }
  return o;
}

Var transpose(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.cols(), va.rows());
  for (std::size_t i = 0; i < va.rows(); ++i) {
    for (std::size_t j = 0; j < va.cols(); ++j) out(j, i) = va(i, j);
  }
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      DenseMatrix da(g.cols(), g.rows());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) da(j, i) = g(i, j);
      }
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var linear_forward(Tape& t, Var x, Var w, Var bias) {
  const int ix = t.check(x), iw = t.check(w), ibias = t.check(bias);
  const DenseMatrix& vx = t.value(x);
  const DenseMatrix& vw = t.value(w);
  const DenseMatrix& vb = t.value(bias);
  if (vx.cols() != vw.rows()) {
    throw ShapeError("linear_forward: x " + shape_string(vx) + " vs W " + shape_string(vw));
  }
  if (vb.rows() != 1 || vb.cols() != vw.cols()) {
    throw ShapeError("linear_forward: bias " + shape_string(vb) + " vs W " + shape_string(vw));
  }
  DenseMatrix out(vx.rows(), vw.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* orow = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) orow[j] = vb(0, j);
  }
  gemm_nn(vx, vw, out);
  const bool req = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ix, iw, ibias](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& vx2 = tp.value(Var{ix, &tp});
      const DenseMatrix& vw2 = tp.value(Var{iw, &tp});
      if (tp.requires_grad(Var{ix, &tp})) {
        DenseMatrix dx(vx2.rows(), vx2.cols());
        gemm_nt(g, vw2, dx);
        tp.accumulate(ix, dx);
      }
      if (tp.requires_grad(Var{iw, &tp})) {
        DenseMatrix dw(vw2.rows(), vw2.cols());
        gemm_tn(vx2, g, dw);
        tp.accumulate(iw, dw);
      }
      if (tp.requires_grad(Var{ibias, &tp})) {
        DenseMatrix db(1, g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
          const double* grow = g.row(i);
          for (std::size_t j = 0; j < g.cols(); ++j) db(0, j) += grow[j];
        }
        tp.accumulate(ibias, db);
      }
    });
  }
  return o;
}

Var sum_all(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va.data()[i];
  const bool req = t.requires_grad(a);
  Var o = t.emplace(DenseMatrix(1, 1, {s}), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const double g = tp.grad_buffer(id)(0, 0);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(x.rows(), x.cols(), g);
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var row_sum(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(va.rows(), 1);
  for (std::size_t i = 0; i < va.rows(); ++i) {
    const double* r = va.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < va.cols(); ++j) s += r[j];
    out(i, 0) = s;
  }
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double* dr = da.row(i);
        const double gi = g(i, 0);
        for (std::size_t j = 0; j < x.cols(); ++j) dr[j] = gi;
      }
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var col_sum(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  DenseMatrix out(1, va.cols());
  for (std::size_t i = 0; i < va.rows(); ++i) {
    const double* r = va.row(i);
    for (std::size_t j = 0; j < va.cols(); ++j) out(0, j) += r[j];
  }
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double* dr = da.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) dr[j] = g(0, j);
      }
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var col_mean(Tape& t, Var a) {
  const DenseMatrix& va = t.value(a);
  if (va.rows() == 0) throw ShapeError("col_mean: empty matrix");
  return scale(t, col_sum(t, a), 1.0 / static_cast<double>(va.rows()));
}

Var diagonal(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  if (va.rows() != va.cols()) {
    throw ShapeError("diagonal: matrix is " + shape_string(va));
  }
  DenseMatrix out(va.rows(), 1);
  for (std::size_t i = 0; i < va.rows(); ++i) out(i, 0) = va(i, i);
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) da(i, i) = g(i, 0);
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var frobenius_sq(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va.data()[i] * va.data()[i];
  const bool req = t.requires_grad(a);
  Var o = t.emplace(DenseMatrix(1, 1, {s}), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const double g = tp.grad_buffer(id)(0, 0);
      const DenseMatrix& x = tp.value(Var{ia, &tp});
      DenseMatrix da(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.size(); ++i) da.data()[i] = 2.0 * g * x.data()[i];
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var softmax_rows(Tape& t, Var a) {
  const int ia = t.check(a);
  const DenseMatrix& va = t.value(a);
  if (va.cols() == 0) throw ShapeError("softmax_rows: empty rows");
  DenseMatrix out(va.rows(), va.cols());
  for (std::size_t i = 0; i < va.rows(); ++i) {
    const double* r = va.row(i);
    double* orow = out.row(i);
    const double mx = r[argmax(r, va.cols())];
    double denom = 0.0;
    for (std::size_t j = 0; j < va.cols(); ++j) {
      orow[j] = std::exp(r[j] - mx);
      denom += orow[j];
    }
    for (std::size_t j = 0; j < va.cols(); ++j) orow[j] /= denom;
  }
  const bool req = t.requires_grad(a);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ia](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& y = tp.value(Var{id, &tp});
      DenseMatrix da(y.rows(), y.cols());
      for (std::size_t i = 0; i < y.rows(); ++i) {
        const double* yr = y.row(i);
        const double* gr = g.row(i);
        double* dr = da.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < y.cols(); ++j) dr[j] = yr[j] * (gr[j] - dot);
      }
      tp.accumulate(ia, da);
    });
  }
  return o;
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  const int ix = t.check(x), ig = t.check(gamma), ib = t.check(beta);
  const DenseMatrix& vx = t.value(x);
  const DenseMatrix& vg = t.value(gamma);
  const DenseMatrix& vb = t.value(beta);
  if (vx.cols() == 0) throw ShapeError("layer_norm: empty rows");
  if (vg.rows() != 1 || vg.cols() != vx.cols() || vb.rows() != 1 || vb.cols() != vx.cols()) {
    throw ShapeError("layer_norm: gamma " + shape_string(vg) + ", beta " + shape_string(vb) +
                     " vs x " + shape_string(vx));
  }
  const std::size_t n = vx.rows(), d = vx.cols();
  DenseMatrix normalized(n, d);  // (x - mean) / sqrt(var + eps), kept for backward
  std::vector<double> inv_std(n);
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = vx.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += r[j];
    mean /= static_cast<double>(d);
    double var = 0.0;  // population variance
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    double* nr = normalized.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      nr[j] = (r[j] - mean) * inv;
      orow[j] = vg(0, j) * nr[j] + vb(0, j);
    }
  }
  const bool req = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ix, ig, ib, normalized = std::move(normalized),
                       inv_std = std::move(inv_std)](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& vg2 = tp.value(Var{ig, &tp});
      const std::size_t n = g.rows(), d = g.cols();
      if (tp.requires_grad(Var{ib, &tp})) {
        DenseMatrix db(1, d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* gr = g.row(i);
          for (std::size_t j = 0; j < d; ++j) db(0, j) += gr[j];
        }
        tp.accumulate(ib, db);
      }
      if (tp.requires_grad(Var{ig, &tp})) {
        DenseMatrix dg(1, d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* gr = g.row(i);
          const double* nr = normalized.row(i);
          for (std::size_t j = 0; j < d; ++j) dg(0, j) += gr[j] * nr[j];
        }
        tp.accumulate(ig, dg);
      }
      if (tp.requires_grad(Var{ix, &tp})) {
        DenseMatrix dx(n, d);
        for (std::size_t i = 0; i < n; ++i) {
          const double* gr = g.row(i);
          const double* nr = normalized.row(i);
          double* dr = dx.row(i);
          double mean_dn = 0.0, mean_dn_n = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dn = gr[j] * vg2(0, j);
            mean_dn += dn;
            mean_dn_n += dn * nr[j];
          }
          mean_dn /= static_cast<double>(d);
          mean_dn_n /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const double dn = gr[j] * vg2(0, j);
            dr[j] = inv_std[i] * (dn - mean_dn - nr[j] * mean_dn_n);
          }
        }
        tp.accumulate(ix, dx);
      }
    });
  }
  return o;
}

Var dropout(Tape& t, Var x, double p, bool training, Rng* rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: p must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;  // evaluation mode is the identity
  if (rng == nullptr) throw std::invalid_argument("dropout: rng required in training mode");
  const int ix = t.check(x);
  const DenseMatrix& vx = t.value(x);
  // inverted dropout: survivors scaled by 1/(1-p) at train time
  const double keep_scale = 1.0 / (1.0 - p);
  DenseMatrix mask(vx.rows(), vx.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng->uniform() < p ? 0.0 : keep_scale;
  }
  DenseMatrix out(vx.rows(), vx.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = vx.data()[i] * mask.data()[i];
  const bool req = t.requires_grad(x);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    // mask is a constant during backward
    t.set_backward(o, [id = o.id, ix, mask = std::move(mask)](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      DenseMatrix da(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] = g.data()[i] * mask.data()[i];
      tp.accumulate(ix, da);
    });
  }
  return o;
}

Var l2_normalize_rows(Tape& t, Var x) {
  const int ix = t.check(x);
  const DenseMatrix& vx = t.value(x);
  const std::size_t n = vx.rows(), d = vx.cols();
  std::vector<double> norms(n);
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = vx.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += r[j] * r[j];
    const double norm = std::sqrt(s);
    if (norm == 0.0) {
      throw std::invalid_argument("l2_normalize_rows: zero-norm row " + std::to_string(i));
    }
    norms[i] = norm;
    double* orow = out.row(i);
    for (std::size_t j = 0; j < d; ++j) orow[j] = r[j] / norm;
  }
  const bool req = t.requires_grad(x);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, ix, norms = std::move(norms)](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& y = tp.value(Var{id, &tp});
      DenseMatrix dx(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* gr = g.row(i);
        const double* yr = y.row(i);
        double* dr = dx.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) dot += gr[j] * yr[j];
        for (std::size_t j = 0; j < g.cols(); ++j) {
          dr[j] = (gr[j] - yr[j] * dot) / norms[i];
        }
      }
      tp.accumulate(ix, dx);
    });
  }
  return o;
}

Var pairwise_sqdist(Tape& t, Var z, Var m) {
  const int iz = t.check(z), im = t.check(m);
  const DenseMatrix& vz = t.value(z);
  const DenseMatrix& vm = t.value(m);
  if (vz.cols() != vm.cols()) {
    throw ShapeError("pairwise_sqdist: z " + shape_string(vz) + " vs centroids " + shape_string(vm));
  }
  const std::size_t n = vz.rows(), k = vm.rows(), d = vz.cols();
  DenseMatrix out(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* zr = vz.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double* mr = vm.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = zr[c] - mr[c];
        s += diff * diff;
      }
      orow[j] = s;
    }
  }
  const bool req = t.requires_grad(z) || t.requires_grad(m);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, iz, im](Tape& tp) {
      const DenseMatrix& g = tp.grad_buffer(id);
      const DenseMatrix& vz2 = tp.value(Var{iz, &tp});
      const DenseMatrix& vm2 = tp.value(Var{im, &tp});
      const std::size_t n = vz2.rows(), k = vm2.rows(), d = vz2.cols();
      const bool need_z = tp.requires_grad(Var{iz, &tp});
      const bool need_m = tp.requires_grad(Var{im, &tp});
      DenseMatrix dz(n, d), dm(k, d);
      for (std::size_t i = 0; i < n; ++i) {
        const double* zr = vz2.row(i);
        const double* gr = g.row(i);
        double* dzr = dz.row(i);
        for (std::size_t j = 0; j < k; ++j) {
          const double* mr = vm2.row(j);
          double* dmr = dm.row(j);
          const double w = 2.0 * gr[j];
          for (std::size_t c = 0; c < d; ++c) {
            const double diff = zr[c] - mr[c];
            dzr[c] += w * diff;
            dmr[c] -= w * diff;
          }
        }
      }
      if (need_z) tp.accumulate(iz, dz);
      if (need_m) tp.accumulate(im, dm);
    });
  }
  return o;
}

Var straight_through_rows(Tape& t, Var q) {
  const int iq = t.check(q);
  const DenseMatrix& vq = t.value(q);
  if (vq.cols() == 0) throw ShapeError("straight_through_rows: empty rows");
  DenseMatrix out(vq.rows(), vq.cols());
  for (std::size_t i = 0; i < vq.rows(); ++i) {
    out(i, argmax(vq.row(i), vq.cols())) = 1.0;
  }
  const bool req = t.requires_grad(q);
  Var o = t.emplace(std::move(out), req);
  if (req) {
    t.set_backward(o, [id = o.id, iq](Tape& tp) { tp.accumulate(iq, tp.grad_buffer(id)); });
  }
  return o;
}

}  // namespace loster
