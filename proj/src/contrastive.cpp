#include "loster/contrastive.hpp"

#include <cmath>
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

// Row normalization with a norm floor. Sharply annealed assignments can
// starve a cluster to an exactly zero column; the floor keeps the cluster
// loss finite there instead of failing the run.
Var l2_normalize_rows_floored(Tape& t, Var x, double floor) {
  const int ix = t.check(x);
  const DenseMatrix& vx = t.value(x);
  const std::size_t n = vx.rows(), d = vx.cols();
  std::vector<double> norms(n);
  DenseMatrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = vx.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += r[j] * r[j];
    norms[i] = std::max(std::sqrt(s), floor);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < d; ++j) orow[j] = r[j] / norms[i];
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

// Shared two-view contrastive core over the rows of `a` and `b` (already
// L2-normalized): mean over both views of
//   -log( exp(sim(a_i, b_i)/tau) / denom_i ).
// Default denominator keeps the same-view self term and excludes the
// positive pair; exclude_self swaps both conventions.
Var nt_xent_rows(Tape& t, Var a, Var b, double tau, bool exclude_self) {
  const std::size_t n = t.value(a).rows();
  Var sim_aa = matmul_nt(t, a, a);
  Var sim_ab = matmul_nt(t, a, b);
  Var sim_bb = matmul_nt(t, b, b);
  const double inv_tau = 1.0 / tau;
  Var exp_aa = exp_elem(t, scale(t, sim_aa, inv_tau));
  Var exp_ab = exp_elem(t, scale(t, sim_ab, inv_tau));
  Var exp_bb = exp_elem(t, scale(t, sim_bb, inv_tau));

  Var positive = diagonal(t, exp_ab);  // sim(a_i, b_i) == sim(b_i, a_i)
  Var cross_a = row_sum(t, exp_ab);
  Var cross_b = row_sum(t, transpose(t, exp_ab));

  Var denom_a, denom_b;
  if (exclude_self) {
    denom_a = add(t, sub(t, row_sum(t, exp_aa), diagonal(t, exp_aa)), cross_a);
    denom_b = add(t, sub(t, row_sum(t, exp_bb), diagonal(t, exp_bb)), cross_b);
  } else {
    denom_a = sub(t, add(t, row_sum(t, exp_aa), cross_a), positive);
    denom_b = sub(t, add(t, row_sum(t, exp_bb), cross_b), positive);
  }

  Var log_pos = log_clamped(t, positive);
  Var terms_a = sub(t, log_clamped(t, denom_a), log_pos);
  Var terms_b = sub(t, log_clamped(t, denom_b), log_pos);
  Var total = add(t, sum_all(t, terms_a), sum_all(t, terms_b));
  return scale(t, total, 1.0 / (2.0 * static_cast<double>(n)));
}

}  // namespace

void ContrastiveConfig::validate() const {
  if (tau_instance <= 0.0 || tau_cluster <= 0.0) {
    throw std::invalid_argument("ContrastiveConfig: temperatures must be positive");
  }
}

Var instance_loss(Tape& t, Var z, Var z_aug, double tau, bool exclude_self) {
  if (tau <= 0.0) throw std::invalid_argument("instance_loss: tau must be positive");
  const DenseMatrix& vz = t.value(z);
  if (!vz.same_shape(t.value(z_aug))) {
    throw ShapeError("instance_loss: " + shape_string(vz) + " vs " + shape_string(t.value(z_aug)));
  }
  if (vz.rows() == 0) throw ShapeError("instance_loss: empty batch");
  Var zn = l2_normalize_rows(t, z);
  Var zan = l2_normalize_rows(t, z_aug);
  return nt_xent_rows(t, zn, zan, tau, exclude_self);
}

Var cluster_loss(Tape& t, Var q, Var q_aug, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("cluster_loss: tau must be positive");
  const DenseMatrix& vq = t.value(q);
  if (!vq.same_shape(t.value(q_aug))) {
    throw ShapeError("cluster_loss: " + shape_string(vq) + " vs " + shape_string(t.value(q_aug)));
  }
  require_row_stochastic(vq, "cluster_loss");
  require_row_stochastic(t.value(q_aug), "cluster_loss (augmented)");

  // columns are the cluster representations; negatives range over the k columns
  Var cols = l2_normalize_rows_floored(t, transpose(t, q), 1e-6);
  Var cols_aug = l2_normalize_rows_floored(t, transpose(t, q_aug), 1e-6);
  Var contrast = nt_xent_rows(t, cols, cols_aug, tau, /*exclude_self=*/false);

  // -H = sum_i p(q_i) log p(q_i) + p(q_i_aug) log p(q_i_aug), with 0 log 0 = 0
  Var p = col_mean(t, q);
  Var p_aug = col_mean(t, q_aug);
  Var neg_entropy = add(t, sum_all(t, mul(t, p, log_clamped(t, p, 1e-12))),
                        sum_all(t, mul(t, p_aug, log_clamped(t, p_aug, 1e-12))));
  return add(t, contrast, neg_entropy);
}

DenseMatrix l2_normalize(const DenseMatrix& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v.data()[i] * v.data()[i];
  const double norm = std::sqrt(s);
  if (norm == 0.0) throw std::invalid_argument("l2_normalize: zero vector");
  DenseMatrix out(v.rows(), v.cols());
  for (std::size_t i = 0; i < v.size(); ++i) out.data()[i] = v.data()[i] / norm;
  return out;
}

}  // namespace loster
