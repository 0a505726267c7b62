#pragma once

#include "loster/matrix.hpp"
#include "loster/rng.hpp"
#include "loster/tape.hpp"

namespace loster {

// Linear-algebra worker threads (row-partitioned, bitwise deterministic for
// any thread count). Default 1.
void set_max_threads(int n);
int max_threads();

// ---- elementwise ----
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);  // Hadamard product
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var exp_elem(Tape& t, Var a);
Var log_clamped(Tape& t, Var a, double floor = 1e-300);
Var relu(Tape& t, Var a);

// Adds a constant matrix (no gradient to it).
Var add_noise(Tape& t, Var a, const DenseMatrix& noise);

// ---- linear algebra ----
Var matmul(Tape& t, Var a, Var b);     // [n x k] * [k x m]
Var matmul_nt(Tape& t, Var a, Var b);  // [n x d] * [m x d]^T
Var transpose(Tape& t, Var a);

// out[i,j] = sum_c x[i,c] W[c,j] + bias[j]; bias is 1 x out.
Var linear_forward(Tape& t, Var x, Var w, Var bias);

// ---- reductions / broadcasts ----
Var sum_all(Tape& t, Var a);       // 1x1
Var row_sum(Tape& t, Var a);       // n x 1
Var col_sum(Tape& t, Var a);       // 1 x m
Var col_mean(Tape& t, Var a);      // 1 x m
Var diagonal(Tape& t, Var a);      // n x n -> n x 1
Var frobenius_sq(Tape& t, Var a);  // 1x1, sum of squares

// ---- row-wise network ops ----
Var softmax_rows(Tape& t, Var a);  // max-subtraction per row
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
Var dropout(Tape& t, Var x, double p, bool training, Rng* rng);
Var l2_normalize_rows(Tape& t, Var x);

// D[i,j] = ||z_i - m_j||^2 for z: [n x d], m: [k x d].
Var pairwise_sqdist(Tape& t, Var z, Var m);

// Forward: one-hot at the row argmax (ties to lowest index).
// Backward: passes the downstream gradient through unchanged.
Var straight_through_rows(Tape& t, Var q);

}  // namespace loster
