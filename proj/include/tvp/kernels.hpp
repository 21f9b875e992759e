#pragma once

#include <tvp/common.hpp>

// Dense building blocks of the dual solvers. The parallel variants are the
// production path; the serial variants are plain loop references kept for
// tests and benchmarks.
namespace tvp::kernels {

// (A diag(w) A') .* G  for A: T x J, w: J, G: T x T.
// With A = regressors and G = C_u C_u' this is Z_u Omega_u Z_u'.
Matrix hadamard_gram(const Matrix& A, const Vector& w, const Matrix& G, const Parallelism& par = {});

// Column j = C_u' (A_j .* alpha), where C_u drops the first column of C.
// Result is (T-1) x J: the drift part of Omega_theta^{-1} theta.
Matrix drift_scores(const Matrix& C, const Matrix& A, const Vector& alpha, const Parallelism& par = {});

// Column j = C (theta block j), blocks stacked in theta.
Matrix block_paths(const Matrix& C, const Vector& theta, Index blocks, const Parallelism& par = {});

// Lower-triangular Toeplitz C whose inverse has a short first column d
// (d_0 = 1, len(d) - 1 nonzero subdiagonals). Products with C and C' become
// recursions costing O(T len(d)) per column instead of O(T^2).
Vector short_inverse_column(const Matrix& C, Index max_length = 8);  // empty when longer
Matrix recursive_paths(const Vector& d, const Matrix& theta_blocks, const Parallelism& par = {});
Matrix recursive_drift_scores(const Vector& d, const Matrix& A, const Vector& alpha, const Parallelism& par = {});

namespace serial {
Matrix hadamard_gram(const Matrix& A, const Vector& w, const Matrix& G);
Matrix drift_scores(const Matrix& C, const Matrix& A, const Vector& alpha);
Matrix block_paths(const Matrix& C, const Vector& theta, Index blocks);
} // namespace serial

} // namespace tvp::kernels
