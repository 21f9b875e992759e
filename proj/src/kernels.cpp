#include <tvp/kernels.hpp>

#include <algorithm>

namespace tvp::kernels {

Matrix hadamard_gram(const Matrix& A, const Vector& w, const Matrix& G, const Parallelism& par)
{
    if (A.rows() != G.rows() || G.rows() != G.cols() || w.size() != A.cols())
        throw DimensionError("hadamard_gram: shape mismatch");
    const Index T = A.rows();
    const Matrix Aw = A * w.asDiagonal();
    Matrix out(T, T);
    out.triangularView<Eigen::Lower>() = Aw * A.transpose();
    const int nt = par.resolved();
#pragma omp parallel for schedule(dynamic, 16) num_threads(nt)
    for (Index s = 0; s < T; ++s) {
        for (Index t = s; t < T; ++t) {
            const double v = out(t, s) * G(t, s);
            out(t, s) = v;
            out(s, t) = v;
        }
    }
    return out;
}

Matrix drift_scores(const Matrix& C, const Matrix& A, const Vector& alpha, const Parallelism& par)
{
    const Index T = C.rows();
    if (A.rows() != T || alpha.size() != T) throw DimensionError("drift_scores: shape mismatch");
    const Matrix weighted = alpha.asDiagonal() * A;
    Matrix out(T - 1, A.cols());
    // C' is upper triangular; one triangular product per thread chunk of columns.
    const int nt = std::max(1, std::min<int>(par.resolved(), static_cast<int>(A.cols())));
#pragma omp parallel for schedule(static) num_threads(nt)
    for (int c = 0; c < nt; ++c) {
        const Index lo = A.cols() * c / nt;
        const Index hi = A.cols() * (c + 1) / nt;
        const Matrix full = C.transpose().triangularView<Eigen::Upper>() * weighted.middleCols(lo, hi - lo);
        out.middleCols(lo, hi - lo) = full.bottomRows(T - 1);
    }
    return out;
}

Matrix block_paths(const Matrix& C, const Vector& theta, Index blocks, const Parallelism& par)
{
    const Index T = C.rows();
    if (theta.size() != T * blocks) throw DimensionError("block_paths: theta length mismatch");
    const Eigen::Map<const Matrix> Theta(theta.data(), T, blocks);
    Matrix out(T, blocks);
    const int nt = std::max(1, std::min<int>(par.resolved(), static_cast<int>(blocks)));
#pragma omp parallel for schedule(static) num_threads(nt)
    for (int c = 0; c < nt; ++c) {
        const Index lo = blocks * c / nt;
        const Index hi = blocks * (c + 1) / nt;
        out.middleCols(lo, hi - lo).noalias() = C.triangularView<Eigen::Lower>() * Theta.middleCols(lo, hi - lo);
    }
    return out;
}

Vector short_inverse_column(const Matrix& C, Index max_length)
{
    const Index T = C.rows();
    if (T == 0 || !(C(0, 0) != 0.0)) return Vector();
    Vector d = Vector::Zero(T);
    d[0] = 1.0 / C(0, 0);
    Index last = 0;
    for (Index n = 1; n < T; ++n) {
        double acc = 0.0;
        for (Index i = 1; i <= n; ++i) acc += C(i, 0) * d[n - i];
        d[n] = -acc / C(0, 0);
        if (d[n] != 0.0) last = n;
        if (n > max_length && last + 1 > max_length) return Vector();
    }
    if (last + 1 > max_length) return Vector();
    // Toeplitz check on the first subdiagonals: the recursion is only valid then.
    for (Index i = 0; i < std::min<Index>(T, max_length + 1); ++i)
        for (Index t = i; t < T; ++t)
            if (C(t, t - i) != C(i, 0)) return Vector();
    return d.head(last + 1);
}

Matrix recursive_paths(const Vector& d, const Matrix& theta_blocks, const Parallelism& par)
{
    const Index T = theta_blocks.rows();
    const Index J = theta_blocks.cols();
    const Index b = d.size() - 1;
    Matrix out(T, J);
    const int nt = par.resolved();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (Index j = 0; j < J; ++j) {
        // D x = theta, D lower Toeplitz with first column d.
        for (Index t = 0; t < T; ++t) {
            double v = theta_blocks(t, j);
            for (Index i = 1; i <= b && i <= t; ++i) v -= d[i] * out(t - i, j);
            out(t, j) = v / d[0];
        }
    }
    return out;
}

Matrix recursive_drift_scores(const Vector& d, const Matrix& A, const Vector& alpha, const Parallelism& par)
{
    const Index T = A.rows();
    if (alpha.size() != T) throw DimensionError("recursive_drift_scores: shape mismatch");
    const Index J = A.cols();
    const Index b = d.size() - 1;
    Matrix out(T - 1, J);
    const int nt = par.resolved();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (Index j = 0; j < J; ++j) {
        // D' x = A_j .* alpha by back substitution; rows 1.. of x are the scores.
        Vector x(T);
        for (Index t = T - 1; t >= 0; --t) {
            double v = A(t, j) * alpha[t];
            for (Index i = 1; i <= b && t + i < T; ++i) v -= d[i] * x[t + i];
            x[t] = v / d[0];
        }
        out.col(j) = x.tail(T - 1);
    }
    return out;
}

} // namespace tvp::kernels
