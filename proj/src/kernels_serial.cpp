#include <tvp/kernels.hpp>

namespace tvp::kernels::serial {

Matrix hadamard_gram(const Matrix& A, const Vector& w, const Matrix& G)
{
    const Index T = A.rows();
    Matrix out = Matrix::Zero(T, T);
    for (Index j = 0; j < A.cols(); ++j)
        for (Index t = 0; t < T; ++t)
            for (Index s = 0; s < T; ++s) out(t, s) += w[j] * A(t, j) * A(s, j) * G(t, s);
    return out;
}

Matrix drift_scores(const Matrix& C, const Matrix& A, const Vector& alpha)
{
    const Index T = C.rows();
    Matrix out = Matrix::Zero(T - 1, A.cols());
    for (Index j = 0; j < A.cols(); ++j)
        for (Index tau = 1; tau < T; ++tau) {
            double acc = 0.0;
            for (Index t = 0; t < T; ++t) acc += C(t, tau) * A(t, j) * alpha[t];
            out(tau - 1, j) = acc;
        }
    return out;
}

Matrix block_paths(const Matrix& C, const Vector& theta, Index blocks)
{
    const Index T = C.rows();
    Matrix out = Matrix::Zero(T, blocks);
    for (Index j = 0; j < blocks; ++j)
        for (Index t = 0; t < T; ++t)
            for (Index s = 0; s < T; ++s) out(t, j) += C(t, s) * theta[j * T + s];
    return out;
}

} // namespace tvp::kernels::serial
