#include <tvp/volatility.hpp>

#include <limits>
#include <map>

namespace tvp {

Matrix difference_operator(Index T, DifferencePenalty penalty)
{
    if (penalty == DifferencePenalty::LevelAnchored) {
        Matrix D = Matrix::Identity(T, T);
        for (Index t = 1; t < T; ++t) D(t, t - 1) = -1.0;
        return D;
    }
    Matrix D = Matrix::Zero(T - 1, T);
    for (Index t = 0; t + 1 < T; ++t) {
        D(t, t) = -1.0;
        D(t, t + 1) = 1.0;
    }
    return D;
}

Matrix smoother_matrix(Index T, double phi, DifferencePenalty penalty)
{
    const Matrix D = difference_operator(T, penalty);
    Matrix A = Matrix::Identity(T, T) + phi * D.transpose() * D;
    return A.llt().solve(Matrix::Identity(T, T));
}

Matrix covariance_outer_series(const Matrix& eps)
{
    const Index T = eps.rows();
    const Index M = eps.cols();
    Matrix out(T, M * (M + 1) / 2);
    Index c = 0;
    for (Index i = 0; i < M; ++i)
        for (Index j = i; j < M; ++j) out.col(c++) = eps.col(i).cwiseProduct(eps.col(j));
    return out;
}

Matrix smooth_covariance_paths(const Matrix& eps, const Vector& phi_per_column, DifferencePenalty penalty)
{
    const Matrix eta = covariance_outer_series(eps);
    const Index T = eta.rows();
    if (phi_per_column.size() != eta.cols())
        throw DimensionError("smooth_covariance_paths: need one phi per non-redundant product");
    std::map<double, std::vector<Index>> groups;
    for (Index j = 0; j < eta.cols(); ++j) {
        if (!(phi_per_column[j] >= 0.0)) throw ValidationError("smooth_covariance_paths: phi must be nonnegative");
        groups[phi_per_column[j]].push_back(j);
    }
    Matrix out = eta;
    if (T < 2) return out;
    const Matrix D = difference_operator(T, penalty);
    const Matrix DtD = D.transpose() * D;
    for (const auto& [phi, cols] : groups) {
        if (phi == 0.0) continue;
        Matrix A = Matrix::Identity(T, T) + phi * DtD;
        const Eigen::LLT<Matrix> llt(A);
        Matrix rhs(T, static_cast<Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) rhs.col(static_cast<Index>(c)) = eta.col(cols[c]);
        const Matrix sol = llt.solve(rhs);
        for (std::size_t c = 0; c < cols.size(); ++c) out.col(cols[c]) = sol.col(static_cast<Index>(c));
    }
    return out;
}

SmoothnessCv cv_smoothness(const Matrix& eta, const Vector& phi_grid, Index n_folds, std::uint64_t seed,
                           DifferencePenalty penalty)
{
    const Index T = eta.rows();
    const Index J = eta.cols();
    const Index G = phi_grid.size();
    if (G == 0) throw ValidationError("cv_smoothness: empty grid");
    for (Index g = 0; g < G; ++g)
        if (!(phi_grid[g] > 0.0)) throw ValidationError("cv_smoothness: phi must be positive");
    SmoothnessCv out;
    out.curve = Matrix::Zero(G, J);
    out.best_phi = Vector::Constant(J, phi_grid[0]);
    if (G == 1) {
        out.best_phi.setConstant(phi_grid[0]);
        return out;
    }
    if (n_folds < 2 || n_folds > T) throw ValidationError("cv_smoothness: invalid fold count");

    const auto folds = assign_folds(T, n_folds, FoldAssignment::RandomFolds, seed);
    const Matrix D = difference_operator(T, penalty);
    const Matrix DtD = D.transpose() * D;
    for (Index g = 0; g < G; ++g) {
        Matrix A = Matrix::Identity(T, T) + phi_grid[g] * DtD;
        const Eigen::LLT<Matrix> llt(A);
        ++out.factorizations;
        const Matrix H = llt.solve(Matrix::Identity(T, T));
        const Matrix fitted = H * eta;
        // Held-out residual of a quadratic smoother: (I - H_ff)^{-1}(eta_f - (H eta)_f).
        for (Index f = 0; f < n_folds; ++f) {
            std::vector<Index> idx;
            for (Index t = 0; t < T; ++t)
                if (folds[t] == f) idx.push_back(t);
            const Index n = static_cast<Index>(idx.size());
            if (n == 0) continue;
            Matrix B(n, n), r(n, J);
            for (Index a = 0; a < n; ++a) {
                for (Index b = 0; b < n; ++b) B(a, b) = (a == b ? 1.0 : 0.0) - H(idx[a], idx[b]);
                r.row(a) = eta.row(idx[a]) - fitted.row(idx[a]);
            }
            const Matrix e = B.partialPivLu().solve(r);
            out.curve.row(g) += e.colwise().squaredNorm() / static_cast<double>(T);
        }
    }
    for (Index j = 0; j < J; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (Index g = 0; g < G; ++g)
            if (out.curve(g, j) <= best) {
                best = out.curve(g, j);
                out.best_phi[j] = phi_grid[g];
            }
    }
    return out;
}

} // namespace tvp
