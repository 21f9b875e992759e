#pragma once

#include <tvp/estimators.hpp>

// Pieces shared by the univariate and multivariate reduced-rank estimators.
namespace tvp::detail {

// g_r = C_u F_r', T x r.
inline Matrix factor_paths(const BasisExpansion& e, const Matrix& F)
{
    if (F.rows() == 0) return Matrix::Zero(e.T, 0);
    return e.C.rightCols(e.T - 1) * F.transpose();
}

// X0 b + sum_j X_j .* (C_u F' Lambda')_j
inline Vector reduced_rank_fit(const BasisExpansion& e, const Vector& b, const Matrix& loadings, const Matrix& F)
{
    Vector fit = e.beta0_design() * b;
    if (F.rows() > 0) {
        const Matrix paths = factor_paths(e, F) * loadings.transpose();
        fit += paths.cwiseProduct(e.regressors).rowwise().sum();
    }
    return fit;
}

inline double loading_penalty(const Matrix& loadings, double xi, double mixing, Index T)
{
    if (loadings.size() == 0) return 0.0;
    return 2.0 * static_cast<double>(T) * xi *
           (mixing * loadings.cwiseAbs().sum() + 0.5 * (1.0 - mixing) * loadings.squaredNorm());
}

// Loading-step design [X0 | X_j .* g_r], loading (j, r) at column J + r*J + j,
// rows scaled by 1/sqrt(omega).
inline Matrix loading_design(const BasisExpansion& e, const Matrix& F, const Vector& omega)
{
    const Index J = e.blocks();
    const Index r = F.rows();
    const Matrix g = factor_paths(e, F);
    Matrix A(e.T, J + J * r);
    A.leftCols(J) = e.beta0_design();
    for (Index q = 0; q < r; ++q)
        for (Index j = 0; j < J; ++j) A.col(J + q * J + j) = e.regressors.col(j).cwiseProduct(g.col(q));
    const Vector w = omega.cwiseSqrt().cwiseInverse();
    return w.asDiagonal() * A;
}

// Drift matrix U = F' Lambda', (T-1) x J.
inline Matrix drift_from_factors(const BasisExpansion& e, const Matrix& loadings, const Matrix& F)
{
    if (F.rows() == 0) return Matrix::Zero(e.T - 1, e.blocks());
    return F.transpose() * loadings.transpose();
}

struct FactorStep {
    Matrix F;
    Vector b;
};

// Exact ridge solve for F and b given the loadings.
FactorStep factor_step(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& loadings,
                       double lambda_f, double mu, const Parallelism& par);

struct LoadingStep {
    Matrix loadings;
    Vector b;
};

void loading_penalties(Index J, Index p, double xi, double mixing, double mu, Index T, Vector& l1, Vector& l2);

// Warm-started coordinate descent for the loadings and b given F.
LoadingStep loading_step(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& F,
                         const Matrix& loadings_warm, const Vector& b_warm, double xi, double mixing, double mu,
                         double tolerance);

double choose_xi(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& F, double mixing,
                 double mu, Index grid_points, std::uint64_t seed);

// Kernel CV over a grid spanning two decades either side of `center`.
double choose_lambda_f(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& loadings,
                       double center, const GrrrrOptions& opt, const CvSpec& spec);

} // namespace tvp::detail
