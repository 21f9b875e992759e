#include <tvp/kernels.hpp>
#include <tvp/ridge.hpp>

#include <cmath>
#include <sstream>

namespace tvp {

VarianceProfile VarianceProfile::homogeneous(Index T, Index blocks, double lambda, double lambda0)
{
    VarianceProfile p;
    p.sigma_eps_t = Vector::Ones(T);
    p.sigma_u_k = Vector::Constant(blocks, 1.0 / (lambda * static_cast<double>(blocks)));
    p.lambda = lambda;
    p.lambda0 = lambda0;
    return p;
}

void VarianceProfile::validate(Index T, Index blocks) const
{
    if (sigma_eps_t.size() != T) throw DimensionError("profile: sigma_eps_t length must equal T");
    if (sigma_u_k.size() != blocks) throw DimensionError("profile: sigma_u_k length must equal block count");
    for (Index t = 0; t < T; ++t)
        if (!(sigma_eps_t[t] > 0.0) || !std::isfinite(sigma_eps_t[t]))
            throw ValidationError("profile: residual variances must be positive and finite");
    for (Index k = 0; k < blocks; ++k)
        if (!(sigma_u_k[k] >= 0.0) || !std::isfinite(sigma_u_k[k]))
            throw ValidationError("profile: drift variances must be nonnegative and finite");
    if (!(lambda0 > 0.0)) throw ValidationError("profile: lambda0 must be positive");
    if (!(lambda > 0.0)) throw ValidationError("profile: lambda must be positive");
}

double condition_estimate(const Matrix& A)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    const Vector ev = es.eigenvalues().cwiseAbs();
    const double lo = ev.minCoeff();
    return lo > 0.0 ? ev.maxCoeff() / lo : INFINITY;
}

SpdFactor factor_spd(const Matrix& A, const char* what)
{
    SpdFactor f;
    f.llt.compute(A);
    if (f.llt.info() == Eigen::Success) return f;
    const double mean_diag = std::max(A.diagonal().mean(), 1e-300);
    for (double rel = 1e-10; rel <= 1e-6 * 1.0001; rel *= 10.0) {
        Matrix B = A;
        B.diagonal().array() += rel * mean_diag;
        f.llt.compute(B);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = rel * mean_diag;
            return f;
        }
    }
    std::ostringstream os;
    os << what << ": positive-definite factorization failed after jitter up to 1e-6 of the mean diagonal"
       << " (condition estimate " << condition_estimate(A) << ")";
    throw NumericalError(os.str());
}

DualSystem::DualSystem(const Matrix& V, const Matrix& X0, double lambda0)
    : v_(factor_spd(V, "dual Gram matrix")), X0_(X0)
{
    if (!(lambda0 > 0.0)) throw ValidationError("lambda0 must be positive");
    ViX0_ = v_.llt.solve(X0_);
    Matrix G = X0_.transpose() * ViX0_;
    G.diagonal().array() += lambda0;
    g_.compute(G);
    if (g_.info() != Eigen::Success) {
        std::ostringstream os;
        os << "beta0 system: factorization failed (condition estimate " << condition_estimate(G) << ")";
        throw NumericalError(os.str());
    }
}

void DualSystem::solve(const Matrix& Y, Matrix& b, Matrix& alpha) const
{
    const Matrix ViY = v_.llt.solve(Y);
    b = g_.solve(X0_.transpose() * ViY);
    alpha = ViY - ViX0_ * b;
}

Matrix dual_gram(const BasisExpansion& e, const VarianceProfile& profile, const Parallelism& par)
{
    Matrix V = kernels::hadamard_gram(e.regressors, profile.sigma_u_k, e.G_u, par);
    V.diagonal() += profile.sigma_eps_t;
    return V;
}

Matrix drift_matrix(const Vector& theta, const BasisExpansion& e)
{
    if (theta.size() != e.blocks() * e.T) throw DimensionError("theta length must equal blocks*T");
    Matrix U(e.T - 1, e.blocks());
    for (Index j = 0; j < e.blocks(); ++j) U.col(j) = theta.segment(j * e.T + 1, e.T - 1);
    return U;
}

TvpEstimate assemble_estimate(const BasisExpansion& e, const Vector& y, const Vector& b, const Matrix& U,
                              const VarianceProfile& profile)
{
    TvpEstimate est;
    est.theta.resize(e.blocks() * e.T);
    for (Index j = 0; j < e.blocks(); ++j) {
        est.theta[j * e.T] = b[j];
        est.theta.segment(j * e.T + 1, e.T - 1) = U.col(j);
    }
    const Matrix paths = block_paths(est.theta, e);
    est.beta = beta_from_paths(paths, e);
    est.fitted = fitted_from_paths(paths, e);
    est.residuals = y - est.fitted;
    est.lambda = profile.lambda;
    est.profile = profile;
    est.law = e.law;
    return est;
}

namespace {

void check_y(const BasisExpansion& e, Index rows)
{
    if (rows != e.T) {
        std::ostringstream os;
        os << "response has " << rows << " rows, expansion has T = " << e.T;
        throw DimensionError(os.str());
    }
}

std::vector<TvpEstimate> solve_profile(const BasisExpansion& e, const Matrix& Y, const VarianceProfile& profile,
                                       const Parallelism& par)
{
    check_y(e, Y.rows());
    profile.validate(e.T, e.blocks());
    const DualSystem sys(dual_gram(e, profile, par), e.beta0_design(), profile.lambda0);
    Matrix B, A;
    sys.solve(Y, B, A);
    std::vector<TvpEstimate> out;
    out.reserve(Y.cols());
    for (Index m = 0; m < Y.cols(); ++m) {
        Matrix U = drift_scores(e, e.regressors, A.col(m), par);
        U = U * profile.sigma_u_k.asDiagonal();
        out.push_back(assemble_estimate(e, Y.col(m), B.col(m), U, profile));
    }
    return out;
}

} // namespace

TvpEstimate generalized_dual_ridge(const BasisExpansion& e, const Vector& y, const VarianceProfile& profile,
                                   const Parallelism& par)
{
    return solve_profile(e, y, profile, par).front();
}

TvpEstimate dual_ridge(const BasisExpansion& e, const Vector& y, double lambda, double lambda0,
                       const Parallelism& par)
{
    if (!(lambda > 0.0) || !(lambda0 > 0.0)) throw ValidationError("dual_ridge: penalties must be positive");
    return generalized_dual_ridge(e, y, VarianceProfile::homogeneous(e.T, e.blocks(), lambda, lambda0), par);
}

std::vector<TvpEstimate> multivariate_dual_ridge(const BasisExpansion& e, const Matrix& Y, double lambda,
                                                 double lambda0, const Parallelism& par)
{
    if (!(lambda > 0.0) || !(lambda0 > 0.0))
        throw ValidationError("multivariate_dual_ridge: penalties must be positive");
    return solve_profile(e, Y, VarianceProfile::homogeneous(e.T, e.blocks(), lambda, lambda0), par);
}

std::vector<TvpEstimate> multivariate_generalized_dual_ridge(const BasisExpansion& e, const Matrix& Y,
                                                             const VarianceProfile& profile,
                                                             const Parallelism& par)
{
    return solve_profile(e, Y, profile, par);
}

} // namespace tvp
