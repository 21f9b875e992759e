#include <tvp/basis.hpp>
#include <tvp/kernels.hpp>

#include <omp.h>

#include <cmath>
#include <sstream>

namespace tvp {

int Parallelism::resolved() const
{
    return threads > 0 ? threads : omp_get_max_threads();
}

void RegressionData::validate() const
{
    if (X.rows() != y.size()) {
        std::ostringstream os;
        os << "X has " << X.rows() << " rows but y has length " << y.size();
        throw DimensionError(os.str());
    }
    if (y.size() < 3) throw DimensionError("need T >= 3 observations");
    if (X.cols() < 1) throw DimensionError("need at least one regressor");
    if (!series_names.empty() && static_cast<Index>(series_names.size()) != X.cols())
        throw DimensionError("series_names length does not match K");
    for (Index t = 0; t < y.size(); ++t)
        if (!std::isfinite(y[t])) {
            std::ostringstream os;
            os << "non-finite y at row " << t;
            throw ValidationError(os.str());
        }
    for (Index k = 0; k < X.cols(); ++k)
        for (Index t = 0; t < X.rows(); ++t)
            if (!std::isfinite(X(t, k))) {
                std::ostringstream os;
                os << "non-finite X at row " << t << ", column " << k;
                throw ValidationError(os.str());
            }
}

void LawOfMotion::validate() const
{
    if (kind == LawKind::AutoRegressive && !(phi > 0.0 && phi <= 1.0))
        throw ValidationError("autoregressive law requires 0 < phi <= 1");
}

std::string LawOfMotion::name() const
{
    switch (kind) {
    case LawKind::RandomWalk: return "rw";
    case LawKind::RandomWalkWithDrift: return "rw-drift";
    case LawKind::LocalLevel: return "local-level";
    case LawKind::AutoRegressive: {
        std::ostringstream os;
        os << "ar:" << phi;
        return os.str();
    }
    }
    return "rw";
}

LawOfMotion LawOfMotion::parse(const std::string& text)
{
    if (text == "rw") return random_walk();
    if (text == "rw-drift") return random_walk_with_drift();
    if (text == "local-level") return local_level();
    if (text.rfind("ar:", 0) == 0) {
        std::size_t used = 0;
        double phi = 0.0;
        try {
            phi = std::stod(text.substr(3), &used);
        } catch (const std::exception&) {
            throw ValidationError("cannot parse law '" + text + "'");
        }
        if (used != text.size() - 3) throw ValidationError("cannot parse law '" + text + "'");
        LawOfMotion law = autoregressive(phi);
        law.validate();
        return law;
    }
    throw ValidationError("unknown law '" + text + "'");
}

Matrix build_summation_matrix(Index T, const LawOfMotion& law)
{
    if (T < 2) throw DimensionError("summation matrix needs T >= 2");
    law.validate();
    Matrix C = Matrix::Zero(T, T);
    switch (law.kind) {
    case LawKind::RandomWalk:
    case LawKind::RandomWalkWithDrift:
        for (Index t = 0; t < T; ++t)
            for (Index s = 0; s <= t; ++s) C(t, s) = 1.0;
        break;
    case LawKind::LocalLevel:
        // (C_rw)^2 has entry t - s + 1 on and below the diagonal.
        for (Index t = 0; t < T; ++t)
            for (Index s = 0; s <= t; ++s) C(t, s) = static_cast<double>(t - s + 1);
        break;
    case LawKind::AutoRegressive:
        for (Index t = 0; t < T; ++t) {
            double p = 1.0;
            for (Index s = t; s >= 0; --s) {
                C(t, s) = p;
                p *= law.phi;
            }
        }
        break;
    }
    return C;
}

std::vector<Index> BasisExpansion::beta0_columns() const
{
    std::vector<Index> out;
    for (Index j = 0; j < blocks(); ++j) out.push_back(column(j, 0));
    return out;
}

std::vector<Index> BasisExpansion::u_columns() const
{
    std::vector<Index> out;
    for (Index j = 0; j < blocks(); ++j)
        for (Index tau = 1; tau < T; ++tau) out.push_back(column(j, tau));
    return out;
}

Matrix BasisExpansion::design() const
{
    if (Z.size() > 0) return Z;
    Matrix out(T, blocks() * T);
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < blocks(); ++j)
        out.middleCols(j * T, T) = regressors.col(j).asDiagonal() * C;
    return out;
}

Matrix BasisExpansion::beta0_design() const
{
    return regressors.array().colwise() * c1.array();
}

BasisExpansion build_expansion(const RegressionData& data, const LawOfMotion& law, bool materialize)
{
    data.validate();
    law.validate();
    const Index T = data.T();
    const Index K = data.K();

    BasisExpansion e;
    e.law = law;
    e.T = T;
    e.K = K;
    e.C = build_summation_matrix(T, law);

    const bool drift = law.kind == LawKind::RandomWalkWithDrift;
    const Index blocks = drift ? 2 * K : K;
    e.regressors.resize(T, blocks);
    e.modulation = Matrix::Ones(T, blocks);
    e.source.resize(blocks);
    for (Index k = 0; k < K; ++k) {
        e.regressors.col(k) = data.X.col(k);
        e.source[k] = k;
    }
    if (drift) {
        Vector trend(T);
        for (Index t = 0; t < T; ++t) trend[t] = static_cast<double>(t + 1) / static_cast<double>(T);
        for (Index k = 0; k < K; ++k) {
            e.regressors.col(K + k) = data.X.col(k).cwiseProduct(trend);
            e.modulation.col(K + k) = trend;
            e.source[K + k] = k;
        }
    }

    e.c1 = e.C.col(0);
    e.c_inverse = kernels::short_inverse_column(e.C);
    const Matrix Cu = e.C.rightCols(T - 1);
    e.G_u = Cu * Cu.transpose();

    if (materialize) e.Z = e.design();
    return e;
}

std::pair<Matrix, Vector> apply_gls_weights(const Matrix& Z, const Vector& y, const Vector& sigma_eps_t,
                                            const Vector& omega_theta_diag)
{
    if (Z.rows() != y.size() || sigma_eps_t.size() != y.size())
        throw DimensionError("apply_gls_weights: row dimension mismatch");
    if (omega_theta_diag.size() != Z.cols())
        throw DimensionError("apply_gls_weights: omega_theta length must equal Z columns");
    for (Index t = 0; t < sigma_eps_t.size(); ++t)
        if (!(sigma_eps_t[t] > 0.0)) throw ValidationError("residual variance must be positive");
    for (Index j = 0; j < omega_theta_diag.size(); ++j)
        if (!(omega_theta_diag[j] >= 0.0)) throw ValidationError("prior variance must be nonnegative");

    const Vector row_scale = sigma_eps_t.cwiseSqrt().cwiseInverse();
    const Vector col_scale = omega_theta_diag.cwiseSqrt();
    Matrix Zt = row_scale.asDiagonal() * Z * col_scale.asDiagonal();
    Vector yt = row_scale.cwiseProduct(y);
    return {std::move(Zt), std::move(yt)};
}

Matrix block_paths(const Vector& theta, const BasisExpansion& e)
{
    if (theta.size() != e.blocks() * e.T) throw DimensionError("theta length must equal blocks*T");
    const Eigen::Map<const Matrix> Theta(theta.data(), e.T, e.blocks());
    if (e.c_inverse.size() > 0) return kernels::recursive_paths(e.c_inverse, Theta, Parallelism{1});
    return e.C.triangularView<Eigen::Lower>() * Theta;
}

Matrix drift_scores(const BasisExpansion& e, const Matrix& A, const Vector& alpha, const Parallelism& par)
{
    if (A.rows() != e.T || alpha.size() != e.T) throw DimensionError("drift_scores: shape mismatch");
    if (e.c_inverse.size() > 0) return kernels::recursive_drift_scores(e.c_inverse, A, alpha, par);
    return kernels::drift_scores(e.C, A, alpha, par);
}

Matrix recover_beta(const Vector& theta, const BasisExpansion& e)
{
    return beta_from_paths(block_paths(theta, e), e);
}

Vector apply_design(const Vector& theta, const BasisExpansion& e)
{
    return fitted_from_paths(block_paths(theta, e), e);
}

Matrix beta_from_paths(const Matrix& paths, const BasisExpansion& e)
{
    Matrix beta = Matrix::Zero(e.T, e.K);
    for (Index j = 0; j < e.blocks(); ++j)
        beta.col(e.source[j]) += paths.col(j).cwiseProduct(e.modulation.col(j));
    return beta;
}

Vector fitted_from_paths(const Matrix& paths, const BasisExpansion& e)
{
    return paths.cwiseProduct(e.regressors).rowwise().sum();
}

} // namespace tvp
