#include <tvp/factors.hpp>

#include <cmath>

namespace tvp {

namespace {

// Rank-r truncation of U' = A S B'; factors = sqrt(n) A', loadings = B S / sqrt(n).
FactorStructure from_svd(const Matrix& U, Index r, double total_energy)
{
    const Index n = U.rows();
    const Index K = U.cols();
    FactorStructure fs;
    fs.rank = r;
    fs.loadings = Matrix::Zero(K, r);
    fs.factors = Matrix::Zero(r, n);
    fs.explained_variance = Vector::Zero(r);
    if (r == 0) return fs;
    Eigen::BDCSVD<Matrix> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sn = std::sqrt(static_cast<double>(n));
    for (Index j = 0; j < r; ++j) {
        Vector a = svd.matrixU().col(j);
        Vector b = svd.matrixV().col(j);
        Index arg;
        b.cwiseAbs().maxCoeff(&arg);
        if (b[arg] < 0.0) {
            a = -a;
            b = -b;
        }
        const double s = svd.singularValues()[j];
        fs.factors.row(j) = sn * a.transpose();
        fs.loadings.col(j) = b * (s / sn);
        fs.explained_variance[j] = total_energy > 0.0 ? s * s / total_energy : 0.0;
    }
    return fs;
}

} // namespace

FactorStructure extract_factors(const Matrix& U, double variance_threshold, Index max_rank)
{
    if (!U.allFinite()) throw ValidationError("extract_factors: U must be finite");
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0))
        throw ValidationError("extract_factors: threshold must lie in (0, 1]");
    const double total = U.squaredNorm();
    if (!(total > 1e-300)) return from_svd(U, 0, 0.0);
    Eigen::BDCSVD<Matrix> svd(U);
    const Vector sv = svd.singularValues();
    const Index cap = std::min<Index>({max_rank, U.rows(), U.cols()});
    Index r = 0;
    double acc = 0.0;
    while (r < cap) {
        acc += sv[r] * sv[r];
        ++r;
        if (acc >= variance_threshold * total * (1.0 - 1e-12)) break;
    }
    return from_svd(U, r, total);
}

Index path_variance_rank(const Matrix& U, double variance_threshold, Index max_rank)
{
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0))
        throw ValidationError("path_variance_rank: threshold must lie in (0, 1]");
    Matrix P = U;
    for (Index t = 1; t < P.rows(); ++t) P.row(t) += P.row(t - 1);
    const double total = P.squaredNorm();
    if (!(total > 1e-300)) return 0;
    Eigen::BDCSVD<Matrix> svd(P);
    const Vector sv = svd.singularValues();
    const Index cap = std::min<Index>({max_rank, P.rows(), P.cols()});
    Index r = 0;
    double acc = 0.0;
    while (r < cap) {
        acc += sv[r] * sv[r];
        ++r;
        if (acc >= variance_threshold * total * (1.0 - 1e-12)) break;
    }
    return r;
}

FactorStructure normalize_factors(const Matrix& loadings, const Matrix& factors)
{
    const Matrix U = (loadings * factors).transpose();
    const double total = U.squaredNorm();
    if (!(total > 1e-300)) return from_svd(U, 0, 0.0);
    Eigen::BDCSVD<Matrix> svd(U);
    const Vector sv = svd.singularValues();
    Index r = 0;
    const Index cap = std::min<Index>(loadings.cols(), sv.size());
    while (r < cap && sv[r] > 1e-12 * sv[0]) ++r;
    return from_svd(U, r, total);
}

} // namespace tvp
