#include <tvp/estimators.hpp>

#include <cmath>

namespace tvp {

Standardization fit_standardization(const Matrix& X)
{
    Standardization s;
    s.x_scale = Vector::Ones(X.cols());
    const double n = static_cast<double>(X.rows());
    for (Index k = 0; k < X.cols(); ++k) {
        const double mean = X.col(k).mean();
        const double var = (X.col(k).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        // Constant columns (intercepts) keep their natural scale.
        if (sd > 1e-12 * std::max(1.0, std::abs(mean))) s.x_scale[k] = sd;
    }
    return s;
}

RegressionData apply_standardization(const RegressionData& data, const Standardization& s)
{
    if (s.x_scale.size() != data.K()) throw DimensionError("standardization: scale length must equal K");
    RegressionData out = data;
    for (Index k = 0; k < data.K(); ++k) out.X.col(k) /= s.x_scale[k];
    return out;
}

TvpEstimate unstandardize(const TvpEstimate& est, const Standardization& s, const BasisExpansion& e)
{
    if (s.x_scale.size() != e.K) throw DimensionError("unstandardize: scale length must equal K");
    TvpEstimate out = est;
    for (Index k = 0; k < e.K; ++k) out.beta.col(k) /= s.x_scale[k];
    for (Index j = 0; j < e.blocks(); ++j) out.theta.segment(j * e.T, e.T) /= s.x_scale[e.source[j]];
    if (out.bands) {
        for (Index k = 0; k < e.K; ++k) {
            out.bands->lower.col(k) /= s.x_scale[k];
            out.bands->upper.col(k) /= s.x_scale[k];
        }
    }
    return out;
}

} // namespace tvp
