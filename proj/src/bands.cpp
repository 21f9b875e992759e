#include <tvp/estimators.hpp>

#include <boost/math/distributions/normal.hpp>

namespace tvp {

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: probability must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

Bands credible_bands(const TvpEstimate& estimate, const BasisExpansion& e, double level,
                     const PosteriorOptions& options)
{
    if (!(level >= 0.0 && level < 1.0)) throw DomainError("credible_bands: level must lie in [0, 1)");
    Bands b;
    b.level = level;
    if (level == 0.0) {
        b.lower = estimate.beta;
        b.upper = estimate.beta;
        return b;
    }
    const double z = normal_quantile(0.5 + 0.5 * level);
    const double s2 = residual_variance(e, estimate.profile, estimate.residuals);
    const PosteriorVariance pv = posterior_variance(e, estimate.profile, s2, options);
    b.lower = estimate.beta - z * pv.sd;
    b.upper = estimate.beta + z * pv.sd;
    return b;
}

} // namespace tvp
