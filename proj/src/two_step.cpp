#include <tvp/estimators.hpp>

namespace tvp {

namespace {

GarchFit flat_volatility(Index T)
{
    GarchFit g;
    g.sigma2 = Vector::Ones(T);
    g.note = "volatility step disabled";
    return g;
}

} // namespace

TwoStepResult estimate_2srr(const RegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                            const TwoStepOptions& options)
{
    data.validate();
    TwoStepResult out;
    out.scaling = options.standardize ? fit_standardization(data.X) : Standardization{Vector::Ones(data.K())};
    const RegressionData sdata = apply_standardization(data, out.scaling);
    const BasisExpansion e = build_expansion(sdata, law, false);
    const Index T = e.T;
    const Index J = e.blocks();

    // Step 1: homogeneous variances, lambda and lambda0 by CV.
    out.first_cv = kfold_cv(e, sdata.y, spec, std::nullopt, options.par);
    const double lambda1 = out.first_cv.best_lambda;
    const double lambda0 = out.first_cv.best_lambda0;
    const VarianceProfile p1 = VarianceProfile::homogeneous(T, J, lambda1, lambda0);
    const TvpEstimate first = generalized_dual_ridge(e, sdata.y, p1, options.par);

    // Step 2: residual volatility, mean one.
    out.garch = options.volatility ? fit_garch11(first.residuals) : flat_volatility(T);
    const Vector omega = normalize_mean_one(out.garch.sigma2);

    // Step 3: per-block drift variances, rescaled to the first-stage mean.
    VarianceProfile p2 = p1;
    p2.sigma_eps_t = omega;
    if (options.update_sigma_u) {
        const Matrix U = drift_matrix(first.theta, e);
        Vector s = U.colwise().squaredNorm().transpose() / static_cast<double>(T - 1);
        const double target = 1.0 / (lambda1 * static_cast<double>(J));
        const double m = s.mean();
        p2.sigma_u_k = m > 0.0 ? Vector(s * (target / m)) : p1.sigma_u_k;
    }

    // Step 4: optional second CV on the global scale, then the generalized solve.
    if (spec.refit_second_stage) {
        out.second_cv = kfold_cv(e, sdata.y, spec, p2, options.par);
        const double lambda2 = out.second_cv->best_lambda;
        p2.sigma_u_k *= p2.lambda / lambda2;
        p2.lambda = lambda2;
    }
    TvpEstimate final_est = generalized_dual_ridge(e, sdata.y, p2, options.par);
    out.sigma2_eps = residual_variance(e, p2, final_est.residuals);
    if (options.bands_level) final_est.bands = credible_bands(final_est, e, *options.bands_level);

    out.standardized = final_est;
    out.first_stage = unstandardize(first, out.scaling, e);
    out.estimate = unstandardize(final_est, out.scaling, e);
    return out;
}

} // namespace tvp
