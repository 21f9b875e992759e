#include <tvp/estimators.hpp>
#include <tvp/kernels.hpp>

#include <cmath>
#include <limits>

namespace tvp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double relative_change(double a, double b)
{
    if (std::isinf(a) && std::isinf(b)) return 0.0;
    if (std::isinf(a) || std::isinf(b)) return kInf;
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace

Vector glrr_penalty_weights(const GlrrState& state, double delta, double selection_threshold)
{
    const Index J = state.first_stage_sigma_u.size();
    if (state.current_sigma_u.size() != J) throw DimensionError("glrr_penalty_weights: state size mismatch");
    const double a = state.mix_alpha;
    const double scale = state.tilde_lambda * static_cast<double>(state.blocks);
    Vector w(J);
    for (Index k = 0; k < J; ++k) {
        const double s1 = state.first_stage_sigma_u[k];
        const double sd = std::sqrt(std::max(0.0, state.current_sigma_u[k]));
        if (!(s1 > 0.0) || sd < selection_threshold) {
            w[k] = kInf;
            continue;
        }
        w[k] = scale * (a / s1 + (1.0 - a) / (sd + delta));
    }
    return w;
}

GlrrResult estimate_glrr(const RegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                         const GlrrOptions& options)
{
    if (!(options.mix_alpha > 0.0 && options.mix_alpha < 1.0))
        throw ValidationError("estimate_glrr: mix_alpha must lie in (0, 1)");
    GlrrResult out;
    out.first_stage = estimate_2srr(data, law, spec, options.first_stage);
    const TwoStepResult& fs = out.first_stage;
    const RegressionData sdata = apply_standardization(data, fs.scaling);
    const BasisExpansion e = build_expansion(sdata, law, false);
    const Index T = e.T;
    const Index J = e.blocks();
    const Parallelism& par = options.first_stage.par;

    VarianceProfile profile = fs.standardized.profile;
    GlrrState state;
    state.mix_alpha = options.mix_alpha;
    state.tilde_lambda = profile.lambda;
    state.blocks = J;
    const double unit = state.tilde_lambda * static_cast<double>(J);
    // Shapes live in units where the homogeneous prior variance is one.
    state.first_stage_sigma_u = profile.sigma_u_k * unit;

    TvpEstimate current = fs.standardized;
    Vector weights = Vector::Constant(J, unit);
    for (Index k = 0; k < J; ++k)
        weights[k] = profile.sigma_u_k[k] > 0.0 ? 1.0 / profile.sigma_u_k[k] : kInf;

    for (Index it = 1; it <= options.max_iterations; ++it) {
        const Matrix U = drift_matrix(current.theta, e);
        state.current_sigma_u = U.colwise().squaredNorm().transpose() / static_cast<double>(T - 1) * unit;
        state.iteration = it;
        const Vector next = glrr_penalty_weights(state, options.delta, options.selection_threshold);
        state.penalty_weights = next;

        double change = 0.0;
        for (Index k = 0; k < J; ++k) change = std::max(change, relative_change(next[k], weights[k]));
        weights = next;

        for (Index k = 0; k < J; ++k) profile.sigma_u_k[k] = std::isinf(weights[k]) ? 0.0 : 1.0 / weights[k];
        if (options.refresh_volatility && options.first_stage.volatility)
            profile.sigma_eps_t = normalize_mean_one(fit_garch11(current.residuals).sigma2);
        current = generalized_dual_ridge(e, sdata.y, profile, par);
        state.converged = change < options.tolerance;
        out.history.push_back(state);
        if (state.converged) break;
    }

    if (options.zero_block_check) {
        // Limit of the weight iteration: penalty kappa |u_k| per block with
        // kappa = 2 (1 - alpha) sqrt(tilde_lambda J (T - 1)). Block k is zero at
        // the optimum when |Z_uk' Omega^{-1} r| <= kappa / 2.
        const double half_kappa = (1.0 - options.mix_alpha) * std::sqrt(unit * static_cast<double>(T - 1));
        const Vector scaled = current.residuals.cwiseQuotient(profile.sigma_eps_t);
        const Matrix g = drift_scores(e, e.regressors, scaled, par);
        bool changed = false;
        for (Index k = 0; k < J; ++k)
            if (profile.sigma_u_k[k] > 0.0 && g.col(k).norm() <= half_kappa) {
                profile.sigma_u_k[k] = 0.0;
                state.penalty_weights[k] = kInf;
                changed = true;
            }
        if (changed) current = generalized_dual_ridge(e, sdata.y, profile, par);
    }

    if (options.final_cv) {
        const CvResult cv = kfold_cv(e, sdata.y, spec, profile, par);
        profile.sigma_u_k *= profile.lambda / cv.best_lambda;
        profile.lambda = cv.best_lambda;
        current = generalized_dual_ridge(e, sdata.y, profile, par);
    }
    if (options.first_stage.bands_level) current.bands = credible_bands(current, e, *options.first_stage.bands_level);

    out.selected.assign(e.K, false);
    for (Index j = 0; j < J; ++j)
        if (profile.sigma_u_k[j] > 0.0) out.selected[e.source[j]] = true;
    out.state = state;
    out.estimate = unstandardize(current, fs.scaling, e);
    return out;
}

AdaptiveRidgeResult adaptive_ridge(const Matrix& A, const Vector& y, double tilde_lambda, double mix_alpha,
                                   const Vector& s1, double unit, Index max_iterations, double tolerance,
                                   double delta)
{
    const Index p = A.cols();
    if (s1.size() != p) throw DimensionError("adaptive_ridge: s1 length must equal column count");
    const Matrix G = A.transpose() * A;
    const Vector c = A.transpose() * y;
    GlrrState state;
    state.mix_alpha = mix_alpha;
    state.tilde_lambda = tilde_lambda;
    state.blocks = 1;
    state.first_stage_sigma_u = s1;

    AdaptiveRidgeResult out;
    // Start from the ridge fit with the first-stage weights.
    Vector w = tilde_lambda * s1.cwiseInverse();
    out.coef = (G + Matrix(w.asDiagonal())).ldlt().solve(c);
    for (Index it = 1; it <= max_iterations; ++it) {
        state.current_sigma_u = out.coef.cwiseAbs2() * unit;
        w = glrr_penalty_weights(state, delta, 1e-12);
        std::vector<Index> active;
        for (Index j = 0; j < p; ++j)
            if (std::isfinite(w[j])) active.push_back(j);
        Vector next = Vector::Zero(p);
        if (!active.empty()) {
            const Index n = static_cast<Index>(active.size());
            Matrix Ga(n, n);
            Vector ca(n);
            for (Index a = 0; a < n; ++a) {
                ca[a] = c[active[a]];
                for (Index b = 0; b < n; ++b) Ga(a, b) = G(active[a], active[b]);
                Ga(a, a) += w[active[a]];
            }
            const Vector sol = Ga.ldlt().solve(ca);
            for (Index a = 0; a < n; ++a) next[active[a]] = sol[a];
        }
        const double step = (next - out.coef).cwiseAbs().maxCoeff();
        out.coef = next;
        out.iterations = it;
        if (step < tolerance) {
            out.converged = true;
            break;
        }
    }
    return out;
}

} // namespace tvp
