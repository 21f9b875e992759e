#include "grrrr_detail.hpp"

#include <tvp/kernels.hpp>

#include <cmath>
#include <sstream>

namespace tvp {

using detail::factor_paths;
using detail::loading_design;
using detail::loading_penalty;
using detail::reduced_rank_fit;

namespace {

void check_loadings(const BasisExpansion& e, const std::vector<Matrix>& loadings)
{
    if (loadings.empty()) throw DimensionError("mv_factor_step: need one loading matrix per equation");
    for (const auto& L : loadings)
        if (L.rows() != e.blocks() || L.cols() != loadings.front().cols())
            throw DimensionError("mv_factor_step: loading matrices must be blocks x r with a common r");
}

// Primal normal equations over [f_1 .. f_r, b_1 .. b_M].
MvFactorStep primal_factor_step(const BasisExpansion& e, const Matrix& Y, const Matrix& omega,
                                const std::vector<Matrix>& loadings, double lambda_f, double mu)
{
    const Index T = e.T;
    const Index M = Y.cols();
    const Index J = e.blocks();
    const Index r = loadings.front().cols();
    const Index nf = r * (T - 1);
    const Index n = nf + M * J;
    const Matrix Cu = e.C.rightCols(T - 1);
    const Matrix X0 = e.beta0_design();
    Matrix P = Matrix::Zero(n, n);
    Vector rhs = Vector::Zero(n);
    for (Index m = 0; m < M; ++m) {
        const Vector w = omega.col(m).cwiseSqrt().cwiseInverse();
        const Matrix xbar = e.regressors * loadings[m];
        Matrix D(T, nf + J);
        for (Index q = 0; q < r; ++q) D.middleCols(q * (T - 1), T - 1) = xbar.col(q).asDiagonal() * Cu;
        D.rightCols(J) = X0;
        D = w.asDiagonal() * D;
        const Vector yt = w.cwiseProduct(Y.col(m));
        const Matrix DD = D.transpose() * D;
        const Vector Dy = D.transpose() * yt;
        const Index off = nf + m * J;
        P.topLeftCorner(nf, nf) += DD.topLeftCorner(nf, nf);
        P.block(0, off, nf, J) += DD.topRightCorner(nf, J);
        P.block(off, 0, J, nf) += DD.bottomLeftCorner(J, nf);
        P.block(off, off, J, J) += DD.bottomRightCorner(J, J);
        rhs.head(nf) += Dy.head(nf);
        rhs.segment(off, J) += Dy.tail(J);
    }
    P.diagonal().head(nf).array() += lambda_f;
    P.diagonal().tail(M * J).array() += mu;
    const SpdFactor f = factor_spd(P, "stacked factor-step precision");
    const Vector sol = f.llt.solve(rhs);
    MvFactorStep out;
    out.primal = true;
    out.factors.resize(r, T - 1);
    for (Index q = 0; q < r; ++q) out.factors.row(q) = sol.segment(q * (T - 1), T - 1).transpose();
    out.beta0.resize(J, M);
    for (Index m = 0; m < M; ++m) out.beta0.col(m) = sol.segment(nf + m * J, J);
    return out;
}

// Dual form over the MT stacked observations.
MvFactorStep dual_factor_step(const BasisExpansion& e, const Matrix& Y, const Matrix& omega,
                              const std::vector<Matrix>& loadings, double lambda_f, double mu)
{
    const Index T = e.T;
    const Index M = Y.cols();
    const Index J = e.blocks();
    const Index r = loadings.front().cols();
    std::vector<Matrix> xbar(M);
    for (Index m = 0; m < M; ++m) xbar[m] = e.regressors * loadings[m];
    Matrix V = Matrix::Zero(M * T, M * T);
    for (Index m = 0; m < M; ++m)
        for (Index m2 = 0; m2 <= m; ++m2) {
            const Matrix blk = (xbar[m] * xbar[m2].transpose()).cwiseProduct(e.G_u) / lambda_f;
            V.block(m * T, m2 * T, T, T) = blk;
            V.block(m2 * T, m * T, T, T) = blk.transpose();
        }
    for (Index m = 0; m < M; ++m) V.diagonal().segment(m * T, T) += omega.col(m);
    Matrix X0 = Matrix::Zero(M * T, M * J);
    const Matrix x0 = e.beta0_design();
    for (Index m = 0; m < M; ++m) X0.block(m * T, m * J, T, J) = x0;
    Vector y(M * T);
    for (Index m = 0; m < M; ++m) y.segment(m * T, T) = Y.col(m);
    const DualSystem sys(V, X0, mu);
    Matrix B, A;
    sys.solve(y, B, A);
    MvFactorStep out;
    out.factors = Matrix::Zero(r, T - 1);
    for (Index m = 0; m < M; ++m)
        out.factors += drift_scores(e, xbar[m], A.col(0).segment(m * T, T)).transpose() / lambda_f;
    out.beta0.resize(J, M);
    for (Index m = 0; m < M; ++m) out.beta0.col(m) = B.col(0).segment(m * J, J);
    return out;
}

double mv_objective(const BasisExpansion& e, const Matrix& Y, const Matrix& omega, const Matrix& beta0,
                    const std::vector<Matrix>& loadings, const Matrix& F, double lambda_f, const Vector& xi,
                    double mixing, double mu)
{
    double J = lambda_f * F.squaredNorm();
    for (Index m = 0; m < Y.cols(); ++m) {
        const Vector r = Y.col(m) - reduced_rank_fit(e, beta0.col(m), loadings[m], F);
        J += r.cwiseAbs2().cwiseQuotient(omega.col(m)).sum() + mu * beta0.col(m).squaredNorm() +
             loading_penalty(loadings[m], xi[m], mixing, e.T);
    }
    return J;
}

void check_step(double before, double after, double slack, Index it, const char* step)
{
    if (after > before + slack * std::max(1.0, std::abs(before))) {
        std::ostringstream os;
        os << "multivariate reduced-rank alternation: objective rose from " << before << " to " << after
           << " in the " << step << " step of iteration " << it;
        throw InvariantError(os.str());
    }
}

} // namespace

MvFactorStep mv_factor_step(const BasisExpansion& e, const Matrix& Y, const Matrix& omega,
                            const std::vector<Matrix>& loadings, double lambda_f, double mu, bool force_primal,
                            bool force_dual)
{
    check_loadings(e, loadings);
    if (Y.rows() != e.T || omega.rows() != e.T || omega.cols() != Y.cols() ||
        static_cast<Index>(loadings.size()) != Y.cols())
        throw DimensionError("mv_factor_step: Y, omega and loadings must agree on T and M");
    const Index r = loadings.front().cols();
    if (r == 0) {
        MvFactorStep out;
        out.factors = Matrix(0, e.T - 1);
        out.beta0.resize(e.blocks(), Y.cols());
        for (Index m = 0; m < Y.cols(); ++m) {
            const DualSystem sys(Matrix(omega.col(m).asDiagonal()), e.beta0_design(), mu);
            Matrix B, A;
            sys.solve(Y.col(m), B, A);
            out.beta0.col(m) = B.col(0);
        }
        return out;
    }
    const Index M = Y.cols();
    const bool primal = force_primal || (!force_dual && M * e.T > r * (e.T - 1) + M * e.blocks());
    return primal ? primal_factor_step(e, Y, omega, loadings, lambda_f, mu)
                  : dual_factor_step(e, Y, omega, loadings, lambda_f, mu);
}

MvLoadingStep mv_loadings_step(const BasisExpansion& e, const Matrix& Y, const Matrix& omega, const Matrix& factors,
                               const std::vector<Matrix>& loadings_warm, const Matrix& beta0_warm, const Vector& xi,
                               double mixing, double mu)
{
    const Index M = Y.cols();
    if (static_cast<Index>(loadings_warm.size()) != M || xi.size() != M || beta0_warm.cols() != M)
        throw DimensionError("mv_loadings_step: one warm start and one xi per equation");
    MvLoadingStep out;
    out.loadings.resize(M);
    out.beta0.resize(e.blocks(), M);
    // The stacked design is block diagonal across equations, so each
    // equation's elastic net is solved on its own.
    for (Index m = 0; m < M; ++m) {
        const detail::LoadingStep ls = detail::loading_step(e, Y.col(m), omega.col(m), factors, loadings_warm[m],
                                                            beta0_warm.col(m), xi[m], mixing, mu, 1e-10);
        out.loadings[m] = ls.loadings;
        out.beta0.col(m) = ls.b;
    }
    return out;
}

MvGrrrrResult estimate_mv_grrrr(const MultiRegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                                const GrrrrOptions& options)
{
    const Index M = data.Y.cols();
    if (M < 1) throw DimensionError("estimate_mv_grrrr: need at least one equation");
    if (data.Y.rows() != data.X.rows()) throw DimensionError("estimate_mv_grrrr: Y and X row counts differ");
    MvGrrrrResult out;
    if (M == 1) {
        RegressionData d{data.Y.col(0), data.X, data.series_names};
        GrrrrResult g = estimate_grrrr(d, law, spec, options);
        out.estimates.push_back(g.estimate);
        out.factors = g.factors;
        out.objective_history = g.objective_history;
        out.converged = g.converged;
        out.iterations = g.iterations;
        return out;
    }
    if (options.max_rank < 1 || options.max_rank > 5) throw ValidationError("MV-GRRRR: max_rank must lie in [1, 5]");

    const Standardization scaling =
        options.standardize ? fit_standardization(data.X) : Standardization{Vector::Ones(data.X.cols())};
    TwoStepOptions init = options.init;
    init.standardize = options.standardize;
    init.par = options.par;
    init.bands_level.reset();

    std::vector<TwoStepResult> first;
    for (Index m = 0; m < M; ++m)
        first.push_back(estimate_2srr(RegressionData{data.Y.col(m), data.X, data.series_names}, law, spec, init));
    RegressionData sdata{data.Y.col(0), data.X, data.series_names};
    sdata = apply_standardization(sdata, scaling);
    const BasisExpansion e = build_expansion(sdata, law, false);
    const Index T = e.T;
    const Index J = e.blocks();

    Matrix pooled(T - 1, M * J);
    Matrix omega(T, M);
    for (Index m = 0; m < M; ++m) {
        pooled.middleCols(m * J, J) = drift_matrix(first[m].standardized.theta, e);
        omega.col(m) = options.refresh_volatility ? first[m].standardized.profile.sigma_eps_t : Vector(Vector::Ones(T));
    }
    const Index rank =
        std::max<Index>(1, path_variance_rank(pooled, options.variance_threshold, std::min(options.max_rank, J)));
    const FactorStructure start = extract_factors(pooled, 1.0, rank);
    std::vector<Matrix> loadings(M);
    for (Index m = 0; m < M; ++m) loadings[m] = start.loadings.middleRows(m * J, J);

    const double mu = options.beta0_ridge;
    const double mix = options.mixing;
    // lambda_f is shared, so it is the geometric mean of the per-equation choices.
    const auto tune_lambda_f = [&] {
        double logsum = 0.0;
        for (Index m = 0; m < M; ++m)
            logsum += std::log(loadings[m].cols() > 0
                                   ? detail::choose_lambda_f(e, data.Y.col(m), omega.col(m), loadings[m],
                                                             first[m].sigma2_eps, options, spec)
                                   : first[m].sigma2_eps);
        return std::exp(logsum / static_cast<double>(M));
    };
    double lambda_f = options.lambda_f.value_or(0.0);
    Vector xi = Vector::Constant(M, options.xi.value_or(0.0));
    Matrix F = Matrix::Zero(start.rank, T - 1);
    Matrix beta0 = Matrix::Zero(J, M);
    double previous = INFINITY;
    bool frozen = options.lambda_f && options.xi;

    // Rotates the stacked loadings and F to the identified form; the fits must not move.
    const auto identify = [&](Index it) {
        if (F.rows() == 0) return;
        Matrix stacked(M * J, F.rows());
        for (Index m = 0; m < M; ++m) stacked.middleRows(m * J, J) = loadings[m];
        std::vector<Vector> before(M);
        for (Index m = 0; m < M; ++m) before[m] = reduced_rank_fit(e, beta0.col(m), loadings[m], F);
        const FactorStructure id = normalize_factors(stacked, F);
        F = id.factors;
        for (Index m = 0; m < M; ++m) {
            loadings[m] = id.loadings.middleRows(m * J, J);
            const Vector after = reduced_rank_fit(e, beta0.col(m), loadings[m], F);
            if ((after - before[m]).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, before[m].cwiseAbs().maxCoeff())) {
                std::ostringstream os;
                os << "multivariate reduced-rank alternation: identification moved the fit in iteration " << it;
                throw InvariantError(os.str());
            }
        }
    };

    for (Index it = 1; it <= options.max_iterations; ++it) {
        const bool tune = !frozen && (it == 1 || it <= options.retune_iterations);
        const double lambda_f_last = lambda_f;
        const Vector xi_last = xi;
        if (tune && !options.lambda_f) lambda_f = tune_lambda_f();
        const double before_f = mv_objective(e, data.Y, omega, beta0, loadings, F, lambda_f, xi, mix, mu);
        const MvFactorStep fs = mv_factor_step(e, data.Y, omega, loadings, lambda_f, mu);
        F = fs.factors;
        beta0 = fs.beta0;
        out.primal_factor_step = fs.primal;
        const double after_f = mv_objective(e, data.Y, omega, beta0, loadings, F, lambda_f, xi, mix, mu);
        check_step(before_f, after_f, options.monotone_slack, it, "factor");
        if (options.identify_each_step) identify(it);

        if (tune && !options.xi && F.rows() > 0)
            for (Index m = 0; m < M; ++m)
                xi[m] = detail::choose_xi(e, data.Y.col(m), omega.col(m), F, mix, mu, options.xi_grid_points, spec.seed);
        const double before_l = mv_objective(e, data.Y, omega, beta0, loadings, F, lambda_f, xi, mix, mu);
        if (F.rows() > 0) {
            const MvLoadingStep ls = mv_loadings_step(e, data.Y, omega, F, loadings, beta0, xi, mix, mu);
            loadings = ls.loadings;
            beta0 = ls.beta0;
        }
        double current = mv_objective(e, data.Y, omega, beta0, loadings, F, lambda_f, xi, mix, mu);
        check_step(before_l, current, options.monotone_slack, it, "loading");
        if (options.identify_each_step) {
            identify(it);
            current = mv_objective(e, data.Y, omega, beta0, loadings, F, lambda_f, xi, mix, mu);
        }
        if (tune && it > 1 && lambda_f == lambda_f_last && xi == xi_last) frozen = true;

        // A factor leaves once no equation loads on it.
        std::vector<Index> keep;
        for (Index q = 0; q < F.rows(); ++q) {
            double mx = 0.0;
            for (Index m = 0; m < M; ++m) mx = std::max(mx, loadings[m].col(q).cwiseAbs().maxCoeff());
            if (mx > 0.0) keep.push_back(q);
        }
        if (static_cast<Index>(keep.size()) != F.rows()) {
            Matrix F2(static_cast<Index>(keep.size()), T - 1);
            for (std::size_t i = 0; i < keep.size(); ++i) F2.row(static_cast<Index>(i)) = F.row(keep[i]);
            for (Index m = 0; m < M; ++m) {
                Matrix L2(J, static_cast<Index>(keep.size()));
                for (std::size_t i = 0; i < keep.size(); ++i) L2.col(static_cast<Index>(i)) = loadings[m].col(keep[i]);
                loadings[m] = L2;
            }
            F = F2;
            current = mv_objective(e, data.Y, omega, beta0, loadings, F, lambda_f, xi, mix, mu);
        }
        out.objective_history.push_back(current);
        out.iterations = it;

        const bool settled =
            !tune && std::abs(previous - current) < options.tolerance * std::max(std::abs(current), 1e-300);
        previous = tune ? INFINITY : current;
        if (options.refresh_volatility)
            for (Index m = 0; m < M; ++m) {
                const Vector r = data.Y.col(m) - reduced_rank_fit(e, beta0.col(m), loadings[m], F);
                omega.col(m) = normalize_mean_one(fit_garch11(r).sigma2);
            }
        if (settled || F.rows() == 0) {
            out.converged = true;
            break;
        }
    }

    Matrix stacked(M * J, F.rows());
    for (Index m = 0; m < M; ++m) stacked.middleRows(m * J, J) = loadings[m];
    out.factors = normalize_factors(stacked, F);
    for (Index m = 0; m < M; ++m) {
        const Matrix U = detail::drift_from_factors(e, loadings[m], F);
        VarianceProfile p;
        p.sigma_eps_t = omega.col(m);
        p.sigma_u_k = U.colwise().squaredNorm().transpose() / static_cast<double>(T - 1);
        p.lambda = lambda_f;
        p.lambda0 = mu;
        const TvpEstimate est = assemble_estimate(e, data.Y.col(m), beta0.col(m), U, p);
        out.estimates.push_back(unstandardize(est, scaling, e));
    }
    return out;
}

} // namespace tvp
