#include "grrrr_detail.hpp"

#include <tvp/kernels.hpp>

#include <cmath>
#include <sstream>

namespace tvp {

using detail::drift_from_factors;
using detail::loading_design;
using detail::loading_penalty;
using detail::reduced_rank_fit;

double grrrr_objective(const BasisExpansion& e, const Vector& y, const Vector& omega, const Vector& b,
                       const Matrix& loadings, const Matrix& factors, double lambda_f, double xi, double mixing,
                       double mu)
{
    const Vector r = y - reduced_rank_fit(e, b, loadings, factors);
    return r.cwiseAbs2().cwiseQuotient(omega).sum() + lambda_f * factors.squaredNorm() + mu * b.squaredNorm() +
           loading_penalty(loadings, xi, mixing, e.T);
}

namespace detail {

// Exact ridge solve for F and b given the loadings, through the T x T dual:
//   V = Omega + (Xbar Xbar') .* G_u / lambda_f,  Xbar = X Lambda.
FactorStep factor_step(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& loadings,
                       double lambda_f, double mu, const Parallelism& par)
{
    const Index r = loadings.cols();
    const Matrix xbar = e.regressors * loadings;
    Matrix V = r > 0 ? kernels::hadamard_gram(xbar, Vector::Constant(r, 1.0 / lambda_f), e.G_u, par)
                     : Matrix(Matrix::Zero(e.T, e.T));
    V.diagonal() += omega;
    const DualSystem sys(V, e.beta0_design(), mu);
    Matrix B, A;
    sys.solve(y, B, A);
    FactorStep out;
    out.b = B.col(0);
    out.F = r > 0 ? Matrix(drift_scores(e, xbar, A.col(0), par).transpose() / lambda_f)
                  : Matrix(0, e.T - 1);
    return out;
}

void loading_penalties(Index J, Index p, double xi, double mixing, double mu, Index T, Vector& l1, Vector& l2)
{
    l1 = Vector::Zero(p);
    l2 = Vector::Zero(p);
    l2.head(J).setConstant(mu / static_cast<double>(T));
    l1.tail(p - J).setConstant(xi * mixing);
    l2.tail(p - J).setConstant(xi * (1.0 - mixing));
}

LoadingStep loading_step(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& F,
                         const Matrix& loadings_warm, const Vector& b_warm, double xi, double mixing, double mu,
                         double tolerance)
{
    const Index J = e.blocks();
    const Index r = F.rows();
    const Matrix A = loading_design(e, F, omega);
    const Vector yt = y.cwiseQuotient(omega.cwiseSqrt());
    const Index p = A.cols();
    Vector l1, l2;
    loading_penalties(J, p, xi, mixing, mu, e.T, l1, l2);
    Vector warm(p);
    warm.head(J) = b_warm;
    for (Index q = 0; q < r; ++q) warm.segment(J + q * J, J) = loadings_warm.col(q);
    ElasticNetOptions opt;
    opt.tolerance = tolerance;
    const ElasticNetFit fit = coordinate_descent(A, yt, l1, l2, warm, opt);
    LoadingStep out;
    out.b = fit.coef.head(J);
    out.loadings.resize(J, r);
    for (Index q = 0; q < r; ++q) out.loadings.col(q) = fit.coef.segment(J + q * J, J);
    return out;
}

double choose_xi(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& F, double mixing,
                 double mu, Index grid_points, std::uint64_t seed)
{
    const Index J = e.blocks();
    const Matrix A = loading_design(e, F, omega);
    const Vector yt = y.cwiseQuotient(omega.cwiseSqrt());
    const Index p = A.cols();
    Vector pf = Vector::Ones(p);
    pf.head(J).setZero();
    Vector base = Vector::Zero(p);
    base.head(J).setConstant(mu / static_cast<double>(e.T));
    return elastic_net_cv(A, yt, mixing, pf, base, 5, seed, grid_points).xi;
}

double choose_lambda_f(const BasisExpansion& e, const Vector& y, const Vector& omega, const Matrix& loadings,
                       double center, const GrrrrOptions& opt, const CvSpec& spec)
{
    const Index G = opt.lambda_f_grid_points;
    Vector grid(G);
    for (Index g = 0; g < G; ++g)
        grid[g] = center * std::pow(10.0, -2.0 + 4.0 * static_cast<double>(g) / static_cast<double>(G - 1));
    const Matrix xbar = e.regressors * loadings;
    const Matrix Ku1 = kernels::hadamard_gram(xbar, Vector::Ones(loadings.cols()), e.G_u, opt.par);
    const auto folds = assign_folds(e.T, spec.n_folds, spec.assignment, spec.seed);
    const KernelCvOutput raw = kernel_cv(Ku1, e.beta0_design(), omega, y, folds, spec.n_folds, grid,
                                         Vector::Constant(1, opt.beta0_ridge), opt.par);
    return reduce_cv(raw, grid, Vector::Constant(1, opt.beta0_ridge)).best_lambda;
}

} // namespace detail

namespace {

using detail::FactorStep;
using detail::LoadingStep;
using detail::factor_step;
using detail::loading_step;
using detail::choose_xi;
using detail::choose_lambda_f;

void check_monotone(double before, double after, double slack, Index it, const char* step)
{
    if (after > before + slack * std::max(1.0, std::abs(before))) {
        std::ostringstream os;
        os << "reduced-rank alternation: objective rose from " << before << " to " << after << " in the " << step
           << " step of iteration " << it;
        throw InvariantError(os.str());
    }
}

// Drops factors whose loading column is identically zero.
void drop_empty_factors(Matrix& loadings, Matrix& F)
{
    std::vector<Index> keep;
    for (Index q = 0; q < loadings.cols(); ++q)
        if (loadings.col(q).cwiseAbs().maxCoeff() > 0.0) keep.push_back(q);
    if (static_cast<Index>(keep.size()) == loadings.cols()) return;
    Matrix L(loadings.rows(), static_cast<Index>(keep.size()));
    Matrix G(static_cast<Index>(keep.size()), F.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        L.col(static_cast<Index>(i)) = loadings.col(keep[i]);
        G.row(static_cast<Index>(i)) = F.row(keep[i]);
    }
    loadings = L;
    F = G;
}

struct Alternation {
    Matrix loadings;
    Matrix F;
    Vector b;
    Vector omega;
};

// Replaces (loadings, F) by the identified pair with the same product. The
// residuals must not move; the objective may, through the penalty split.
void identify(const BasisExpansion& e, const Vector& y, Alternation& s, double lambda_f, double xi, double mix,
              double mu, Index it, GrrrrResult& out)
{
    if (s.loadings.cols() == 0) return;
    const double before = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
    const Vector fit_before = reduced_rank_fit(e, s.b, s.loadings, s.F);
    FactorStructure id = normalize_factors(s.loadings, s.F);
    s.loadings = id.loadings;
    s.F = id.factors;
    const Vector fit_after = reduced_rank_fit(e, s.b, s.loadings, s.F);
    const double scale = std::max(1.0, fit_before.cwiseAbs().maxCoeff());
    if ((fit_after - fit_before).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        std::ostringstream os;
        os << "reduced-rank alternation: identification moved the fit in iteration " << it;
        throw InvariantError(os.str());
    }
    const double after = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
    out.steps.push_back({it, 'n', before, after});
}

// Runs the alternation in place. xi and lambda_f are resolved on the first
// pass when not supplied; sigma2_center anchors the lambda_f grid.
Alternation alternate(const BasisExpansion& e, const Vector& y, Vector omega, Matrix loadings, const GrrrrOptions& opt,
                      const CvSpec& spec, double sigma2_center, GrrrrResult& out)
{
    const double mu = opt.beta0_ridge;
    const double mix = opt.mixing;
    double lambda_f = opt.lambda_f.value_or(0.0);
    double xi = opt.xi.value_or(0.0);
    Alternation s;
    s.loadings = loadings;
    s.F = Matrix::Zero(loadings.cols(), e.T - 1);
    s.b = Vector::Zero(e.blocks());
    s.omega = omega;
    double previous = INFINITY;
    bool frozen = opt.lambda_f && opt.xi;

    for (Index it = 1; it <= opt.max_iterations; ++it) {
        const bool tune = !frozen && (it == 1 || it <= opt.retune_iterations);
        const double lambda_f_last = lambda_f;
        const double xi_last = xi;
        // Factor step.
        if (tune && !opt.lambda_f) {
            lambda_f = s.loadings.cols() > 0
                           ? choose_lambda_f(e, y, s.omega, s.loadings, sigma2_center, opt, spec)
                           : sigma2_center;
        }
        const double before_f =
            grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
        const FactorStep fs = factor_step(e, y, s.omega, s.loadings, lambda_f, mu, opt.par);
        s.F = fs.F;
        s.b = fs.b;
        const double after_f = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
        check_monotone(before_f, after_f, opt.monotone_slack, it, "factor");
        out.steps.push_back({it, 'f', before_f, after_f});
        if (opt.identify_each_step) identify(e, y, s, lambda_f, xi, mix, mu, it, out);

        // Loading step.
        if (tune && !opt.xi)
            xi = s.F.rows() > 0 ? choose_xi(e, y, s.omega, s.F, mix, mu, opt.xi_grid_points, spec.seed) : 0.0;
        const double before_l = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
        if (s.F.rows() > 0) {
            const LoadingStep ls =
                loading_step(e, y, s.omega, s.F, s.loadings, s.b, xi, mix, mu, opt.enet_tolerance);
            s.loadings = ls.loadings;
            s.b = ls.b;
        }
        const double after_l = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
        check_monotone(before_l, after_l, opt.monotone_slack, it, "loading");
        out.steps.push_back({it, 'l', before_l, after_l});
        if (opt.identify_each_step) identify(e, y, s, lambda_f, xi, mix, mu, it, out);

        const Index r_before = s.loadings.cols();
        drop_empty_factors(s.loadings, s.F);
        double current = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
        const double after_last = current;
        if (s.loadings.cols() != r_before) {
            current = grrrr_objective(e, y, s.omega, s.b, s.loadings, s.F, lambda_f, xi, mix, mu);
            check_monotone(after_last, current, opt.monotone_slack, it, "factor-drop");
            out.steps.push_back({it, 'd', after_last, current});
        }

        out.objective_history.push_back(current);
        out.loading_history.push_back(s.loadings);
        out.factor_history.push_back(s.F);
        out.beta0_history.push_back(s.b);
        out.factors = normalize_factors(s.loadings, s.F);
        out.factors.selected_rank_history.push_back(s.loadings.cols());
        out.iterations = it;

        // Convergence is judged only with the hyperparameters held fixed; while
        // they move, the objective is not one function across iterations.
        if (tune && it > 1 && lambda_f == lambda_f_last && xi == xi_last) frozen = true;
        const bool settled = !tune && std::abs(previous - current) < opt.tolerance * std::max(std::abs(current), 1e-300);
        previous = tune ? INFINITY : current;
        if (opt.refresh_volatility) {
            const Vector r = y - reduced_rank_fit(e, s.b, s.loadings, s.F);
            s.omega = normalize_mean_one(fit_garch11(r).sigma2);
        }
        if (settled || s.loadings.cols() == 0) {
            out.converged = true;
            break;
        }
    }
    // Rank history accumulates across iterations; normalize_factors resets it.
    std::vector<Index> ranks;
    for (const auto& L : out.loading_history) ranks.push_back(L.cols());
    out.factors.selected_rank_history = ranks;
    out.xi = xi;
    out.lambda_f = lambda_f;
    return s;
}

TvpEstimate finish_estimate(const BasisExpansion& e, const Vector& y, const Alternation& s, double lambda_f,
                            double mu)
{
    const Matrix U = drift_from_factors(e, s.loadings, s.F);
    VarianceProfile p;
    p.sigma_eps_t = s.omega;
    p.sigma_u_k = U.colwise().squaredNorm().transpose() / static_cast<double>(e.T - 1);
    p.lambda = lambda_f;
    p.lambda0 = mu;
    return assemble_estimate(e, y, s.b, U, p);
}

void check_options(const GrrrrOptions& o)
{
    if (o.max_rank < 1 || o.max_rank > 5) throw ValidationError("GRRRR: max_rank must lie in [1, 5]");
    if (!(o.mixing >= 0.0 && o.mixing <= 1.0)) throw ValidationError("GRRRR: mixing must lie in [0, 1]");
    if (o.xi && !(*o.xi >= 0.0)) throw ValidationError("GRRRR: xi must be nonnegative");
    if (o.lambda_f && !(*o.lambda_f > 0.0)) throw ValidationError("GRRRR: lambda_f must be positive");
    if (o.lambda_f_grid_points < 2) throw ValidationError("GRRRR: lambda_f grid needs two points");
}

} // namespace

GrrrrResult estimate_grrrr(const RegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                           const GrrrrOptions& options)
{
    check_options(options);
    GrrrrResult out;
    TwoStepOptions init = options.init;
    init.standardize = options.standardize;
    init.par = options.par;
    init.bands_level.reset();
    out.initial = estimate_2srr(data, law, spec, init);
    const RegressionData sdata = apply_standardization(data, out.initial.scaling);
    const BasisExpansion e = build_expansion(sdata, law, false);
    const TvpEstimate& first = out.initial.standardized;

    const Matrix U = drift_matrix(first.theta, e);
    const Index rank = std::max<Index>(
        1, path_variance_rank(U, options.variance_threshold, std::min(options.max_rank, e.blocks())));
    const FactorStructure start = extract_factors(U, 1.0, rank);
    const Vector omega = options.refresh_volatility ? first.profile.sigma_eps_t : Vector(Vector::Ones(e.T));

    const Alternation s = alternate(e, sdata.y, omega, start.loadings, options, spec, out.initial.sigma2_eps, out);
    out.sigma_eps_t = s.omega;
    out.estimate = unstandardize(finish_estimate(e, sdata.y, s, out.lambda_f, options.beta0_ridge),
                                 out.initial.scaling, e);
    return out;
}

GrrrrResult grrrr_alternate(const RegressionData& data, const LawOfMotion& law, const Matrix& loadings_init,
                            const Vector& omega, const GrrrrOptions& options)
{
    if (!options.xi || !options.lambda_f) throw ValidationError("grrrr_alternate: xi and lambda_f must be supplied");
    check_options(options);
    const BasisExpansion e = build_expansion(data, law, false);
    if (loadings_init.rows() != e.blocks()) throw DimensionError("grrrr_alternate: loadings need one row per block");
    if (omega.size() != e.T) throw DimensionError("grrrr_alternate: omega length must equal T");
    GrrrrResult out;
    const Alternation s = alternate(e, data.y, omega, loadings_init, options, CvSpec{}, 1.0, out);
    out.sigma_eps_t = s.omega;
    out.estimate = finish_estimate(e, data.y, s, out.lambda_f, options.beta0_ridge);
    return out;
}

} // namespace tvp
