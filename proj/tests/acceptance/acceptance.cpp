// Acceptance harness: one PASS/FAIL line per criterion, followed by the
// measured numbers. Exit status is nonzero when any criterion fails.
#include <tvp/estimators.hpp>
#include <tvp/forecast.hpp>
#include <tvp/simlab.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace tvp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Matrix gaussian(Index r, Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> z;
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// ---------------------------------------------------------------- 1

// theta = (Z' W Z + P)^{-1} Z' W y with W = Omega_eps^{-1}, P the prior precision.
Vector primal_solve(const BasisExpansion& e, const Vector& y, const VarianceProfile& p)
{
    const Matrix Z = e.design();
    const Index n = Z.cols();
    Vector prec(n);
    for (Index j = 0; j < e.blocks(); ++j) {
        prec[e.column(j, 0)] = p.lambda0;
        for (Index tau = 1; tau < e.T; ++tau) prec[e.column(j, tau)] = 1.0 / p.sigma_u_k[j];
    }
    const Vector w = p.sigma_eps_t.cwiseInverse();
    Matrix A = Z.transpose() * w.asDiagonal() * Z;
    A.diagonal() += prec;
    return A.ldlt().solve(Z.transpose() * w.cwiseProduct(y));
}

Outcome criterion_1()
{
    std::mt19937_64 rng(101);
    const std::vector<LawOfMotion> laws = {LawOfMotion::random_walk(), LawOfMotion::random_walk_with_drift(),
                                           LawOfMotion::local_level(), LawOfMotion::autoregressive(0.7)};
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const Index T = 5 + static_cast<Index>(rng() % 36);
        const Index K = 1 + static_cast<Index>(rng() % 4);
        RegressionData d{gaussian(T, 1, rng).col(0), gaussian(T, K, rng), {}};
        const LawOfMotion law = laws[inst % laws.size()];
        const BasisExpansion e = build_expansion(d, law);
        VarianceProfile p;
        p.sigma_eps_t = Vector::NullaryExpr(T, [&] { return uniform(rng, 0.3, 3.0); });
        p.sigma_u_k = Vector::NullaryExpr(e.blocks(), [&] { return std::pow(10.0, uniform(rng, -3.0, 0.5)); });
        p.lambda0 = std::pow(10.0, uniform(rng, -1.0, 1.0));
        p.lambda = 1.0;
        const TvpEstimate dual = generalized_dual_ridge(e, d.y, p);
        const Vector theta = primal_solve(e, d.y, p);
        worst = std::max(worst, (dual.theta - theta).cwiseAbs().maxCoeff());
        worst = std::max(worst, (dual.beta - recover_beta(theta, e)).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-8, fmt("max elementwise |dual - primal| = %.3e over 50 instances (tol 1e-8)", worst)};
}

// ---------------------------------------------------------------- 2-4

StudyResult study(Design design, Index K, double share, std::vector<EstimatorKind> est, Index reps)
{
    DgpSpec s;
    s.design = design;
    s.K = K;
    s.share_varying = share;
    s.noise = NoiseRegime::Low;
    s.T = 300;
    s.seed = 2024;
    StudyConfig c;
    c.setups = {s};
    c.estimators = std::move(est);
    c.replications = reps;
    return run_study(c);
}

double cell_mae(const StudyResult& r, EstimatorKind k)
{
    for (const auto& c : r.cells)
        if (c.estimator == k) return c.mean_mae;
    return NAN;
}

Outcome criterion_2()
{
    const StudyResult r = study(Design::S1, 6, 0.2, {EstimatorKind::TwoStep}, 50);
    const double m = cell_mae(r, EstimatorKind::TwoStep);
    return {m >= 0.075 && m <= 0.145 && r.failures == 0,
            fmt("S1 K=6 share 0.2 Low: 2SRR mean MAE %.4f (band [0.075, 0.145]), failures %ld", m,
                static_cast<long>(r.failures))};
}

Outcome criterion_3()
{
    const StudyResult r = study(Design::S2, 6, 0.2, {EstimatorKind::TwoStep, EstimatorKind::Glrr}, 50);
    const double a = cell_mae(r, EstimatorKind::TwoStep);
    const double g = cell_mae(r, EstimatorKind::Glrr);
    return {g <= a && std::abs(g - 0.098) <= 0.035 && r.failures == 0,
            fmt("S2 K=6 share 0.2 Low: GLRR %.4f vs 2SRR %.4f (need GLRR <= 2SRR and |GLRR - 0.098| <= 0.035), "
                "failures %ld",
                g, a, static_cast<long>(r.failures))};
}

Outcome criterion_4()
{
    const StudyResult r = study(Design::S1, 20, 1.0, {EstimatorKind::TwoStep, EstimatorKind::Grrrr}, 50);
    const double a = cell_mae(r, EstimatorKind::TwoStep);
    const double g = cell_mae(r, EstimatorKind::Grrrr);
    return {g < a && r.failures == 0,
            fmt("S1 K=20 share 1 Low: GRRRR %.4f vs 2SRR %.4f (need GRRRR < 2SRR), failures %ld", g, a,
                static_cast<long>(r.failures))};
}

// ---------------------------------------------------------------- 5

Outcome criterion_5()
{
    const auto rows = benchmark_timing({300}, {6, 100}, {EstimatorKind::TwoStep}, 1);
    const double t6 = rows[0].seconds;
    const double t100 = rows[1].seconds;
    const double slope = std::log(t100 / t6) / std::log(100.0 / 6.0);
    return {t6 <= 30.0 && t100 <= 300.0 && slope < 3.0,
            fmt("2SRR with CV at T=300: K=6 %.2f s (<= 30), K=100 %.2f s (<= 300), log-log K exponent %.2f (< 3)",
                t6, t100, slope)};
}

// ---------------------------------------------------------------- 6

Outcome criterion_6()
{
    const Index T = 300, K = 6;
    const double sigma_eps = 1.0, sigma_u = 0.1;
    const double truth = sigma_eps * sigma_eps / (sigma_u * sigma_u * static_cast<double>(K));
    std::vector<double> chosen;
    Index interior = 0;
    double step = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const SimulatedInstance s = gen_random_walk_dgp(T, K, sigma_eps, sigma_u, 6000 + rep);
        const BasisExpansion e = build_expansion(s.data, LawOfMotion::random_walk(), false);
        CvSpec spec;
        spec.seed = 99 + rep;
        // 81 points over 4 decades: 20 per decade.
        spec.lambda_grid = make_lambda_grid(e, 81, 4.0);
        step = std::log10(spec.lambda_grid[1] / spec.lambda_grid[0]);
        const CvResult cv = kfold_cv(e, s.data.y, spec);
        chosen.push_back(cv.best_lambda);
        if (cv.best_index > 0 && cv.best_index + 1 < spec.lambda_grid.size()) ++interior;
    }
    std::sort(chosen.begin(), chosen.end());
    const double median = std::sqrt(chosen[24] * chosen[25]);
    const double gap = std::abs(std::log10(median / truth));
    return {gap <= step * (1.0 + 1e-9),
            fmt("median CV lambda %.3f vs sigma_eps^2/(sigma_u^2 K) = %.3f: %.3f decades apart, grid step %.3f; "
                "interior argmin in %ld/50",
                median, truth, gap, step, static_cast<long>(interior))};
}

// ---------------------------------------------------------------- 7

Outcome criterion_7()
{
    Index constant_runs = 0;
    for (int rep = 0; rep < 100; ++rep) {
        DgpSpec s;
        s.design = Design::S1;
        s.K = 6;
        s.share_varying = 0.0;
        s.noise = NoiseRegime::Medium;
        s.seed = 7000 ^ static_cast<std::uint64_t>(rep);
        const SimulatedInstance inst = gen_dgp(s);
        const GlrrResult g = estimate_glrr(inst.data, LawOfMotion::random_walk(), CvSpec{});
        if (std::none_of(g.selected.begin(), g.selected.end(), [](bool b) { return b; })) ++constant_runs;
    }
    return {constant_runs >= 90,
            fmt("all-constant DGP, Medium noise: GLRR declared every coefficient constant in %ld/100 runs (need >= 90)",
                static_cast<long>(constant_runs))};
}

// ---------------------------------------------------------------- 8

double level_corr(const Vector& innovations, const Vector& level)
{
    Vector path(level.size());
    path[0] = 0.0;
    for (Index t = 1; t < path.size(); ++t) path[t] = path[t - 1] + innovations[t - 1];
    const Vector a = path.array() - path.mean();
    const Vector b = level.array() - level.mean();
    return std::abs(a.dot(b)) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

Outcome criterion_8()
{
    Index recovered = 0, errors = 0, half_step_violations = 0, fixed_runs_monotone = 0;
    Index whole_sequence_monotone = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const FactorInstance fi = gen_factor_dgp(300, 20, NoiseRegime::Low, 8000 + rep);
        GrrrrResult g;
        try {
            g = estimate_grrrr(fi.instance.data, LawOfMotion::random_walk(), CvSpec{});
        } catch (const InvariantError& e) {
            ++errors;
            std::printf("  run %d: %s\n", rep, e.what());
            continue;
        }
        double best = 0.0;
        for (Index q = 0; q < g.factors.factors.rows(); ++q)
            best = std::max(best, level_corr(g.factors.factors.row(q).transpose(), fi.factor_level));
        if (best >= 0.9) ++recovered;

        for (const auto& s : g.steps)
            if ((s.kind == 'f' || s.kind == 'l' || s.kind == 'd') &&
                s.after > s.before + 1e-8 * std::max(1.0, std::abs(s.before)))
                ++half_step_violations;
        bool whole = true;
        for (std::size_t i = 1; i < g.objective_history.size(); ++i)
            if (g.objective_history[i] > g.objective_history[i - 1] * (1.0 + 1e-12)) whole = false;
        if (whole) ++whole_sequence_monotone;

        // The same alternation with hyperparameters and weights held at their
        // final values, starting from the same principal-component loadings.
        const RegressionData sd = apply_standardization(fi.instance.data, g.initial.scaling);
        const BasisExpansion e = build_expansion(sd, LawOfMotion::random_walk(), false);
        const Matrix U = drift_matrix(g.initial.standardized.theta, e);
        const Index r = std::max<Index>(1, path_variance_rank(U, 0.9, 5));
        GrrrrOptions fixed;
        fixed.xi = g.xi;
        fixed.lambda_f = g.lambda_f;
        fixed.identify_each_step = false;
        fixed.refresh_volatility = false;
        fixed.tolerance = 0.0;
        fixed.max_iterations = 30;
        const GrrrrResult h =
            grrrr_alternate(sd, LawOfMotion::random_walk(), extract_factors(U, 1.0, r).loadings, g.sigma_eps_t, fixed);
        bool mono = true;
        for (std::size_t i = 1; i < h.objective_history.size(); ++i)
            if (h.objective_history[i] > h.objective_history[i - 1] + 1e-10 * std::abs(h.objective_history[i - 1]))
                mono = false;
        if (mono) ++fixed_runs_monotone;
    }
    std::printf("  info: whole-iteration objective sequence of the tuned estimator nonincreasing in %ld/50 runs "
                "(hyperparameter re-selection, rotation and weight refresh each change the function)\n",
                static_cast<long>(whole_sequence_monotone));
    return {recovered >= 40 && errors == 0 && half_step_violations == 0 && fixed_runs_monotone == 50,
            fmt("|corr| >= 0.9 in %ld/50 (need >= 40); monotonicity breaches: %ld raised, %ld half-steps; "
                "fixed-hyperparameter alternation nonincreasing in %ld/50",
                static_cast<long>(recovered), static_cast<long>(errors), static_cast<long>(half_step_violations),
                static_cast<long>(fixed_runs_monotone))};
}

// ---------------------------------------------------------------- 9

Outcome criterion_9()
{
    std::mt19937_64 rng(909);
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        const Index T = 20 + static_cast<Index>(rng() % 21);
        const Index K = 2 + static_cast<Index>(rng() % 3);
        RegressionData d{Vector(), gaussian(T, K, rng), {}};
        const Vector l_true = gaussian(K, 1, rng).col(0);
        Vector f(T);
        f[0] = 0.0;
        for (Index t = 1; t < T; ++t) f[t] = f[t - 1] + 0.3 * gaussian(1, 1, rng)(0, 0);
        d.y = Vector::Zero(T);
        for (Index t = 0; t < T; ++t)
            for (Index k = 0; k < K; ++k) d.y[t] += d.X(t, k) * (0.5 + l_true[k] * f[t]);
        d.y += 0.3 * gaussian(T, 1, rng).col(0);
        const Vector l0 = gaussian(K, 1, rng).col(0);

        Rank1OracleOptions oo;
        oo.lambda_f = 2.0;
        oo.xi = 1e-3;
        oo.iterations = 8;
        const Rank1OracleResult o = grrrr_rank1_oracle(d, LawOfMotion::random_walk(), l0, oo);

        GrrrrOptions go;
        go.lambda_f = oo.lambda_f;
        go.xi = oo.xi;
        go.mixing = oo.mixing;
        go.beta0_ridge = oo.beta0_ridge;
        go.enet_tolerance = oo.enet_tolerance;
        go.identify_each_step = false;
        go.refresh_volatility = false;
        go.tolerance = 0.0;
        go.max_iterations = oo.iterations;
        const GrrrrResult g = grrrr_alternate(d, LawOfMotion::random_walk(), l0, Vector::Ones(T), go);
        if (static_cast<Index>(g.loading_history.size()) != oo.iterations) return {false, "iteration counts differ"};
        for (Index it = 0; it < oo.iterations; ++it) {
            if (g.loading_history[it].cols() != 1) return {false, "general alternation dropped the factor"};
            worst = std::max(worst, (g.loading_history[it].col(0) - o.l_history[it]).cwiseAbs().maxCoeff());
            worst = std::max(worst, (g.factor_history[it].row(0).transpose() - o.f_history[it]).cwiseAbs().maxCoeff());
            worst = std::max(worst, (g.beta0_history[it] - o.b_history[it]).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= 1e-6, fmt("max per-iterate |general - summation form| over l, f, beta0 = %.3e (tol 1e-6)", worst)};
}

// ---------------------------------------------------------------- 10

Outcome criterion_10()
{
    const Index T = 150, K = 2;
    const double sigma_eps = 1.0, sigma_u = 0.15;
    const double lambda = sigma_eps * sigma_eps / (sigma_u * sigma_u * static_cast<double>(K));
    double covered = 0.0, total = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const SimulatedInstance s = gen_random_walk_dgp(T, K, sigma_eps, sigma_u, 10000 + rep);
        const BasisExpansion e = build_expansion(s.data, LawOfMotion::random_walk(), false);
        // beta0 ~ N(0, 1) with unit noise: lambda0 = sigma_eps^2 / 1.
        const VarianceProfile p = VarianceProfile::homogeneous(T, K, lambda, sigma_eps * sigma_eps);
        TvpEstimate est = generalized_dual_ridge(e, s.data.y, p);
        const Bands b = credible_bands(est, e, 0.9);
        for (Index t = 0; t < T; ++t)
            for (Index k = 0; k < K; ++k) {
                total += 1.0;
                const double v = s.true_beta(t, k);
                if (v >= b.lower(t, k) && v <= b.upper(t, k)) covered += 1.0;
            }
    }
    const double rate = covered / total;
    return {rate >= 0.8 && rate <= 1.0,
            fmt("pointwise 90%% band coverage %.4f over 200 runs (band [0.80, 1.00])", rate)};
}

// ---------------------------------------------------------------- 11

Outcome criterion_11()
{
    // No leakage across every origin of a synthetic panel, with factors and lags.
    std::mt19937_64 rng(1111);
    const Index T = 160;
    Vector y(T);
    y[0] = 100.0;
    for (Index t = 1; t < T; ++t) y[t] = y[t - 1] * std::exp(0.005 + 0.01 * gaussian(1, 1, rng)(0, 0));
    const Matrix panel = gaussian(T, 6, rng);
    const TransformedSeries z = transform_series(y, Transform::DiffLog);
    Index checked = 0;
    bool leak_ok = true;
    for (Index h : {1, 2, 4}) {
        FeatureSpec fs;
        fs.lags = 2;
        fs.factors = 2;
        for (Index origin = 40; origin + h < T; ++origin) {
            const AlignedSample s = align_sample(z, panel, fs, h, Transform::DiffLog, true, origin);
            try {
                assert_no_leakage(s);
            } catch (const InvariantError&) {
                leak_ok = false;
            }
            ++checked;
        }
    }
    // The check must bite on a tampered sample.
    bool tamper_caught = false;
    {
        FeatureSpec fs;
        AlignedSample s = align_sample(z, panel, fs, 1, Transform::DiffLog, true, 80);
        s.target_source.back() = s.origin + 1;
        try {
            assert_no_leakage(s);
        } catch (const InvariantError&) {
            tamper_caught = true;
        }
    }

    // DM size at h = 1 with equally accurate iid forecasts.
    Index rejections = 0;
    std::mt19937_64 drng(4242);
    for (int run = 0; run < 500; ++run) {
        const Vector a = gaussian(100, 1, drng).col(0);
        const Vector b = gaussian(100, 1, drng).col(0);
        if (dm_test(a, b, 1).p_value < 0.10) ++rejections;
    }
    const double size = static_cast<double>(rejections) / 500.0;

    // Guard hand cases.
    const std::vector<double> hist = {0.0, 10.0};
    const GuardResult g1 = outlier_guard(100.0, hist, 7.0);
    const GuardResult g2 = outlier_guard(15.0, hist, 7.0);
    const GuardResult g3 = outlier_guard(-5.0, hist, 7.0);
    const GuardResult g4 = outlier_guard(5.0, hist, 7.0);
    const GuardResult g5 = outlier_guard(-5.0000001, hist, 7.0);
    const bool guard_ok = g1.replaced && g1.value == 7.0 && !g2.replaced && g2.value == 15.0 && !g3.replaced &&
                          g3.value == -5.0 && !g4.replaced && g4.value == 5.0 && g5.replaced && g5.value == 7.0;

    return {leak_ok && tamper_caught && size >= 0.06 && size <= 0.14 && guard_ok,
            fmt("leakage assertion clean on %ld aligned samples, tampered sample caught: %s; DM rejection rate at 10%% "
                "%.3f (band [0.06, 0.14]); guard hand cases %s",
                static_cast<long>(checked), tamper_caught ? "yes" : "no", size, guard_ok ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------- 12

Outcome criterion_12()
{
    Index good = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const Vector e = simulate_garch11(2000, 0.1, 0.1, 0.8, 12000 + rep);
        const GarchFit f = fit_garch11(e);
        if (std::abs(f.params.omega - 0.1) <= 0.1 && std::abs(f.params.alpha - 0.1) <= 0.1 &&
            std::abs(f.params.beta - 0.8) <= 0.1)
            ++good;
    }
    return {good >= 80, fmt("omega, alpha, beta all within 0.1 of truth in %ld/100 runs (need >= 80)",
                            static_cast<long>(good))};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"dual-primal equivalence", criterion_1},
        {"2SRR MAE on the S1 K=6 cell", criterion_2},
        {"GLRR vs 2SRR on the S2 K=6 cell", criterion_3},
        {"GRRRR vs 2SRR on the S1 K=20 dense cell", criterion_4},
        {"2SRR timing and K-scaling", criterion_5},
        {"CV lambda vs the noise-to-drift ratio", criterion_6},
        {"GLRR specificity on constant coefficients", criterion_7},
        {"GRRRR rank-1 recovery and monotone alternation", criterion_8},
        {"general alternation vs rank-1 summation form", criterion_9},
        {"credible band coverage", criterion_10},
        {"forecasting protocol invariants", criterion_11},
        {"GARCH(1,1) recovery", criterion_12},
    };
    // Optional arguments select criteria by number.
    std::vector<bool> run(criteria.size(), argc <= 1);
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n >= 1 && n <= static_cast<int>(criteria.size())) run[n - 1] = true;
    }
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!run[i]) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), sec);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
