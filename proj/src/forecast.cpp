#include <tvp/forecast.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace tvp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

Index first_finite_row(const Matrix& M)
{
    for (Index r = 0; r < M.rows(); ++r)
        if (M.row(r).allFinite()) return r;
    return M.rows();
}

} // namespace

std::string to_string(Transform t)
{
    switch (t) {
    case Transform::Level: return "level";
    case Transform::Diff: return "diff";
    case Transform::DiffLog: return "difflog";
    }
    return "level";
}

Transform parse_transform(const std::string& text, const std::string& field)
{
    const std::string s = lower(text);
    if (s == "level") return Transform::Level;
    if (s == "diff") return Transform::Diff;
    if (s == "difflog") return Transform::DiffLog;
    throw ValidationError(field + ": unknown transform code '" + text + "' (expected level, diff or difflog)");
}

void ForecastTask::validate(Index T) const
{
    if (horizon < 1) throw ValidationError("ForecastTask: horizon must be at least 1");
    if (oos_start < 1) throw ValidationError("ForecastTask: oos_start must leave an estimation window");
    if (oos_start > T - 1 - horizon) throw ValidationError("ForecastTask: oos_start leaves no observed target");
    if (oos_end >= 0 && oos_end < oos_start) throw ValidationError("ForecastTask: oos_end precedes oos_start");
}

TransformedSeries transform_series(const Vector& y, Transform t)
{
    TransformedSeries out;
    const Index T = y.size();
    out.values = Vector::Constant(T, kNaN);
    switch (t) {
    case Transform::Level:
        out.values = y;
        out.first_valid = 0;
        break;
    case Transform::Diff:
        for (Index i = 1; i < T; ++i) out.values[i] = y[i] - y[i - 1];
        out.first_valid = 1;
        break;
    case Transform::DiffLog:
        if (T > 0 && !(y.minCoeff() > 0.0)) throw DomainError("transform_series: difflog needs a positive series");
        for (Index i = 1; i < T; ++i) out.values[i] = std::log(y[i]) - std::log(y[i - 1]);
        out.first_valid = 1;
        break;
    }
    return out;
}

Vector make_direct_target(const Vector& z, Index horizon, Transform t, bool averaging)
{
    if (horizon < 1) throw ValidationError("make_direct_target: horizon must be at least 1");
    const Index n = std::max<Index>(0, z.size() - horizon);
    Vector out(n);
    const bool avg = averaging && horizon > 1 && t != Transform::Level;
    for (Index s = 0; s < n; ++s) {
        if (avg) out[s] = z.segment(s + 1, horizon).mean();
        else out[s] = z[s + horizon];
    }
    return out;
}

Vector make_direct_target(const Vector& y_raw, const ForecastTask& task)
{
    return make_direct_target(transform_series(y_raw, task.transform).values, task.horizon, task.transform,
                              task.averaging);
}

AlignedSample align_sample(const TransformedSeries& z, const Matrix& panel, const FeatureSpec& spec, Index horizon,
                           Transform t, bool averaging, Index origin)
{
    const Index T = z.values.size();
    if (spec.lags < 0 || spec.factors < 0) throw ValidationError("FeatureSpec: counts must be nonnegative");
    if (spec.lags == 0 && spec.factors == 0 && !spec.intercept) throw ValidationError("FeatureSpec: no features");
    if (spec.factors > 0 && panel.rows() != T) throw DimensionError("align_sample: panel rows must equal T");
    if (origin < 0 || origin >= T) throw ValidationError("align_sample: origin out of range");

    Index s0 = z.first_valid + std::max<Index>(spec.lags - 1, 0);
    Matrix fac;  // rows pf..origin, r columns
    Index pf = 0;
    if (spec.factors > 0) {
        pf = first_finite_row(panel);
        if (pf > origin) throw ValidationError("align_sample: predictor panel has no complete row before the origin");
        Matrix P = panel.middleRows(pf, origin - pf + 1);
        // Standardized with moments from rows up to the origin only.
        for (Index c = 0; c < P.cols(); ++c) {
            const double m = P.col(c).mean();
            const double sd = std::sqrt((P.col(c).array() - m).square().mean());
            P.col(c) = (P.col(c).array() - m) / (sd > 0.0 ? sd : 1.0);
        }
        const FactorStructure fs = extract_factors(P, 1.0, spec.factors);
        fac = Matrix::Zero(P.rows(), spec.factors);
        fac.leftCols(fs.rank) = fs.factors.transpose();
        s0 = std::max(s0, pf);
    }
    const Vector target = make_direct_target(z.values, horizon, t, averaging);

    const Index width = (spec.intercept ? 1 : 0) + spec.lags + spec.factors;
    auto features = [&](Index s, Vector& row, Index& source) {
        row.resize(width);
        Index c = 0;
        source = std::numeric_limits<Index>::min();
        if (spec.intercept) row[c++] = 1.0;
        for (Index l = 0; l < spec.lags; ++l) {
            row[c++] = z.values[s - l];
            source = std::max(source, s - l);
        }
        for (Index f = 0; f < spec.factors; ++f) {
            row[c++] = fac(s - pf, f);
            source = std::max(source, origin);  // factor estimates use the panel through the origin
        }
        if (source == std::numeric_limits<Index>::min()) source = s;
    };

    AlignedSample out;
    out.origin = origin;
    std::vector<Vector> rows;
    std::vector<double> ys;
    for (Index s = s0; s + horizon <= origin; ++s) {
        if (!std::isfinite(target[s])) continue;
        Vector row;
        Index src = 0;
        features(s, row, src);
        if (!row.allFinite()) continue;
        rows.push_back(row);
        ys.push_back(target[s]);
        out.row_dates.push_back(s);
        out.feature_source.push_back(src);
        out.target_source.push_back(s + horizon);
        out.target_history.push_back(target[s]);
    }
    if (origin < s0) throw ValidationError("align_sample: origin precedes the first complete feature row");
    features(origin, out.x_origin, out.origin_source);

    const Index n = static_cast<Index>(rows.size());
    out.train.y.resize(n);
    out.train.X.resize(n, width);
    for (Index i = 0; i < n; ++i) {
        out.train.y[i] = ys[static_cast<std::size_t>(i)];
        out.train.X.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    }
    if (spec.intercept) out.train.series_names.push_back("const");
    for (Index l = 0; l < spec.lags; ++l) out.train.series_names.push_back("lag" + std::to_string(l));
    for (Index f = 0; f < spec.factors; ++f) out.train.series_names.push_back("factor" + std::to_string(f + 1));
    return out;
}

void assert_no_leakage(const AlignedSample& s)
{
    const auto fail = [&](const std::string& what, Index date, Index source) {
        std::ostringstream os;
        os << "leakage at origin " << s.origin << ": " << what << " for row dated " << date << " uses data dated "
           << source;
        throw InvariantError(os.str());
    };
    for (std::size_t i = 0; i < s.row_dates.size(); ++i) {
        if (s.feature_source[i] > s.origin) fail("features", s.row_dates[i], s.feature_source[i]);
        if (s.target_source[i] > s.origin) fail("target", s.row_dates[i], s.target_source[i]);
        if (s.row_dates[i] >= s.origin) fail("row date", s.row_dates[i], s.row_dates[i]);
    }
    if (s.origin_source > s.origin) fail("forecast features", s.origin, s.origin_source);
}

GuardResult outlier_guard(double forecast, const std::vector<double>& history, double fallback)
{
    if (history.empty()) throw ValidationError("outlier_guard: empty history");
    double m = 0.0;
    for (double v : history) m += v;
    m /= static_cast<double>(history.size());
    const auto [lo, hi] = std::minmax_element(history.begin(), history.end());
    const double a = m + 2.0 * (*lo - m);
    const double b = m + 2.0 * (*hi - m);
    if (forecast >= a && forecast <= b) return {forecast, false};
    return {fallback, true};
}

double rmspe(const Vector& forecasts, const Vector& actuals)
{
    if (forecasts.size() != actuals.size()) throw DimensionError("rmspe: length mismatch");
    if (forecasts.size() == 0) throw DomainError("rmspe: empty evaluation set");
    return std::sqrt((forecasts - actuals).squaredNorm() / static_cast<double>(forecasts.size()));
}

Vector half_and_half(const Vector& tvp_forecast, const Vector& constant_forecast)
{
    if (tvp_forecast.size() != constant_forecast.size()) throw DimensionError("half_and_half: length mismatch");
    return 0.5 * (tvp_forecast + constant_forecast);
}

DmResult dm_test(const Vector& errors_a, const Vector& errors_b, Index horizon)
{
    if (errors_a.size() != errors_b.size()) throw DimensionError("dm_test: length mismatch");
    if (errors_a.size() < 10) throw DomainError("dm_test: need at least 10 forecast errors");
    if (horizon < 1) throw ValidationError("dm_test: horizon must be at least 1");
    const Index n = errors_a.size();
    const Vector d = errors_a.cwiseAbs2() - errors_b.cwiseAbs2();
    DmResult r;
    r.hac_bandwidth = horizon - 1;
    r.loss_differential_mean = d.mean();
    if (d.cwiseAbs().maxCoeff() == 0.0) {
        r.degenerate = true;
        return r;
    }
    const Vector dc = d.array() - r.loss_differential_mean;
    auto gamma = [&](Index j) { return dc.head(n - j).dot(dc.tail(n - j)) / static_cast<double>(n); };
    const double g0 = gamma(0);
    double v = g0;
    for (Index j = 1; j <= r.hac_bandwidth && j < n; ++j) v += 2.0 * gamma(j);
    // The rectangular kernel can go negative; fall back to the lag-0 variance.
    if (!(v > 0.0)) v = g0;
    if (!(v > 0.0)) {
        r.degenerate = true;
        r.statistic = std::copysign(std::numeric_limits<double>::infinity(), r.loss_differential_mean);
        r.p_value = 0.0;
        return r;
    }
    r.statistic = r.loss_differential_mean / std::sqrt(v / static_cast<double>(n));
    r.p_value = std::erfc(std::abs(r.statistic) / std::sqrt(2.0));
    return r;
}

Matrix transform_panel(const Matrix& raw, const std::vector<Transform>& codes)
{
    if (static_cast<Index>(codes.size()) != raw.cols()) throw DimensionError("transform_panel: one code per column");
    Matrix out(raw.rows(), raw.cols());
    for (Index c = 0; c < raw.cols(); ++c) out.col(c) = transform_series(raw.col(c), codes[static_cast<std::size_t>(c)]).values;
    return out;
}

namespace {

struct TvpFit {
    double forecast = 0.0;
    double lambda = 0.0;
    double lambda0 = 0.0;
};

// Fits on the aligned sample and predicts with the last coefficient row.
TvpFit fit_tvp(const ForecastModel& m, const AlignedSample& s, const CvSpec& cv, const Parallelism& par)
{
    TvpFit out;
    TvpEstimate est;
    switch (m.estimator) {
    case EstimatorKind::Ridge: {
        const Standardization st = fit_standardization(s.train.X);
        const RegressionData sd = apply_standardization(s.train, st);
        const BasisExpansion e = build_expansion(sd, m.law, false);
        const CvResult r = kfold_cv(e, sd.y, cv, std::nullopt, par);
        est = unstandardize(dual_ridge(e, sd.y, r.best_lambda, r.best_lambda0, par), st, e);
        out.lambda = r.best_lambda;
        out.lambda0 = r.best_lambda0;
        break;
    }
    case EstimatorKind::TwoStep: {
        TwoStepOptions o;
        o.par = par;
        TwoStepResult r = estimate_2srr(s.train, m.law, cv, o);
        est = std::move(r.estimate);
        out.lambda = r.first_cv.best_lambda;
        out.lambda0 = r.first_cv.best_lambda0;
        break;
    }
    case EstimatorKind::Glrr: {
        GlrrOptions o;
        o.first_stage.par = par;
        GlrrResult r = estimate_glrr(s.train, m.law, cv, o);
        est = std::move(r.estimate);
        out.lambda = r.first_stage.first_cv.best_lambda;
        out.lambda0 = r.first_stage.first_cv.best_lambda0;
        break;
    }
    case EstimatorKind::Grrrr: {
        GrrrrOptions o;
        o.par = par;
        o.max_rank = std::min<Index>(5, s.train.K());
        GrrrrResult r = estimate_grrrr(s.train, m.law, cv, o);
        est = std::move(r.estimate);
        out.lambda = r.initial.first_cv.best_lambda;
        out.lambda0 = r.initial.first_cv.best_lambda0;
        break;
    }
    }
    out.forecast = est.beta.row(est.beta.rows() - 1).dot(s.x_origin);
    if (!std::isfinite(out.forecast)) throw NumericalError("non-finite TVP forecast");
    return out;
}

double ols_forecast(const AlignedSample& s)
{
    const Vector b = s.train.X.colPivHouseholderQr().solve(s.train.y);
    return b.dot(s.x_origin);
}

} // namespace

ForecastRun expanding_window_run(const ForecastModel& model, const Vector& y_raw, const Matrix& panel_raw,
                                 const ForecastTask& task, const Parallelism& par)
{
    const Index T = y_raw.size();
    task.validate(T);
    const TransformedSeries z = transform_series(y_raw, task.transform);
    const Vector target = make_direct_target(z.values, task.horizon, task.transform, task.averaging);
    const Index last = task.oos_end >= 0 ? std::min(task.oos_end, T - 1 - task.horizon) : T - 1 - task.horizon;

    ForecastRun run;
    const Index n = last - task.oos_start + 1;
    run.forecast.resize(n);
    run.constant.resize(n);
    run.actual.resize(n);
    run.lambda.resize(n);
    run.seconds.resize(n);
    CvSpec cv = model.cv;
    bool frozen = false;
    for (Index i = 0; i < n; ++i) {
        const Index origin = task.oos_start + i;
        const auto t0 = std::chrono::steady_clock::now();
        const AlignedSample s =
            align_sample(z, panel_raw, model.features, task.horizon, task.transform, task.averaging, origin);
        assert_no_leakage(s);
        if (s.train.T() < std::max<Index>(model.min_train, s.train.K() + 2))
            throw ValidationError("expanding_window_run: origin " + std::to_string(origin) +
                                  " has too few training rows");
        const double constant = ols_forecast(s);
        unsigned flag = kFlagNone;
        double value = constant;
        std::string message;
        run.lambda[i] = kNaN;
        try {
            const TvpFit f = fit_tvp(model, s, cv, par);
            value = f.forecast;
            run.lambda[i] = f.lambda;
            if (!task.retune_each_step && !frozen) {
                // Later steps search only the first step's choice.
                cv.lambda_grid = Vector::Constant(1, f.lambda);
                cv.lambda0_grid = Vector::Constant(1, f.lambda0);
                frozen = true;
            }
        } catch (const Error& ex) {
            flag |= kFlagFallback;
            message = ex.what();
        }
        if (!(flag & kFlagFallback)) {
            const GuardResult g = outlier_guard(value, s.target_history, constant);
            if (g.replaced) flag |= kFlagOutlier;
            value = g.value;
        }
        run.origins.push_back(origin);
        run.forecast[i] = value;
        run.constant[i] = constant;
        run.actual[i] = target[origin];
        run.flags.push_back(flag);
        run.messages.push_back(message);
        run.seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return run;
}

std::vector<SummaryRow> summarize(const std::vector<ForecastCell>& cells, bool half_and_half_rows)
{
    std::vector<SummaryRow> out;
    std::map<std::pair<std::string, Index>, const ForecastCell*> bench;
    std::vector<std::pair<std::string, Index>> order;
    for (const auto& c : cells) {
        const auto key = std::make_pair(c.target, c.horizon);
        if (!bench.count(key)) {
            bench[key] = &c;
            order.push_back(key);
        }
    }
    for (const auto& key : order) {
        const ForecastCell& b = *bench[key];
        const Vector eb = b.run.constant - b.run.actual;
        const double rb = rmspe(b.run.constant, b.run.actual);
        SummaryRow head{key.first, key.second, "benchmark", rb, 1.0, dm_test(eb, eb, key.second)};
        out.push_back(head);
        for (const auto& c : cells) {
            if (c.target != key.first || c.horizon != key.second) continue;
            if (c.run.actual.size() != b.run.actual.size())
                throw DimensionError("summarize: cells of one target and horizon must share origins");
            const Vector e = c.run.forecast - c.run.actual;
            const double r = rmspe(c.run.forecast, c.run.actual);
            out.push_back({key.first, key.second, c.model.name, r, r / rb, dm_test(e, eb, key.second)});
            if (half_and_half_rows) {
                const Vector hh = half_and_half(c.run.forecast, c.run.constant);
                const double rh = rmspe(hh, c.run.actual);
                out.push_back({key.first, key.second, c.model.name + "+hh", rh, rh / rb,
                               dm_test(hh - c.run.actual, eb, key.second)});
            }
        }
    }
    return out;
}

} // namespace tvp
