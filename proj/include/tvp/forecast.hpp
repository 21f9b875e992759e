#pragma once

#include <tvp/simlab.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tvp {

enum class Transform { Level, Diff, DiffLog };
std::string to_string(Transform t);
// Accepts "level", "diff", "difflog" (any case); throws ValidationError naming `field`.
Transform parse_transform(const std::string& text, const std::string& field = "transform");

struct ForecastTask {
    Index horizon = 1;
    Transform transform = Transform::DiffLog;
    bool averaging = true;  // h > 1 on differenced series: mean of the next h increments
    Index oos_start = 0;    // first forecast origin (0-based row)
    Index oos_end = -1;     // last origin; negative: last origin with an observed target
    bool retune_each_step = true;

    void validate(Index T) const;
};

// Transformed series, same length as the input; entries before `first_valid` are NaN.
struct TransformedSeries {
    Vector values;
    Index first_valid = 0;
};
TransformedSeries transform_series(const Vector& y, Transform t);

// target[s] is the value the forecast made at origin s aims at: z_{s+1} for
// h = 1, the mean of z_{s+1..s+h} when averaging a differenced series,
// otherwise z_{s+h}. Length T - h; entries whose window touches a NaN are NaN.
Vector make_direct_target(const Vector& z, Index horizon, Transform t, bool averaging);
Vector make_direct_target(const Vector& y_raw, const ForecastTask& task);

struct FeatureSpec {
    Index lags = 2;      // z_s, ..., z_{s-lags+1}
    Index factors = 0;   // principal components of the predictor panel, re-extracted per origin
    bool intercept = true;
};

// Training sample assembled for one origin. Source dates record the latest
// observation each row depends on, so the leakage check is a pure comparison.
struct AlignedSample {
    Index origin = 0;
    RegressionData train;
    Vector x_origin;
    std::vector<Index> row_dates;
    std::vector<Index> feature_source;  // per training row
    std::vector<Index> target_source;   // per training row
    Index origin_source = 0;
    std::vector<double> target_history;  // realized targets available at the origin
};

// z: transformed target series; panel: transformed predictors (T x N, may be empty).
AlignedSample align_sample(const TransformedSeries& z, const Matrix& panel, const FeatureSpec& spec,
                           Index horizon, Transform t, bool averaging, Index origin);

// Throws InvariantError when any row depends on data dated after the origin.
void assert_no_leakage(const AlignedSample& s);

struct GuardResult {
    double value = 0.0;
    bool replaced = false;
};
// Closed interval [m + 2 min(y - m), m + 2 max(y - m)] with m = mean(history).
GuardResult outlier_guard(double forecast, const std::vector<double>& history, double fallback);

double rmspe(const Vector& forecasts, const Vector& actuals);
Vector half_and_half(const Vector& tvp_forecast, const Vector& constant_forecast);

struct DmResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double loss_differential_mean = 0.0;
    Index hac_bandwidth = 0;
    bool degenerate = false;
};
// Squared-error loss, rectangular HAC with lag h - 1, two-sided normal p-value.
// Negative statistic: model a has the smaller loss.
DmResult dm_test(const Vector& errors_a, const Vector& errors_b, Index horizon);

struct ForecastModel {
    std::string name = "2srr";
    EstimatorKind estimator = EstimatorKind::TwoStep;
    FeatureSpec features;
    LawOfMotion law;
    CvSpec cv;
    Index min_train = 30;
};

enum ForecastFlag : unsigned { kFlagNone = 0, kFlagFallback = 1, kFlagOutlier = 2 };

struct ForecastRun {
    std::vector<Index> origins;
    Vector forecast;   // TVP forecast after the outlier guard
    Vector constant;   // OLS forecast on the same features
    Vector actual;
    std::vector<unsigned> flags;
    Vector lambda;     // NaN on fallback steps
    Vector seconds;
    std::vector<std::string> messages;  // non-empty on fallback steps
};

// Sequential over origins; each step fits on rows whose targets are observed at the origin.
ForecastRun expanding_window_run(const ForecastModel& model, const Vector& y_raw, const Matrix& panel_raw,
                                 const ForecastTask& task, const Parallelism& par = {});

// Predictor panel transform: one code per column.
Matrix transform_panel(const Matrix& raw, const std::vector<Transform>& codes);

struct ForecastCell {
    std::string target;
    Index horizon = 1;
    ForecastModel model;
    ForecastRun run;
};

struct SummaryRow {
    std::string target;
    Index horizon = 1;
    std::string model;
    double rmspe = 0.0;
    double ratio = 1.0;  // relative to the constant-parameter AR benchmark
    DmResult dm;
};

// One "benchmark" row per (target, horizon) from the constant forecast of the
// first cell, then one row per model and, when requested, one Half & Half row.
std::vector<SummaryRow> summarize(const std::vector<ForecastCell>& cells, bool half_and_half_rows);

} // namespace tvp
