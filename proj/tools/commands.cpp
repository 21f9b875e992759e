#include "commands.hpp"

#include <tvp/csv.hpp>
#include <tvp/forecast.hpp>

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace tvpcli {

namespace fs = std::filesystem;
using tvp::Index;
using tvp::Matrix;
using tvp::Vector;

namespace {

tvp::Parallelism parallelism(const RunConfig& cfg)
{
    tvp::Parallelism p;
    std::string t = cfg.str("threads");
    if (t.empty()) {
        if (const char* env = std::getenv("TVPRIDGE_THREADS")) t = env;
    }
    if (!t.empty()) {
        try {
            p.threads = std::stoi(t);
        } catch (const std::exception&) {
            throw ConfigError("config field 'threads': cannot read '" + t + "' as an integer");
        }
        if (p.threads < 0) throw ConfigError("config field 'threads': must be nonnegative");
    }
    if (p.threads > 0) omp_set_num_threads(p.threads);
    return p;
}

tvp::CvSpec cv_spec(const RunConfig& cfg)
{
    tvp::CvSpec cv;
    cv.n_folds = cfg.integer("folds");
    cv.grid_points = cfg.integer("grid_points");
    cv.grid_decades = cfg.number("grid_decades");
    cv.seed = static_cast<std::uint64_t>(cfg.integer("cv_seed"));
    return cv;
}

tvp::LawOfMotion law(const RunConfig& cfg)
{
    try {
        return tvp::LawOfMotion::parse(cfg.str("law"));
    } catch (const tvp::Error& e) {
        throw ConfigError(std::string("config field 'law': ") + e.what());
    }
}

std::optional<double> bands_level(const RunConfig& cfg)
{
    if (!cfg.has("bands_level")) return std::nullopt;
    const double v = cfg.number("bands_level");
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("config field 'bands_level': must lie in (0, 1)");
    return v;
}

fs::path prepare_output(const RunConfig& cfg)
{
    const fs::path dir = cfg.str("output_dir");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    tvp::write_text((dir / "config.resolved").string(), cfg.resolved_text());
    return dir;
}

std::vector<double> to_std(const Vector& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

// omega_t * mean(r^2 / omega): variance path implied by the fitted weights.
Vector variance_path(const tvp::TvpEstimate& est)
{
    const Vector& w = est.profile.sigma_eps_t;
    const Index T = est.residuals.size();
    if (w.size() != T) return Vector::Constant(T, est.residuals.squaredNorm() / static_cast<double>(T));
    const double s2 = (est.residuals.array().square() / w.array()).mean();
    return s2 * w;
}

void write_estimate(const fs::path& dir, const std::string& suffix, const tvp::TvpEstimate& est,
                    const std::vector<std::string>& names, const std::vector<std::string>& dates)
{
    tvp::write_matrix_csv((dir / ("beta_paths" + suffix + ".csv")).string(), names, est.beta, dates);
    tvp::write_matrix_csv((dir / ("residuals" + suffix + ".csv")).string(), {"residual"}, est.residuals, dates);
    tvp::write_matrix_csv((dir / ("sigma_eps" + suffix + ".csv")).string(), {"sigma2_eps"}, variance_path(est),
                          dates);
    if (est.bands) {
        tvp::write_matrix_csv((dir / ("bands_lower" + suffix + ".csv")).string(), names, est.bands->lower, dates);
        tvp::write_matrix_csv((dir / ("bands_upper" + suffix + ".csv")).string(), names, est.bands->upper, dates);
    }
}

std::vector<std::string> block_names(const tvp::BasisExpansion& e, const std::vector<std::string>& names)
{
    std::vector<std::string> out;
    for (Index j = 0; j < e.blocks(); ++j) {
        const std::string& base = names[static_cast<std::size_t>(e.source[static_cast<std::size_t>(j)])];
        out.push_back(j < e.K ? base : base + ":trend");
    }
    return out;
}

} // namespace

int cmd_estimate(const RunConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const tvp::Parallelism par = parallelism(cfg);
    if (!cfg.has("input")) throw ConfigError("config field 'input': an input CSV is required");
    const tvp::CvSpec cv = cv_spec(cfg);
    const tvp::LawOfMotion lm = law(cfg);
    const std::optional<double> level = bands_level(cfg);
    const std::string estimator = cfg.str("estimator");
    const tvp::Panel panel = tvp::read_panel(cfg.str("input"));
    if (panel.names.empty()) throw ConfigError("input has no numeric columns");

    std::vector<std::string> targets = cfg.list("target");
    if (targets.empty()) targets.push_back(panel.names.front());
    std::vector<std::string> regressors = cfg.list("regressors");
    if (regressors.empty())
        for (const auto& n : panel.names)
            if (std::find(targets.begin(), targets.end(), n) == targets.end()) regressors.push_back(n);
    if (regressors.empty()) throw ConfigError("config field 'regressors': the regressor set is empty");
    if (estimator != "mv-grrrr" && targets.size() != 1)
        throw ConfigError("config field 'target': estimator '" + estimator + "' takes exactly one target");

    tvp::RegressionData data;
    data.X.resize(panel.values.rows(), static_cast<Index>(regressors.size()));
    for (std::size_t k = 0; k < regressors.size(); ++k)
        data.X.col(static_cast<Index>(k)) = panel.values.col(panel.column(regressors[k]));
    data.y = panel.values.col(panel.column(targets.front()));
    data.series_names = regressors;

    const fs::path dir = prepare_output(cfg);
    nlohmann::json summary;
    summary["command"] = "estimate";
    summary["estimator"] = estimator;
    summary["law"] = lm.name();
    summary["version"] = TVP_VERSION;
    summary["cv_seed"] = cfg.integer("cv_seed");
    summary["T"] = data.X.rows();
    summary["K"] = data.X.cols();
    summary["regressors"] = regressors;
    summary["target"] = targets;

    const tvp::BasisExpansion shape = tvp::build_expansion(data, lm, false);
    auto report_profile = [&](const tvp::TvpEstimate& est) {
        summary["lambda"] = est.lambda;
        summary["lambda0"] = est.profile.lambda0;
        summary["sigma_u"] = to_std(est.profile.sigma_u_k);
        summary["sigma_u_blocks"] = block_names(shape, regressors);
    };

    if (estimator == "ridge") {
        const tvp::Standardization s = tvp::fit_standardization(data.X);
        const tvp::RegressionData sd = tvp::apply_standardization(data, s);
        const tvp::BasisExpansion e = tvp::build_expansion(sd, lm, false);
        const tvp::CvResult r = tvp::kfold_cv(e, sd.y, cv, std::nullopt, par);
        tvp::TvpEstimate est = tvp::dual_ridge(e, sd.y, r.best_lambda, r.best_lambda0, par);
        if (level) est.bands = tvp::credible_bands(est, e, *level);
        est = tvp::unstandardize(est, s, e);
        report_profile(est);
        write_estimate(dir, "", est, regressors, panel.dates);
    } else if (estimator == "2srr") {
        tvp::TwoStepOptions o;
        o.par = par;
        o.bands_level = level;
        o.volatility = cfg.flag("volatility");
        const tvp::TwoStepResult r = tvp::estimate_2srr(data, lm, cv, o);
        report_profile(r.estimate);
        summary["lambda_first_stage"] = r.first_cv.best_lambda;
        summary["sigma2_eps"] = r.sigma2_eps;
        summary["garch"] = {{"omega", r.garch.params.omega}, {"alpha", r.garch.params.alpha},
                            {"beta", r.garch.params.beta}, {"fallback", r.garch.fallback}};
        write_estimate(dir, "", r.estimate, regressors, panel.dates);
    } else if (estimator == "glrr") {
        tvp::GlrrOptions o;
        o.first_stage.par = par;
        o.first_stage.volatility = cfg.flag("volatility");
        o.mix_alpha = cfg.number("mix_alpha");
        o.selection_threshold = cfg.number("selection_threshold");
        const tvp::GlrrResult r = tvp::estimate_glrr(data, lm, cv, o);
        report_profile(r.estimate);
        std::vector<std::string> sel;
        for (std::size_t k = 0; k < r.selected.size(); ++k)
            if (r.selected[k]) sel.push_back(regressors[k]);
        summary["selected"] = sel;
        summary["iterations"] = r.state.iteration;
        summary["converged"] = r.state.converged;
        write_estimate(dir, "", r.estimate, regressors, panel.dates);
    } else if (estimator == "grrrr" || estimator == "mv-grrrr") {
        tvp::GrrrrOptions o;
        o.par = par;
        o.init.par = par;
        o.init.volatility = cfg.flag("volatility");
        o.refresh_volatility = cfg.flag("volatility");
        o.max_rank = cfg.integer("max_rank");
        o.variance_threshold = cfg.number("variance_threshold");
        if (estimator == "grrrr") {
            const tvp::GrrrrResult r = tvp::estimate_grrrr(data, lm, cv, o);
            report_profile(r.estimate);
            summary["rank"] = r.factors.rank;
            summary["explained_variance"] = to_std(r.factors.explained_variance);
            summary["xi"] = r.xi;
            summary["lambda_f"] = r.lambda_f;
            summary["iterations"] = r.iterations;
            summary["converged"] = r.converged;
            write_estimate(dir, "", r.estimate, regressors, panel.dates);
        } else {
            tvp::MultiRegressionData md;
            md.X = data.X;
            md.series_names = regressors;
            md.Y.resize(data.X.rows(), static_cast<Index>(targets.size()));
            for (std::size_t m = 0; m < targets.size(); ++m)
                md.Y.col(static_cast<Index>(m)) = panel.values.col(panel.column(targets[m]));
            const tvp::MvGrrrrResult r = tvp::estimate_mv_grrrr(md, lm, cv, o);
            summary["rank"] = r.factors.rank;
            summary["explained_variance"] = to_std(r.factors.explained_variance);
            summary["iterations"] = r.iterations;
            summary["converged"] = r.converged;
            summary["primal_factor_step"] = r.primal_factor_step;
            nlohmann::json eq = nlohmann::json::object();
            for (std::size_t m = 0; m < targets.size(); ++m) {
                eq[targets[m]] = {{"lambda", r.estimates[m].lambda},
                                  {"sigma_u", to_std(r.estimates[m].profile.sigma_u_k)}};
                write_estimate(dir, "_" + targets[m], r.estimates[m], regressors, panel.dates);
            }
            summary["equations"] = eq;
        }
    } else {
        throw ConfigError("config field 'estimator': unknown estimator '" + estimator + "'");
    }
    summary["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tvp::write_text((dir / "summary.json").string(), summary.dump(2) + "\n");
    return kExitOk;
}

int cmd_simulate(const RunConfig& cfg)
{
    tvp::StudyConfig sc;
    sc.par = parallelism(cfg);
    sc.cv = cv_spec(cfg);
    sc.law = law(cfg);
    sc.replications = cfg.integer("replications");
    const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    try {
        for (const auto& est : cfg.list("estimators")) sc.estimators.push_back(tvp::parse_estimator(est));
        for (const auto& d : cfg.list("design"))
            for (long long T : cfg.integer_list("T"))
                for (long long K : cfg.integer_list("K"))
                    for (double share : cfg.number_list("share"))
                        for (const auto& n : cfg.list("noise")) {
                            tvp::DgpSpec s;
                            s.design = tvp::parse_design(d);
                            s.T = T;
                            s.K = K;
                            s.share_varying = share;
                            s.noise = tvp::parse_noise(n);
                            s.seed = seed;
                            s.validate();
                            sc.setups.push_back(s);
                        }
    } catch (const tvp::ValidationError& e) {
        throw ConfigError(e.what());
    }
    const fs::path dir = prepare_output(cfg);
    sc.csv_path = cfg.has("csv") ? cfg.str("csv") : (dir / "simulation.csv").string();
    const tvp::StudyResult r = tvp::run_study(sc);

    std::string text = "design,T,K,share,noise,estimator,mean_mae,mean_seconds,completed,failures\n";
    for (const auto& c : r.cells) {
        text += tvp::to_string(c.spec.design) + "," + std::to_string(c.spec.T) + "," + std::to_string(c.spec.K) + "," +
                tvp::format_number(c.spec.share_varying) + "," + tvp::to_string(c.spec.noise) + "," +
                tvp::to_string(c.estimator) + "," + tvp::format_number(c.mean_mae) + "," +
                tvp::format_number(c.mean_seconds) + "," + std::to_string(c.completed) + "," +
                std::to_string(c.failures) + "\n";
    }
    tvp::write_text((dir / "simulation_summary.csv").string(), text);
    for (const auto& rec : r.records)
        if (rec.failed)
            std::cerr << "replication " << rec.replication << " (" << tvp::to_string(rec.estimator)
                      << ") failed: " << rec.message << "\n";
    return r.failures > 0 ? kExitPartial : kExitOk;
}

int cmd_forecast(const RunConfig& cfg)
{
    const tvp::Parallelism par = parallelism(cfg);
    if (!cfg.has("input")) throw ConfigError("config field 'input': an input CSV is required");
    const std::vector<std::string> targets = cfg.list("target");
    if (targets.empty()) throw ConfigError("config field 'target': at least one target is required");

    std::vector<tvp::Transform> codes;
    for (const auto& c : cfg.list("transforms")) codes.push_back(tvp::parse_transform(c, "transforms"));
    if (codes.size() == 1) codes.resize(targets.size(), codes.front());
    if (codes.size() != targets.size())
        throw ConfigError("config field 'transforms': give one code or one per target");

    std::vector<Index> horizons;
    for (long long h : cfg.integer_list("horizons")) {
        if (h < 1) throw ConfigError("config field 'horizons': horizons must be positive");
        horizons.push_back(h);
    }
    if (horizons.empty()) throw ConfigError("config field 'horizons': at least one horizon is required");

    std::vector<tvp::ForecastModel> models;
    const tvp::CvSpec cv = cv_spec(cfg);
    const tvp::LawOfMotion lm = law(cfg);
    for (const auto& name : cfg.list("models")) {
        tvp::ForecastModel m;
        m.name = name;
        try {
            m.estimator = tvp::parse_estimator(name);
        } catch (const tvp::ValidationError& e) {
            throw ConfigError(std::string("config field 'models': ") + e.what());
        }
        m.features.lags = cfg.integer("lags");
        m.features.factors = cfg.integer("factors");
        m.law = lm;
        m.cv = cv;
        m.min_train = cfg.integer("min_train");
        models.push_back(m);
    }
    if (models.empty()) throw ConfigError("config field 'models': at least one model is required");

    const tvp::Panel panel = tvp::read_panel(cfg.str("input"));
    for (const auto& t : targets) panel.column(t);
    const Index T = panel.values.rows();
    Matrix predictors;
    const Index nf = cfg.integer("factors");
    if (nf > 0) {
        std::vector<Index> cols;
        for (Index c = 0; c < panel.values.cols(); ++c)
            if (std::find(targets.begin(), targets.end(), panel.names[static_cast<std::size_t>(c)]) == targets.end())
                cols.push_back(c);
        if (static_cast<Index>(cols.size()) < nf)
            throw ConfigError("config field 'factors': fewer predictor columns than factors");
        std::vector<tvp::Transform> pc;
        for (const auto& c : cfg.list("panel_transforms")) pc.push_back(tvp::parse_transform(c, "panel_transforms"));
        if (pc.size() == 1) pc.resize(cols.size(), pc.front());
        if (pc.size() != cols.size())
            throw ConfigError("config field 'panel_transforms': give one code or one per predictor");
        Matrix raw(T, static_cast<Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) raw.col(static_cast<Index>(i)) = panel.values.col(cols[i]);
        predictors = tvp::transform_panel(raw, pc);
    }

    tvp::ForecastTask base;
    base.oos_start = cfg.has("oos_start") ? cfg.integer("oos_start") : T / 2;
    base.retune_each_step = cfg.flag("retune");
    const bool hh = cfg.flag("half_and_half");
    const fs::path dir = prepare_output(cfg);

    std::vector<tvp::ForecastCell> cells;
    std::vector<tvp::ForecastTask> tasks;
    std::vector<std::size_t> target_of;
    for (std::size_t ti = 0; ti < targets.size(); ++ti)
        for (Index h : horizons)
            for (const auto& m : models) {
                tvp::ForecastTask task = base;
                task.horizon = h;
                task.transform = codes[ti];
                task.validate(T);
                cells.push_back({targets[ti], h, m, {}});
                tasks.push_back(task);
                target_of.push_back(ti);
            }

    // Cells are independent; each fit inside a cell runs single-threaded.
    const Index n = static_cast<Index>(cells.size());
    std::vector<std::string> errors(cells.size());
    const tvp::Parallelism inner{1};
#pragma omp parallel for schedule(dynamic, 1) num_threads(par.resolved())
    for (Index i = 0; i < n; ++i) {
        auto& c = cells[static_cast<std::size_t>(i)];
        try {
            const Vector y = panel.values.col(panel.column(c.target));
            c.run = tvp::expanding_window_run(c.model, y, predictors, tasks[static_cast<std::size_t>(i)], inner);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (!errors[i].empty())
            throw tvp::ValidationError("forecast cell " + cells[i].target + " h=" + std::to_string(cells[i].horizon) +
                                       " " + cells[i].model.name + ": " + errors[i]);

    bool any_fallback = false;
    for (const auto& c : cells) {
        std::string text = hh ? "date,forecast,actual,flag,constant,half_and_half\n"
                              : "date,forecast,actual,flag,constant\n";
        for (std::size_t i = 0; i < c.run.origins.size(); ++i) {
            const Index o = c.run.origins[i];
            const auto k = static_cast<Index>(i);
            text += panel.dates.empty() ? std::to_string(o) : panel.dates[static_cast<std::size_t>(o)];
            text += "," + tvp::format_number(c.run.forecast[k]) + "," + tvp::format_number(c.run.actual[k]) + "," +
                    std::to_string(c.run.flags[i]) + "," + tvp::format_number(c.run.constant[k]);
            if (hh) text += "," + tvp::format_number(0.5 * (c.run.forecast[k] + c.run.constant[k]));
            text += "\n";
            any_fallback = any_fallback || (c.run.flags[i] & tvp::kFlagFallback);
        }
        tvp::write_text(
            (dir / ("forecast_" + c.target + "_h" + std::to_string(c.horizon) + "_" + c.model.name + ".csv")).string(),
            text);
    }
    std::string text = "target,horizon,model,rmspe,ratio,dm_statistic,dm_p_value\n";
    for (const auto& r : tvp::summarize(cells, hh))
        text += r.target + "," + std::to_string(r.horizon) + "," + r.model + "," + tvp::format_number(r.rmspe) + "," +
                tvp::format_number(r.ratio) + "," + tvp::format_number(r.dm.statistic) + "," +
                tvp::format_number(r.dm.p_value) + "\n";
    tvp::write_text((dir / "forecast_summary.csv").string(), text);
    return any_fallback ? kExitPartial : kExitOk;
}

int cmd_bench(const RunConfig& cfg)
{
    const tvp::Parallelism par = parallelism(cfg);
    std::vector<Index> Ts, Ks;
    for (long long v : cfg.integer_list("T_list")) Ts.push_back(v);
    for (long long v : cfg.integer_list("K_list")) Ks.push_back(v);
    std::vector<tvp::EstimatorKind> est;
    try {
        for (const auto& e : cfg.list("estimators")) est.push_back(tvp::parse_estimator(e));
    } catch (const tvp::ValidationError& e) {
        throw ConfigError(std::string("config field 'estimators': ") + e.what());
    }
    const fs::path dir = prepare_output(cfg);
    const auto rows = tvp::benchmark_timing(Ts, Ks, est, cfg.integer("runs"),
                                            static_cast<std::uint64_t>(cfg.integer("seed")), par);
    std::string text = "estimator,T,K,seconds,runs\n";
    for (const auto& r : rows)
        text += tvp::to_string(r.estimator) + "," + std::to_string(r.T) + "," + std::to_string(r.K) + "," +
                tvp::format_number(r.seconds) + "," + std::to_string(r.runs) + "\n";
    tvp::write_text((dir / "bench_timing.csv").string(), text);
    std::cout << text;
    return kExitOk;
}

} // namespace tvpcli
