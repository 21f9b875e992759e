#include <tvp/csv.hpp>
#include <tvp/simlab.hpp>

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace tvp {

std::string to_string(Design d)
{
    switch (d) {
    case Design::S1: return "S1";
    case Design::S2: return "S2";
    case Design::S3: return "S3";
    case Design::S4: return "S4";
    }
    return "S1";
}

std::string to_string(NoiseRegime n)
{
    switch (n) {
    case NoiseRegime::Low: return "low";
    case NoiseRegime::Medium: return "medium";
    case NoiseRegime::High: return "high";
    case NoiseRegime::SvLowMed: return "sv-low-med";
    case NoiseRegime::SvLowHigh: return "sv-low-high";
    }
    return "low";
}

Design parse_design(const std::string& s)
{
    if (s == "S1" || s == "s1") return Design::S1;
    if (s == "S2" || s == "s2") return Design::S2;
    if (s == "S3" || s == "s3") return Design::S3;
    if (s == "S4" || s == "s4") return Design::S4;
    throw ValidationError("unknown design '" + s + "' (expected S1..S4)");
}

NoiseRegime parse_noise(const std::string& s)
{
    for (auto n : {NoiseRegime::Low, NoiseRegime::Medium, NoiseRegime::High, NoiseRegime::SvLowMed,
                   NoiseRegime::SvLowHigh})
        if (s == to_string(n)) return n;
    throw ValidationError("unknown noise regime '" + s + "'");
}

std::string to_string(EstimatorKind e)
{
    switch (e) {
    case EstimatorKind::Ridge: return "ridge";
    case EstimatorKind::TwoStep: return "2srr";
    case EstimatorKind::Glrr: return "glrr";
    case EstimatorKind::Grrrr: return "grrrr";
    }
    return "2srr";
}

EstimatorKind parse_estimator(const std::string& s)
{
    for (auto e : {EstimatorKind::Ridge, EstimatorKind::TwoStep, EstimatorKind::Glrr, EstimatorKind::Grrrr})
        if (s == to_string(e)) return e;
    throw ValidationError("unknown estimator '" + s + "'");
}

void DgpSpec::validate() const
{
    if (T < 10) throw ValidationError("DgpSpec: T must be at least 10");
    if (K < 1) throw ValidationError("DgpSpec: K must be positive");
    if (!(share_varying >= 0.0 && share_varying <= 1.0)) throw ValidationError("DgpSpec: share must lie in [0, 1]");
    if (!(constant_sd >= 0.0)) throw ValidationError("DgpSpec: constant_sd must be nonnegative");
}

Index DgpSpec::varying_count() const
{
    if (share_varying <= 0.0) return 0;
    return std::clamp<Index>(static_cast<Index>(std::llround(share_varying * static_cast<double>(K))), 1, K);
}

namespace {

// Decorrelates derived seeds (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Vector minmax(const Vector& v, double lo, double hi)
{
    const double a = v.minCoeff(), b = v.maxCoeff();
    if (!(b > a)) return Vector::Constant(v.size(), 0.5 * (lo + hi));
    return ((v.array() - a) / (b - a) * (hi - lo) + lo).matrix();
}

double variance(const Vector& v)
{
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size());
}

Vector normal_vector(Index n, std::mt19937_64& rng, double sd = 1.0)
{
    std::normal_distribution<double> z(0.0, sd);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = z(rng);
    return v;
}

// Autoregressive response to a forcing series: out_t = a_t out_{t-1} + x_t, out_{-1} = 0.
Vector ar_filter(const Vector& a, const Vector& x)
{
    Vector out(x.size());
    double prev = 0.0;
    for (Index t = 0; t < x.size(); ++t) {
        prev = a[t] * prev + x[t];
        out[t] = prev;
    }
    return out;
}

// Noise variance giving population R^2 `r2` for y = s + sigma * eta with
// Var(s) = vs and Var(eta) = veta; nullopt when unreachable.
std::optional<double> calibrate_noise(double vs, double veta, double r2)
{
    const double q = 1.0 - r2;
    const double den = 1.0 - veta * q;
    if (!(den > 0.05) || !(vs > 0.0)) return std::nullopt;
    return vs * q / den;
}

struct Assembled {
    SimulatedInstance inst;
    bool ok = false;
};

// Builds y, X and the noise from coefficient paths whose first column is the
// lag coefficient. Exogenous regressors and unit shocks come from rng.
Assembled assemble(const Matrix& beta, NoiseRegime noise, std::mt19937_64& rng)
{
    const Index T = beta.rows();
    const Index K = beta.cols();
    Assembled out;
    Matrix Xexo = Matrix::Zero(T, K);
    for (Index k = 1; k < K; ++k) Xexo.col(k) = normal_vector(T, rng);
    const Vector e = normal_vector(T, rng);
    const Vector sv_shock = normal_vector(T, rng);

    const Vector a = beta.col(0);
    const Vector forcing = beta.cwiseProduct(Xexo).rowwise().sum();
    const Vector s = ar_filter(a, forcing);
    const Vector eta = ar_filter(a, e);
    const double vs = variance(s), veta = variance(eta);

    Vector h(T);
    switch (noise) {
    case NoiseRegime::Low:
    case NoiseRegime::Medium:
    case NoiseRegime::High: {
        const auto s2 = calibrate_noise(vs, veta, target_r2(noise));
        if (!s2) return out;
        h.setConstant(*s2);
        break;
    }
    case NoiseRegime::SvLowMed:
    case NoiseRegime::SvLowHigh: {
        const auto lo = calibrate_noise(vs, veta, target_r2(NoiseRegime::Low));
        const auto hi =
            calibrate_noise(vs, veta, target_r2(noise == NoiseRegime::SvLowMed ? NoiseRegime::Medium : NoiseRegime::High));
        if (!lo || !hi) return out;
        Vector g(T);
        double prev = 0.0;
        for (Index t = 0; t < T; ++t) g[t] = prev = 0.95 * prev + sv_shock[t];
        const Vector m = minmax(g, 0.0, 1.0);
        for (Index t = 0; t < T; ++t) h[t] = std::exp(std::log(*lo) + m[t] * (std::log(*hi) - std::log(*lo)));
        break;
    }
    }
    const Vector eps = h.cwiseSqrt().cwiseProduct(e);
    const Vector y = s + ar_filter(a, eps);
    if (y.cwiseAbs().maxCoeff() > 1e6 || !y.allFinite()) return out;

    SimulatedInstance& inst = out.inst;
    inst.data.y = y;
    inst.data.X = Xexo;
    inst.data.X(0, 0) = 0.0;
    for (Index t = 1; t < T; ++t) inst.data.X(t, 0) = y[t - 1];
    inst.data.series_names.push_back("y_lag1");
    for (Index k = 1; k < K; ++k) inst.data.series_names.push_back("x" + std::to_string(k + 1));
    inst.true_beta = beta;
    inst.true_sigma_eps_t = h;
    inst.eps = eps;
    inst.realized_r2 = 1.0 - variance(eps) / variance(y);
    out.ok = true;
    return out;
}

} // namespace

double target_r2(NoiseRegime n)
{
    switch (n) {
    case NoiseRegime::Low: return 0.8;
    case NoiseRegime::Medium: return 0.5;
    case NoiseRegime::High: return 0.3;
    default: throw ValidationError("target_r2: stochastic-volatility regimes have no single target");
    }
}

std::array<Vector, 5> gen_paths(Index T, std::uint64_t seed)
{
    if (T < 10) throw ValidationError("gen_paths: T must be at least 10");
    std::array<Vector, 5> f;
    const Index half = (T + 1) / 2;  // ceil(T/2), 1-based break date
    Vector u(T);
    for (Index t = 0; t < T; ++t) u[t] = static_cast<double>(t) / static_cast<double>(T - 1);

    f[0] = (2.0 * std::numbers::pi * u.array()).cos().matrix();
    f[1] = (u.array() - 0.5).square().matrix();
    f[2].resize(T);
    for (Index t = 0; t < T; ++t) f[2][t] = (t + 1 < half) ? -1.0 : 1.0;
    std::mt19937_64 rng(mix_seed(seed));
    const Vector z = normal_vector(T, rng);
    f[3].resize(T);
    double acc = 0.0;
    for (Index t = 0; t < T; ++t) f[3][t] = acc += z[t];
    f[3] = ((f[3].array() - f[3].mean()) / std::sqrt(std::max(variance(f[3]), 1e-300))).matrix();
    f[4].resize(T);
    for (Index t = 0; t < T; ++t) {
        const double tt = static_cast<double>(t + 1);
        const double h = static_cast<double>(half);
        f[4][t] = tt < h ? tt : h - 0.5 * (tt - h);
    }
    for (auto& v : f) v = minmax(v, -1.0, 1.0);
    return f;
}

SimulatedInstance gen_dgp(const DgpSpec& spec)
{
    spec.validate();
    const Index T = spec.T;
    const Index K = spec.K;
    const Index Kv = spec.varying_count();
    for (Index attempt = 0; attempt < 50; ++attempt) {
        std::mt19937_64 rng(mix_seed(spec.seed ^ (0xA5A5A5A5ULL * static_cast<std::uint64_t>(attempt + 1))));
        const auto f = gen_paths(T, rng());
        std::uniform_real_distribution<double> lag_const(0.0, 0.8);
        std::normal_distribution<double> other_const(0.0, spec.constant_sd);
        std::normal_distribution<double> loading(0.0, 1.0);
        Matrix beta(T, K);
        const Index n_step = Kv / 2;
        for (Index k = 1; k <= K; ++k) {
            Vector col;
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            if (k <= Kv) {
                switch (spec.design) {
                case Design::S1: col = sign * f[0]; break;
                case Design::S2: col = sign * f[1]; break;
                case Design::S3: col = sign * (k <= n_step ? f[2] : f[0]); break;
                case Design::S4: {
                    // Unit-variance mixture so the scale matches the single-path designs.
                    col = (loading(rng) * f[0] + loading(rng) * f[3] + loading(rng) * f[4]) / std::sqrt(3.0);
                    break;
                }
                }
                if (k == 1) col = minmax(col, 0.0, 0.8);
            } else {
                col = Vector::Constant(T, k == 1 ? lag_const(rng) : other_const(rng));
            }
            beta.col(k - 1) = col;
        }
        // The lag coefficient is shrunk when the noise target is unreachable.
        for (Index shrink = 0; shrink < 20; ++shrink) {
            std::mt19937_64 draw(mix_seed(spec.seed + 7919ULL * static_cast<std::uint64_t>(attempt)));
            Assembled a = assemble(beta, spec.noise, draw);
            if (a.ok) {
                a.inst.retries = attempt + shrink;
                return a.inst;
            }
            beta.col(0) *= 0.9;
        }
    }
    throw NumericalError("gen_dgp: could not generate a stable instance within the retry budget");
}

SimulatedInstance gen_random_walk_dgp(Index T, Index K, double sigma_eps, double sigma_u, std::uint64_t seed,
                                      double beta0_sd)
{
    if (T < 3 || K < 1) throw ValidationError("gen_random_walk_dgp: need T >= 3 and K >= 1");
    std::mt19937_64 rng(mix_seed(seed));
    SimulatedInstance inst;
    inst.data.X.resize(T, K);
    inst.true_beta.resize(T, K);
    for (Index k = 0; k < K; ++k) {
        inst.data.X.col(k) = normal_vector(T, rng);
        const Vector u = normal_vector(T, rng, sigma_u);
        std::normal_distribution<double> b0(0.0, beta0_sd);
        double level = b0(rng);
        for (Index t = 0; t < T; ++t) {
            if (t > 0) level += u[t];
            inst.true_beta(t, k) = level;
        }
        inst.data.series_names.push_back("x" + std::to_string(k + 1));
    }
    inst.eps = normal_vector(T, rng, sigma_eps);
    inst.data.y = inst.data.X.cwiseProduct(inst.true_beta).rowwise().sum() + inst.eps;
    inst.true_sigma_eps_t = Vector::Constant(T, sigma_eps * sigma_eps);
    inst.realized_r2 = 1.0 - variance(inst.eps) / variance(inst.data.y);
    return inst;
}

FactorInstance gen_factor_dgp(Index T, Index K, NoiseRegime noise, std::uint64_t seed)
{
    if (K < 2) throw ValidationError("gen_factor_dgp: need K >= 2");
    for (Index attempt = 0; attempt < 50; ++attempt) {
        std::mt19937_64 rng(mix_seed(seed ^ (0x5DEECE66DULL * static_cast<std::uint64_t>(attempt + 1))));
        const auto f = gen_paths(T, rng());
        std::uniform_real_distribution<double> lag_const(0.0, 0.8), other_const(-0.5, 0.5);
        std::normal_distribution<double> loading(0.0, 0.5);
        FactorInstance out;
        out.factor_level = f[0];
        out.loadings = Vector::Zero(K);
        Matrix beta(T, K);
        beta.col(0).setConstant(lag_const(rng));
        for (Index k = 1; k < K; ++k) {
            out.loadings[k] = loading(rng);
            beta.col(k) = Vector::Constant(T, other_const(rng)) + out.loadings[k] * f[0];
        }
        std::mt19937_64 draw(mix_seed(seed + 104729ULL * static_cast<std::uint64_t>(attempt)));
        Assembled a = assemble(beta, noise, draw);
        if (a.ok) {
            out.instance = a.inst;
            out.instance.retries = attempt;
            return out;
        }
    }
    throw NumericalError("gen_factor_dgp: could not generate a stable instance within the retry budget");
}

double mae(const Matrix& beta_hat, const Matrix& beta_true)
{
    if (beta_hat.rows() != beta_true.rows() || beta_hat.cols() != beta_true.cols())
        throw DimensionError("mae: shape mismatch");
    if (beta_hat.size() == 0) throw DimensionError("mae: empty matrices");
    return (beta_hat - beta_true).cwiseAbs().sum() / static_cast<double>(beta_hat.size());
}

Matrix fit_estimator(EstimatorKind kind, const RegressionData& data, const LawOfMotion& law, const CvSpec& cv,
                     const Parallelism& par, bool& converged)
{
    converged = true;
    switch (kind) {
    case EstimatorKind::Ridge: {
        const Standardization s = fit_standardization(data.X);
        const RegressionData sd = apply_standardization(data, s);
        const BasisExpansion e = build_expansion(sd, law, false);
        const CvResult r = kfold_cv(e, sd.y, cv, std::nullopt, par);
        return unstandardize(dual_ridge(e, sd.y, r.best_lambda, r.best_lambda0, par), s, e).beta;
    }
    case EstimatorKind::TwoStep: {
        TwoStepOptions o;
        o.par = par;
        return estimate_2srr(data, law, cv, o).estimate.beta;
    }
    case EstimatorKind::Glrr: {
        GlrrOptions o;
        o.first_stage.par = par;
        GlrrResult g = estimate_glrr(data, law, cv, o);
        converged = g.state.converged;
        return g.estimate.beta;
    }
    case EstimatorKind::Grrrr: {
        GrrrrOptions o;
        o.par = par;
        o.max_rank = std::min<Index>(5, data.K());
        GrrrrResult g = estimate_grrrr(data, law, cv, o);
        converged = g.converged;
        return g.estimate.beta;
    }
    }
    throw ValidationError("fit_estimator: unknown estimator");
}

std::string study_csv_header()
{
    return "design,T,K,share,noise,estimator,replication,mae,seconds,converged";
}

std::string study_csv_row(const StudyRecord& r)
{
    std::ostringstream os;
    os << to_string(r.spec.design) << ',' << r.spec.T << ',' << r.spec.K << ',' << format_number(r.spec.share_varying)
       << ',' << to_string(r.spec.noise) << ',' << to_string(r.estimator) << ',' << r.replication << ','
       << format_number(r.mae) << ',' << format_number(r.seconds) << ',' << (r.converged ? 1 : 0);
    return os.str();
}

StudyResult run_study(const StudyConfig& config)
{
    if (config.replications < 1) throw ValidationError("run_study: replications must be at least 1");
    if (config.setups.empty() || config.estimators.empty())
        throw ValidationError("run_study: need at least one setup and one estimator");
    for (const auto& s : config.setups) s.validate();

    std::ofstream csv;
    if (!config.csv_path.empty()) {
        csv.open(config.csv_path, std::ios::trunc);
        if (!csv) throw ValidationError("run_study: cannot write '" + config.csv_path + "'");
        csv << study_csv_header() << '\n' << std::flush;
    }

    const Index S = static_cast<Index>(config.setups.size());
    const Index R = config.replications;
    const Index E = static_cast<Index>(config.estimators.size());
    std::vector<StudyRecord> records(static_cast<std::size_t>(S * R * E));
    // Replications run in parallel; each fit stays single-threaded.
    const Parallelism inner{1};
    const int nt = config.par.resolved();

#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (Index task = 0; task < S * R; ++task) {
        const Index si = task / R;
        const Index rep = task % R;
        DgpSpec spec = config.setups[static_cast<std::size_t>(si)];
        spec.seed = config.setups[static_cast<std::size_t>(si)].seed ^ static_cast<std::uint64_t>(rep);
        std::optional<SimulatedInstance> inst;
        std::string gen_error;
        try {
            inst = gen_dgp(spec);
        } catch (const std::exception& ex) {
            gen_error = ex.what();
        }
        for (Index ei = 0; ei < E; ++ei) {
            StudyRecord& rec = records[static_cast<std::size_t>((si * E + ei) * R + rep)];
            rec.spec = spec;
            rec.estimator = config.estimators[static_cast<std::size_t>(ei)];
            rec.replication = rep;
            if (!inst) {
                rec.failed = true;
                rec.converged = false;
                rec.mae = std::numeric_limits<double>::quiet_NaN();
                rec.message = gen_error;
            } else {
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    bool converged = true;
                    const Matrix b = fit_estimator(rec.estimator, inst->data, config.law, config.cv, inner, converged);
                    rec.mae = mae(b, inst->true_beta);
                    rec.converged = converged;
                } catch (const std::exception& ex) {
                    rec.failed = true;
                    rec.converged = false;
                    rec.mae = std::numeric_limits<double>::quiet_NaN();
                    rec.message = ex.what();
                }
                rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
            if (csv.is_open()) {
#pragma omp critical(study_csv)
                {
                    csv << study_csv_row(rec) << '\n' << std::flush;
                }
            }
        }
    }

    StudyResult out;
    out.records = records;
    for (Index si = 0; si < S; ++si)
        for (Index ei = 0; ei < E; ++ei) {
            StudyCell cell;
            cell.spec = config.setups[static_cast<std::size_t>(si)];
            cell.estimator = config.estimators[static_cast<std::size_t>(ei)];
            double sum = 0.0, secs = 0.0;
            for (Index rep = 0; rep < R; ++rep) {
                const StudyRecord& r = records[static_cast<std::size_t>((si * E + ei) * R + rep)];
                if (r.failed) {
                    ++cell.failures;
                    continue;
                }
                sum += r.mae;
                secs += r.seconds;
                ++cell.completed;
            }
            cell.mean_mae = cell.completed ? sum / static_cast<double>(cell.completed)
                                           : std::numeric_limits<double>::quiet_NaN();
            cell.mean_seconds = cell.completed ? secs / static_cast<double>(cell.completed) : 0.0;
            out.failures += cell.failures;
            out.cells.push_back(cell);
        }

    if (csv.is_open()) {
        csv.close();
        std::string text = study_csv_header() + "\n";
        for (const auto& r : out.records) text += study_csv_row(r) + "\n";
        write_text(config.csv_path, text);
    }
    return out;
}

std::vector<TimingRow> benchmark_timing(const std::vector<Index>& T_list, const std::vector<Index>& K_list,
                                        const std::vector<EstimatorKind>& estimators, Index runs, std::uint64_t seed,
                                        const Parallelism& par)
{
    if (runs < 1) throw ValidationError("benchmark_timing: runs must be at least 1");
    std::vector<TimingRow> out;
    const CvSpec cv;
    for (Index T : T_list)
        for (Index K : K_list)
            for (EstimatorKind est : estimators) {
                TimingRow row{est, T, K, 0.0, runs};
                for (Index r = 0; r < runs; ++r) {
                    DgpSpec spec;
                    spec.T = T;
                    spec.K = K;
                    spec.seed = seed + static_cast<std::uint64_t>(r);
                    const SimulatedInstance inst = gen_dgp(spec);
                    bool converged = true;
                    const auto t0 = std::chrono::steady_clock::now();
                    fit_estimator(est, inst.data, LawOfMotion::random_walk(), cv, par, converged);
                    row.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
                row.seconds /= static_cast<double>(runs);
                out.push_back(row);
            }
    return out;
}

} // namespace tvp
