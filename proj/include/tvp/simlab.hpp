#pragma once

#include <tvp/estimators.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tvp {

enum class Design { S1, S2, S3, S4 };
enum class NoiseRegime { Low, Medium, High, SvLowMed, SvLowHigh };

std::string to_string(Design d);
std::string to_string(NoiseRegime n);
Design parse_design(const std::string& s);
NoiseRegime parse_noise(const std::string& s);

struct DgpSpec {
    Design design = Design::S1;
    Index T = 300;
    Index K = 6;
    double share_varying = 0.2;
    NoiseRegime noise = NoiseRegime::Low;
    std::uint64_t seed = 1;
    // Non-lag constants are N(0, constant_sd^2); the lag constant is U(0, 0.8).
    double constant_sd = 1.0;

    void validate() const;
    // Number of time-varying coefficients, max(1, round(share * K)); zero share gives zero.
    Index varying_count() const;
};

struct SimulatedInstance {
    RegressionData data;
    Matrix true_beta;
    Vector true_sigma_eps_t;  // variance path
    Vector eps;
    double realized_r2 = 0.0;
    Index retries = 0;
};

// f1 cosine, f2 quadratic, f3 step, f4 random walk, f5 kinked trend, each min-max scaled to [-1, 1].
std::array<Vector, 5> gen_paths(Index T, std::uint64_t seed);

// Target R^2 of a homoscedastic regime; SV regimes move between two of these.
double target_r2(NoiseRegime n);

SimulatedInstance gen_dgp(const DgpSpec& spec);

// Gaussian random-walk coefficients with known variances:
//   beta_k,0 ~ N(0, beta0_sd^2), u ~ N(0, sigma_u^2), eps ~ N(0, sigma_eps^2), X ~ N(0, 1).
SimulatedInstance gen_random_walk_dgp(Index T, Index K, double sigma_eps, double sigma_u, std::uint64_t seed,
                                      double beta0_sd = 1.0);

// Single-factor design: X = [y_{t-1}, N(0,1) ...], coefficient k >= 2 follows
// beta_k,0 + l_k f1_t with l_k ~ N(0, 0.5^2); the lag coefficient is constant.
struct FactorInstance {
    SimulatedInstance instance;
    Vector factor_level;  // f1, length T
    Vector loadings;      // K, zero for the lag coefficient
};
FactorInstance gen_factor_dgp(Index T, Index K, NoiseRegime noise, std::uint64_t seed);

// Mean absolute deviation over all (t, k).
double mae(const Matrix& beta_hat, const Matrix& beta_true);

enum class EstimatorKind { Ridge, TwoStep, Glrr, Grrrr };
std::string to_string(EstimatorKind e);
EstimatorKind parse_estimator(const std::string& s);

struct StudyConfig {
    std::vector<DgpSpec> setups;  // seed field is the base seed
    std::vector<EstimatorKind> estimators;
    Index replications = 50;
    CvSpec cv;
    LawOfMotion law;
    Parallelism par;
    std::string csv_path;  // empty: no file
};

struct StudyRecord {
    DgpSpec spec;
    EstimatorKind estimator = EstimatorKind::TwoStep;
    Index replication = 0;
    double mae = 0.0;  // NaN when the estimator failed
    double seconds = 0.0;
    bool converged = true;
    bool failed = false;
    std::string message;
};

struct StudyCell {
    DgpSpec spec;
    EstimatorKind estimator = EstimatorKind::TwoStep;
    double mean_mae = 0.0;
    double mean_seconds = 0.0;
    Index completed = 0;
    Index failures = 0;
};

struct StudyResult {
    std::vector<StudyRecord> records;  // sorted by (setup, estimator, replication)
    std::vector<StudyCell> cells;
    Index failures = 0;
};

// Fits one estimator and returns its beta paths; convergence is reported through `converged`.
Matrix fit_estimator(EstimatorKind kind, const RegressionData& data, const LawOfMotion& law, const CvSpec& cv,
                     const Parallelism& par, bool& converged);

std::string study_csv_header();
std::string study_csv_row(const StudyRecord& r);

// Replication seed: base XOR replication index. Rows are appended to
// csv_path as they complete and the file is rewritten in sorted order at the end.
StudyResult run_study(const StudyConfig& config);

struct TimingRow {
    EstimatorKind estimator = EstimatorKind::TwoStep;
    Index T = 0;
    Index K = 0;
    double seconds = 0.0;
    Index runs = 0;
};

// Wall-clock seconds per fit including cross-validation, averaged over `runs`
// S1 Low-noise instances.
std::vector<TimingRow> benchmark_timing(const std::vector<Index>& T_list, const std::vector<Index>& K_list,
                                        const std::vector<EstimatorKind>& estimators, Index runs,
                                        std::uint64_t seed = 1, const Parallelism& par = {});

} // namespace tvp
