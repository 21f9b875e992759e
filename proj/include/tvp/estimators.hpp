#pragma once

#include <tvp/elastic_net.hpp>
#include <tvp/factors.hpp>
#include <tvp/tuning.hpp>
#include <tvp/volatility.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tvp {

// Regressor columns are divided by their standard deviation (constant
// columns are left alone); y is not transformed.
struct Standardization {
    Vector x_scale;
};

Standardization fit_standardization(const Matrix& X);
RegressionData apply_standardization(const RegressionData& data, const Standardization& s);
// Maps an estimate on standardized regressors back to the raw scale.
TvpEstimate unstandardize(const TvpEstimate& est, const Standardization& s, const BasisExpansion& e);

// ---------------------------------------------------------------- 2SRR

struct TwoStepOptions {
    bool standardize = true;
    bool volatility = true;       // false: flat Omega_eps
    bool update_sigma_u = true;   // false: homogeneous Omega_u in the second stage
    std::optional<double> bands_level;
    Parallelism par;
};

struct TwoStepResult {
    TvpEstimate estimate;         // raw scale
    TvpEstimate first_stage;      // raw scale
    TvpEstimate standardized;     // final estimate on standardized regressors
    CvResult first_cv;
    std::optional<CvResult> second_cv;
    GarchFit garch;
    Standardization scaling;
    double sigma2_eps = 0.0;      // residual variance scale of the final fit
};

TwoStepResult estimate_2srr(const RegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                            const TwoStepOptions& options = {});

// ---------------------------------------------------------------- GLRR

struct GlrrOptions {
    double mix_alpha = 0.5;
    double tolerance = 1e-4;
    Index max_iterations = 50;
    double delta = 1e-8;
    double selection_threshold = 1e-6;
    bool refresh_volatility = true;
    bool final_cv = false;
    // After the iteration stops, blocks whose zero-drift optimality condition
    // for the limiting group-lasso problem holds at the final iterate are set
    // constant. The weight iteration only approaches such zeros geometrically.
    bool zero_block_check = true;
    TwoStepOptions first_stage;
};

struct GlrrState {
    double mix_alpha = 0.5;
    double tilde_lambda = 0.0;
    Index blocks = 0;
    Vector first_stage_sigma_u;   // shape s_(1), mean one
    Vector current_sigma_u;       // s_(i), same units
    Vector penalty_weights;       // infinite when selected out
    Index iteration = 0;
    bool converged = false;
};

// lambda_uk = tilde_lambda * blocks * [alpha / s1_k + (1 - alpha) / (sqrt(s_k) + delta)],
// infinite where s1_k = 0 or sqrt(s_k) < threshold.
Vector glrr_penalty_weights(const GlrrState& state, double delta, double selection_threshold);

struct GlrrResult {
    TvpEstimate estimate;
    std::vector<bool> selected;   // per original coefficient
    GlrrState state;
    std::vector<GlrrState> history;
    TwoStepResult first_stage;
};

GlrrResult estimate_glrr(const RegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                         const GlrrOptions& options = {});

// Adaptive-ridge iteration on a plain design with singleton groups, using
// the same weight rule; its fixed point solves
//   (1/2)|y - A b|^2 + (1/2) sum rho_j b_j^2 + kappa sum |b_j|,
// rho_j = tilde_lambda * alpha / s1_j, kappa = tilde_lambda * (1 - alpha) / sqrt(unit).
struct AdaptiveRidgeResult {
    Vector coef;
    Index iterations = 0;
    bool converged = false;
};
AdaptiveRidgeResult adaptive_ridge(const Matrix& A, const Vector& y, double tilde_lambda, double mix_alpha,
                                   const Vector& s1, double unit, Index max_iterations = 5000,
                                   double tolerance = 1e-12, double delta = 1e-8);

// ---------------------------------------------------------------- GRRRR

struct GrrrrOptions {
    Index max_rank = 5;
    double variance_threshold = 0.9;
    std::optional<double> xi;
    std::optional<double> lambda_f;
    double mixing = 0.5;
    Index max_iterations = 100;
    double tolerance = 1e-6;
    double monotone_slack = 1e-8;
    double beta0_ridge = 1e-6;
    double enet_tolerance = 1e-10;
    bool refresh_volatility = true;
    bool standardize = true;
    // Rotate to the identified form (unit mean-square orthogonal factor rows)
    // after every half-step. The fit is unchanged; the penalty split is not.
    bool identify_each_step = true;
    // xi and lambda_f, when not supplied, are re-selected by CV at the start of
    // each of the first `retune_iterations` iterations, then frozen. Selection
    // also freezes early once an iteration picks the same pair as the last.
    Index retune_iterations = 10;
    Index xi_grid_points = 10;
    Index lambda_f_grid_points = 13;
    TwoStepOptions init;
    Parallelism par;
};

struct GrrrrStep {
    Index iteration = 0;
    char kind = 'f';  // f: factor step, l: loading step, d: factor drop, n: identification
    double before = 0.0;
    double after = 0.0;
};

struct GrrrrResult {
    TvpEstimate estimate;                 // raw scale
    FactorStructure factors;              // identified form of the final iterate
    std::vector<double> objective_history;
    std::vector<GrrrrStep> steps;
    std::vector<Matrix> loading_history;  // raw iterates, one per iteration
    std::vector<Matrix> factor_history;
    std::vector<Vector> beta0_history;
    double xi = 0.0;
    double lambda_f = 0.0;
    bool converged = false;
    Index iterations = 0;
    Vector sigma_eps_t;
    TwoStepResult initial;
};

// Penalized objective
//   sum_t (y_t - fit_t)^2 / omega_t + lambda_f |F|^2 + mu |b|^2
//   + 2T xi (mixing |Lambda|_1 + (1 - mixing)/2 |Lambda|^2).
double grrrr_objective(const BasisExpansion& e, const Vector& y, const Vector& omega, const Vector& b,
                       const Matrix& loadings, const Matrix& factors, double lambda_f, double xi, double mixing,
                       double mu);

GrrrrResult estimate_grrrr(const RegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                           const GrrrrOptions& options = {});

// Alternation from given loadings with fixed hyperparameters and weights;
// no standardization, no initial 2SRR. Requires options.xi and options.lambda_f.
GrrrrResult grrrr_alternate(const RegressionData& data, const LawOfMotion& law, const Matrix& loadings_init,
                            const Vector& omega, const GrrrrOptions& options);

struct Rank1OracleOptions {
    double lambda_f = 1.0;
    double xi = 0.01;
    double mixing = 0.5;
    double beta0_ridge = 1e-6;
    double enet_tolerance = 1e-12;
    Index iterations = 10;
};

struct Rank1OracleResult {
    TvpEstimate estimate;
    Vector l;
    Vector f;
    Vector b;
    std::vector<Vector> l_history;
    std::vector<Vector> f_history;
    std::vector<Vector> b_history;
    std::vector<double> objective;  // after each half-step
};

// Summation-form single-factor loop: TVP ridge on xbar_t = sum_k l_k X_kt,
// then elastic net on X^f_kt = fbar_t X_kt with fbar the factor's level path.
Rank1OracleResult grrrr_rank1_oracle(const RegressionData& data, const LawOfMotion& law, const Vector& l_init,
                                     const Rank1OracleOptions& options = {});

// ---------------------------------------------------------------- MV-GRRRR

struct MultiRegressionData {
    Matrix Y;  // T x M
    Matrix X;  // T x K, shared
    std::vector<std::string> series_names;
};

struct MvGrrrrResult {
    std::vector<TvpEstimate> estimates;
    FactorStructure factors;              // loadings stacked (M*K) x r
    std::vector<double> objective_history;
    bool converged = false;
    bool primal_factor_step = false;
    Index iterations = 0;
};

// Factor step for shared F given per-equation loadings (each K x r); returns
// F (r x (T-1)) and per-equation beta0 (K x M).
struct MvFactorStep {
    Matrix factors;
    Matrix beta0;
    bool primal = false;
};
MvFactorStep mv_factor_step(const BasisExpansion& e, const Matrix& Y, const Matrix& omega,
                            const std::vector<Matrix>& loadings, double lambda_f, double mu, bool force_primal = false,
                            bool force_dual = false);

// Per-equation loading step with shared F: M independent elastic nets.
struct MvLoadingStep {
    std::vector<Matrix> loadings;
    Matrix beta0;
};
MvLoadingStep mv_loadings_step(const BasisExpansion& e, const Matrix& Y, const Matrix& omega, const Matrix& factors,
                               const std::vector<Matrix>& loadings_warm, const Matrix& beta0_warm,
                               const Vector& xi, double mixing, double mu);

MvGrrrrResult estimate_mv_grrrr(const MultiRegressionData& data, const LawOfMotion& law, const CvSpec& spec,
                                const GrrrrOptions& options = {});

// ---------------------------------------------------------------- bands

double normal_quantile(double p);

// beta +- z * posterior sd with the estimate's own profile and a residual
// variance estimated from its residuals.
Bands credible_bands(const TvpEstimate& estimate, const BasisExpansion& e, double level,
                     const PosteriorOptions& options = {PosteriorMode::DiagonalOnly, 4000});

} // namespace tvp
