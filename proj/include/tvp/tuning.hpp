#pragma once

#include <tvp/ridge.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace tvp {

enum class FoldAssignment { RandomFolds, ContiguousBlocks };

// {0.1, 1, 10}: beta0 penalties tried by the first-stage CV.
Vector default_lambda0_grid();

struct CvSpec {
    Index n_folds = 5;
    Vector lambda_grid;                  // empty: built by make_lambda_grid
    Vector lambda0_grid = default_lambda0_grid();
    FoldAssignment assignment = FoldAssignment::RandomFolds;
    std::uint64_t seed = 12345;
    bool refit_second_stage = true;
    Index grid_points = 60;
    double grid_decades = 6.0;

    void validate(Index T) const;
};

struct CvResult {
    double best_lambda = 0.0;
    double best_lambda0 = 0.0;
    Index best_index = 0;
    Vector lambda_grid;
    Vector curve;             // mean held-out MSE per lambda, at best_lambda0
    Matrix per_fold_errors;   // folds x grid, at best_lambda0
    Matrix curve_by_lambda0;  // lambda0_grid x lambda_grid
    Index skipped_folds = 0;
};

// Fold label per observation, deterministic given the seed.
std::vector<Index> assign_folds(Index T, Index n_folds, FoldAssignment assignment, std::uint64_t seed);

// Log-spaced grid centered on trace(ZZ')/T spanning `decades` decades.
Vector make_lambda_grid(const Vector& y, const Matrix& Z, Index points, double decades);
Vector make_lambda_grid(const BasisExpansion& e, Index points, double decades);

// The profile, when given, fixes Omega_eps, lambda0 and the shape of Omega_u;
// candidate lambdas rescale Omega_u by profile.lambda / lambda.
CvResult kfold_cv(const BasisExpansion& e, const Vector& y, const CvSpec& spec,
                  const std::optional<VarianceProfile>& profile = std::nullopt, const Parallelism& par = {});

// Shared-factorization CV across M equations; the returned result scores the
// summed held-out error of all equations.
CvResult kfold_cv_multi(const BasisExpansion& e, const Matrix& Y, const CvSpec& spec, const Parallelism& par = {});

// Generic engine for  V(lambda) = diag(omega) + Ku1 / lambda  with fixed
// regressors X0 ridge-penalized at lambda0. Returns held-out MSE summed over
// the columns of Y, indexed [fold][lambda0 * n_lambda + lambda].
struct KernelCvOutput {
    Matrix errors;             // folds x (n_lambda0 * n_lambda)
    std::vector<bool> skipped; // per fold
};
KernelCvOutput kernel_cv(const Matrix& Ku1, const Matrix& X0, const Vector& omega, const Matrix& Y,
                         const std::vector<Index>& folds, Index n_folds, const Vector& lambda_grid,
                         const Vector& lambda0_grid, const Parallelism& par = {});

CvResult reduce_cv(const KernelCvOutput& raw, const Vector& lambda_grid, const Vector& lambda0_grid);

enum class DifferencePenalty { LevelAnchored, PureDifference };

struct SmoothnessCv {
    Vector best_phi;       // per column
    Matrix curve;          // grid x columns
    Index factorizations = 0;
};

// k-fold choice of phi for the smoother (I + phi D'D)^{-1}, one T x T
// factorization per grid value shared by all columns and folds.
SmoothnessCv cv_smoothness(const Matrix& eta_tilde, const Vector& phi_grid, Index n_folds,
                           std::uint64_t seed = 12345, DifferencePenalty penalty = DifferencePenalty::LevelAnchored);

} // namespace tvp
