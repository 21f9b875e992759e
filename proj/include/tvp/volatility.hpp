#pragma once

#include <tvp/tuning.hpp>

#include <cstdint>
#include <string>

namespace tvp {

struct GarchParams {
    double omega = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double loglik = 0.0;
};

struct GarchFit {
    GarchParams params;
    Vector sigma2;
    bool fallback = false;
    std::string note;
};

// Gaussian quasi-likelihood with h_1 set to the sample variance.
double garch_loglik(const Vector& residuals, double omega, double alpha, double beta);
Vector garch_filter(const Vector& residuals, double omega, double alpha, double beta);

// Multi-start simplex maximum likelihood. Never throws on estimation
// trouble: short or ill-behaved samples fall back to a rolling variance.
GarchFit fit_garch11(const Vector& residuals);

// Trailing window variance (about zero mean), floored.
Vector rolling_variance(const Vector& residuals, Index window = 12, double floor = 1e-8);

Vector simulate_garch11(Index T, double omega, double alpha, double beta, std::uint64_t seed, Index burn = 500);

Vector normalize_mean_one(const Vector& path);

// D is C^{-1} (level-anchored) or the (T-1) x T pure first difference.
Matrix difference_operator(Index T, DifferencePenalty penalty = DifferencePenalty::LevelAnchored);
Matrix smoother_matrix(Index T, double phi, DifferencePenalty penalty = DifferencePenalty::LevelAnchored);

// Non-redundant products eps_i eps_j, i <= j, in row-major upper order.
Matrix covariance_outer_series(const Matrix& eps);

Matrix smooth_covariance_paths(const Matrix& eps, const Vector& phi_per_column,
                               DifferencePenalty penalty = DifferencePenalty::LevelAnchored);

} // namespace tvp
