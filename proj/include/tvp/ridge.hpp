#pragma once

#include <tvp/basis.hpp>

#include <optional>
#include <vector>

namespace tvp {

// Diagonal variance structure of the generalized problem
//   min (y - Z theta)' Omega_eps^{-1} (y - Z theta) + lambda0 |beta0|^2 + u' Omega_u^{-1} u.
// sigma_u_k holds one prior variance per expansion block; zero pins the
// block's path to a constant. For a homogeneous profile sigma_u_k = 1/(lambda K).
struct VarianceProfile {
    Vector sigma_eps_t;
    Vector sigma_u_k;
    double lambda0 = 1.0;
    double lambda = 1.0;

    static VarianceProfile homogeneous(Index T, Index blocks, double lambda, double lambda0);
    void validate(Index T, Index blocks) const;
};

struct Bands {
    Matrix lower;
    Matrix upper;
    double level = 0.0;
};

struct TvpEstimate {
    Matrix beta;        // T x K
    Vector theta;       // blocks*T, layout of BasisExpansion
    Vector residuals;
    Vector fitted;
    double lambda = 0.0;
    VarianceProfile profile;
    std::optional<Bands> bands;
    LawOfMotion law;
};

// Cholesky with escalating diagonal jitter (1e-10 .. 1e-6 of the mean
// diagonal). Throws NumericalError carrying a condition estimate.
struct SpdFactor {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;
};
SpdFactor factor_spd(const Matrix& A, const char* what);
double condition_estimate(const Matrix& A);

// Solves the split-penalty problem through its T x T dual system
//   V = Omega_eps + Z_u Omega_u Z_u',
//   b = (X0' V^{-1} X0 + lambda0 I)^{-1} X0' V^{-1} y,   alpha = V^{-1}(y - X0 b).
// The factorization is built once and reused for any number of right-hand sides.
class DualSystem {
public:
    DualSystem(const Matrix& V, const Matrix& X0, double lambda0);
    void solve(const Matrix& Y, Matrix& b, Matrix& alpha) const;
    const Eigen::LLT<Matrix>& factor() const { return v_.llt; }

private:
    SpdFactor v_;
    Matrix X0_;
    Matrix ViX0_;
    Eigen::LLT<Matrix> g_;
};

// Omega_eps + Z_u Omega_u Z_u' for a profile.
Matrix dual_gram(const BasisExpansion& e, const VarianceProfile& profile, const Parallelism& par = {});

TvpEstimate dual_ridge(const BasisExpansion& e, const Vector& y, double lambda, double lambda0,
                       const Parallelism& par = {});

TvpEstimate generalized_dual_ridge(const BasisExpansion& e, const Vector& y, const VarianceProfile& profile,
                                   const Parallelism& par = {});

std::vector<TvpEstimate> multivariate_dual_ridge(const BasisExpansion& e, const Matrix& Y, double lambda,
                                                 double lambda0, const Parallelism& par = {});

std::vector<TvpEstimate> multivariate_generalized_dual_ridge(const BasisExpansion& e, const Matrix& Y,
                                                             const VarianceProfile& profile,
                                                             const Parallelism& par = {});

// Builds a TvpEstimate from the beta0 coefficients and the drift matrix
// U ((T-1) x blocks).
TvpEstimate assemble_estimate(const BasisExpansion& e, const Vector& y, const Vector& b, const Matrix& U,
                              const VarianceProfile& profile);

// Drift innovations of a theta vector as a (T-1) x blocks matrix.
Matrix drift_matrix(const Vector& theta, const BasisExpansion& e);

enum class PosteriorMode { Full, DiagonalOnly };

struct PosteriorOptions {
    PosteriorMode mode = PosteriorMode::Full;
    Index max_full_dimension = 4000;  // ceiling on K*T for the full route
};

struct PosteriorVariance {
    Matrix sd;          // T x K posterior standard deviations of beta
    Matrix covariance;  // (K*T) x (K*T), coefficient-major; empty in diagonal mode
};

// Posterior of beta under the Gaussian prior implied by the profile, with
// sigma2_eps the residual variance scale. Hyperparameters are taken as known.
PosteriorVariance posterior_variance(const BasisExpansion& e, const VarianceProfile& profile, double sigma2_eps,
                                     const PosteriorOptions& options = {});

// Residual variance scale: weighted RSS over residual degrees of freedom
// sum_t omega_t (V_full^{-1})_tt.
double residual_variance(const BasisExpansion& e, const VarianceProfile& profile, const Vector& residuals);

} // namespace tvp
