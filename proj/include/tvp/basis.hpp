#pragma once

#include <tvp/common.hpp>

#include <string>
#include <utility>
#include <vector>

namespace tvp {

struct RegressionData {
    Vector y;
    Matrix X;
    std::vector<std::string> series_names;

    Index T() const { return y.size(); }
    Index K() const { return X.cols(); }

    // Throws ValidationError / DimensionError.
    void validate() const;
};

enum class LawKind { RandomWalk, RandomWalkWithDrift, LocalLevel, AutoRegressive };

struct LawOfMotion {
    LawKind kind = LawKind::RandomWalk;
    double phi = 1.0;

    static LawOfMotion random_walk() { return {LawKind::RandomWalk, 1.0}; }
    static LawOfMotion random_walk_with_drift() { return {LawKind::RandomWalkWithDrift, 1.0}; }
    static LawOfMotion local_level() { return {LawKind::LocalLevel, 1.0}; }
    static LawOfMotion autoregressive(double phi) { return {LawKind::AutoRegressive, phi}; }

    void validate() const;
    std::string name() const;
    // Accepts "rw", "rw-drift", "local-level", "ar:<phi>".
    static LawOfMotion parse(const std::string& text);
};

Matrix build_summation_matrix(Index T, const LawOfMotion& law);

// Reparametrized design. Each block j holds T columns ordered
// [beta0, u_1 .. u_{T-1}] and equals diag(regressors.col(j)) * C.
//
// For the drift law the regressor set is augmented with (t/T) X_k, so there
// are 2K blocks; block j contributes to original coefficient source[j] with
// time modulation modulation.col(j).
struct BasisExpansion {
    Matrix Z;           // T x (blocks*T); empty unless materialized
    Matrix C;           // T x T lower triangular
    LawOfMotion law;
    Matrix regressors;  // T x blocks, effective regressors
    Matrix modulation;  // T x blocks, 1 or t/T
    std::vector<Index> source;
    Index T = 0;
    Index K = 0;        // original coefficient count

    // Cached pieces used by the dual solvers.
    Matrix G_u;         // C_u C_u', C_u = C without its first column
    Vector c1;          // first column of C
    Vector c_inverse;   // first column of C^{-1} when short (every built-in law); else empty

    Index blocks() const { return regressors.cols(); }
    Index column(Index block, Index tau) const { return block * T + tau; }
    std::pair<Index, Index> locate(Index col) const { return {col / T, col % T}; }
    std::vector<Index> beta0_columns() const;
    std::vector<Index> u_columns() const;
    // Returns Z, building it if it was not materialized.
    Matrix design() const;
    // Columns multiplying beta0 of each block: regressors .* c1.
    Matrix beta0_design() const;
};

BasisExpansion build_expansion(const RegressionData& data, const LawOfMotion& law,
                               bool materialize = true);

// Z~ = Omega_eps^{-1/2} Z Omega_theta^{1/2}, y~ = Omega_eps^{-1/2} y.
std::pair<Matrix, Vector> apply_gls_weights(const Matrix& Z, const Vector& y,
                                            const Vector& sigma_eps_t,
                                            const Vector& omega_theta_diag);

// Column j = C_u' (A_j .* alpha), (T-1) x A.cols(); uses the short
// inverse recursion when available.
Matrix drift_scores(const BasisExpansion& expansion, const Matrix& A, const Vector& alpha,
                    const Parallelism& par = {});

// Per-block paths C theta_j, T x blocks.
Matrix block_paths(const Vector& theta, const BasisExpansion& expansion);

// Coefficient paths on the original regressors, T x K.
Matrix recover_beta(const Vector& theta, const BasisExpansion& expansion);

// Z theta without materializing Z.
Vector apply_design(const Vector& theta, const BasisExpansion& expansion);

// The two above from precomputed block paths.
Matrix beta_from_paths(const Matrix& paths, const BasisExpansion& expansion);
Vector fitted_from_paths(const Matrix& paths, const BasisExpansion& expansion);

} // namespace tvp
