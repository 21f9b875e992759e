#include <tvp/kernels.hpp>
#include <tvp/ridge.hpp>

#include <sstream>

namespace tvp {

namespace {

// Full route: primal precision Z~'Z~ + Omega_theta^{-1} over the columns with
// positive prior variance, mapped to beta through C and the block modulation.
PosteriorVariance full_posterior(const BasisExpansion& e, const VarianceProfile& profile, double sigma2)
{
    const Index T = e.T;
    std::vector<Index> active;
    std::vector<double> prior;
    for (Index j = 0; j < e.blocks(); ++j) {
        active.push_back(e.column(j, 0));
        prior.push_back(1.0 / profile.lambda0);
        if (profile.sigma_u_k[j] > 0.0)
            for (Index tau = 1; tau < T; ++tau) {
                active.push_back(e.column(j, tau));
                prior.push_back(profile.sigma_u_k[j]);
            }
    }
    const Index n = static_cast<Index>(active.size());
    const Matrix Zfull = e.design();
    const Vector w = profile.sigma_eps_t.cwiseSqrt().cwiseInverse();
    Matrix Zt(T, n);
    for (Index c = 0; c < n; ++c) Zt.col(c) = Zfull.col(active[c]).cwiseProduct(w);

    Matrix P = Zt.transpose() * Zt;
    for (Index c = 0; c < n; ++c) P(c, c) += 1.0 / prior[c];

    // beta_k(t) = sum over blocks of source k: m_j(t) * sum_s C(t,s) theta_j(s)
    Matrix B = Matrix::Zero(e.K * T, n);
    for (Index c = 0; c < n; ++c) {
        const auto [j, s] = e.locate(active[c]);
        const Index k = e.source[j];
        for (Index t = s; t < T; ++t) B(k * T + t, c) = e.modulation(t, j) * e.C(t, s);
    }

    const SpdFactor f = factor_spd(P, "posterior precision");
    const Matrix X = f.llt.solve(B.transpose());
    PosteriorVariance out;
    out.covariance = sigma2 * (B * X);
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    out.sd.resize(T, e.K);
    for (Index k = 0; k < e.K; ++k)
        for (Index t = 0; t < T; ++t) out.sd(t, k) = std::sqrt(std::max(0.0, out.covariance(k * T + t, k * T + t)));
    return out;
}

// Diagonal route through the T x T dual system:
//   Var(beta_k) = P_k - Q_k V^{-1} Q_k',  V = Omega_eps + Z Omega_theta Z'.
PosteriorVariance diagonal_posterior(const BasisExpansion& e, const VarianceProfile& profile, double sigma2)
{
    const Index T = e.T;
    const Matrix X0 = e.beta0_design();
    Matrix V = dual_gram(e, profile);
    V += X0 * X0.transpose() / profile.lambda0;
    const SpdFactor f = factor_spd(V, "posterior dual Gram");
    const auto L = f.llt.matrixL();

    PosteriorVariance out;
    out.sd = Matrix::Zero(T, e.K);
    Matrix prior_diag = Matrix::Zero(T, e.K);
    std::vector<Matrix> Q(e.K, Matrix::Zero(T, T));
    const Matrix c1c1 = e.c1 * e.c1.transpose();
    for (Index j = 0; j < e.blocks(); ++j) {
        const Index k = e.source[j];
        const Matrix Pj = c1c1 / profile.lambda0 + profile.sigma_u_k[j] * e.G_u;
        const Vector& m = e.modulation.col(j);
        Q[k] += m.asDiagonal() * Pj * e.regressors.col(j).asDiagonal();
        prior_diag.col(k) += m.cwiseProduct(m).cwiseProduct(Pj.diagonal());
    }
    for (Index k = 0; k < e.K; ++k) {
        const Matrix W = L.solve(Q[k].transpose());
        const Vector reduction = W.colwise().squaredNorm().transpose();
        for (Index t = 0; t < T; ++t)
            out.sd(t, k) = std::sqrt(std::max(0.0, sigma2 * (prior_diag(t, k) - reduction[t])));
    }
    return out;
}

} // namespace

PosteriorVariance posterior_variance(const BasisExpansion& e, const VarianceProfile& profile, double sigma2_eps,
                                     const PosteriorOptions& options)
{
    profile.validate(e.T, e.blocks());
    if (!(sigma2_eps >= 0.0)) throw ValidationError("posterior_variance: residual variance must be nonnegative");
    if (options.mode == PosteriorMode::DiagonalOnly) return diagonal_posterior(e, profile, sigma2_eps);
    const Index dim = e.blocks() * e.T;
    if (dim > options.max_full_dimension) {
        std::ostringstream os;
        os << "posterior_variance: full covariance needs a " << dim << " x " << dim
           << " solve, above the ceiling of " << options.max_full_dimension
           << "; use the diagonal-only mode";
        throw ResourceError(os.str());
    }
    return full_posterior(e, profile, sigma2_eps);
}

double residual_variance(const BasisExpansion& e, const VarianceProfile& profile, const Vector& residuals)
{
    profile.validate(e.T, e.blocks());
    const Matrix X0 = e.beta0_design();
    Matrix V = dual_gram(e, profile);
    V += X0 * X0.transpose() / profile.lambda0;
    const SpdFactor f = factor_spd(V, "residual variance Gram");
    const Matrix Vi = f.llt.solve(Matrix::Identity(e.T, e.T));
    double dof = 0.0, rss = 0.0;
    for (Index t = 0; t < e.T; ++t) {
        dof += profile.sigma_eps_t[t] * Vi(t, t);
        rss += residuals[t] * residuals[t] / profile.sigma_eps_t[t];
    }
    return dof > 0.0 ? rss / dof : rss / static_cast<double>(e.T);
}

} // namespace tvp
