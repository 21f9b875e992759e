#pragma once

#include <tvp/estimators.hpp>
#include <tvp/simlab.hpp>

#include <random>

namespace testing {

inline tvp::Matrix gaussian(tvp::Index r, tvp::Index c, std::mt19937_64& rng)
{
    std::normal_distribution<double> z;
    tvp::Matrix m(r, c);
    for (tvp::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

inline tvp::Vector gaussian(tvp::Index n, std::mt19937_64& rng) { return gaussian(n, 1, rng).col(0); }

inline double max_abs(const tvp::Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// Direct KT x KT solve of the split-penalty problem
//   (y - Z theta)' W (y - Z theta) + lambda0 |beta0|^2 + sum_k |u_k|^2 / sigma_u_k,
// W = diag(1 / sigma_eps_t). Blocks with sigma_u_k = 0 have their u-columns removed.
inline tvp::Vector primal_theta(const tvp::BasisExpansion& e, const tvp::Vector& y, const tvp::VarianceProfile& p)
{
    const tvp::Matrix Z = e.design();
    std::vector<tvp::Index> keep;
    std::vector<double> prec;
    for (tvp::Index j = 0; j < e.blocks(); ++j) {
        keep.push_back(e.column(j, 0));
        prec.push_back(p.lambda0);
        if (p.sigma_u_k[j] > 0.0)
            for (tvp::Index tau = 1; tau < e.T; ++tau) {
                keep.push_back(e.column(j, tau));
                prec.push_back(1.0 / p.sigma_u_k[j]);
            }
    }
    const tvp::Index n = static_cast<tvp::Index>(keep.size());
    tvp::Matrix Zk(e.T, n);
    for (tvp::Index i = 0; i < n; ++i) Zk.col(i) = Z.col(keep[i]);
    const tvp::Vector w = p.sigma_eps_t.cwiseInverse();
    tvp::Matrix A = Zk.transpose() * w.asDiagonal() * Zk;
    for (tvp::Index i = 0; i < n; ++i) A(i, i) += prec[i];
    const tvp::Vector sol = A.ldlt().solve(Zk.transpose() * w.cwiseProduct(y));
    tvp::Vector theta = tvp::Vector::Zero(Z.cols());
    for (tvp::Index i = 0; i < n; ++i) theta[keep[i]] = sol[i];
    return theta;
}

inline tvp::RegressionData random_data(tvp::Index T, tvp::Index K, std::mt19937_64& rng)
{
    return tvp::RegressionData{gaussian(T, rng), gaussian(T, K, rng), {}};
}

} // namespace testing
