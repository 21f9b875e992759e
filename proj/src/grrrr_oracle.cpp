#include <tvp/estimators.hpp>

#include <cmath>

namespace tvp {

// Single-factor alternation written in summation form with a dense primal
// solve in the factor step. Kept deliberately apart from the dual code path.
Rank1OracleResult grrrr_rank1_oracle(const RegressionData& data, const LawOfMotion& law, const Vector& l_init,
                                     const Rank1OracleOptions& options)
{
    const BasisExpansion e = build_expansion(data, law, false);
    const Index T = e.T;
    const Index J = e.blocks();
    if (l_init.size() != J) throw DimensionError("grrrr_rank1_oracle: l_init needs one entry per block");
    const Matrix& C = e.C;
    const Matrix& X = e.regressors;
    const double mu = options.beta0_ridge;
    const double lf = options.lambda_f;
    const double xi = options.xi;
    const double mix = options.mixing;

    Rank1OracleResult out;
    out.l = l_init;
    out.b = Vector::Zero(J);
    out.f = Vector::Zero(T - 1);

    auto objective = [&](const Vector& b, const Vector& l, const Vector& f) {
        double rss = 0.0;
        for (Index t = 0; t < T; ++t) {
            double fbar = 0.0;
            for (Index s = 1; s <= t; ++s) fbar += C(t, s) * f[s - 1];
            double fit = 0.0;
            for (Index k = 0; k < J; ++k) fit += X(t, k) * (C(t, 0) * b[k] + l[k] * fbar);
            rss += (data.y[t] - fit) * (data.y[t] - fit);
        }
        return rss + lf * f.squaredNorm() + mu * b.squaredNorm() +
               2.0 * static_cast<double>(T) * xi * (mix * l.cwiseAbs().sum() + 0.5 * (1.0 - mix) * l.squaredNorm());
    };

    for (Index it = 0; it < options.iterations; ++it) {
        // Step 1: TVP regression on xbar_t = sum_k l_k X_kt, beta0 on each X_k.
        Matrix D = Matrix::Zero(T, J + T - 1);
        for (Index t = 0; t < T; ++t) {
            double xbar = 0.0;
            for (Index k = 0; k < J; ++k) {
                D(t, k) = X(t, k) * C(t, 0);
                xbar += out.l[k] * X(t, k);
            }
            for (Index s = 1; s <= t; ++s) D(t, J + s - 1) = xbar * C(t, s);
        }
        Matrix P = D.transpose() * D;
        for (Index k = 0; k < J; ++k) P(k, k) += mu;
        for (Index s = 0; s < T - 1; ++s) P(J + s, J + s) += lf;
        const Vector sol = P.ldlt().solve(D.transpose() * data.y);
        out.b = sol.head(J);
        out.f = sol.tail(T - 1);
        out.objective.push_back(objective(out.b, out.l, out.f));

        // Step 2: elastic net on X^f_kt = fbar_t X_kt with fbar the level path of f.
        Matrix E(T, 2 * J);
        for (Index t = 0; t < T; ++t) {
            double fbar = 0.0;
            for (Index s = 1; s <= t; ++s) fbar += C(t, s) * out.f[s - 1];
            for (Index k = 0; k < J; ++k) {
                E(t, k) = X(t, k) * C(t, 0);
                E(t, J + k) = X(t, k) * fbar;
            }
        }
        Vector l1 = Vector::Zero(2 * J), l2 = Vector::Zero(2 * J), warm(2 * J);
        for (Index k = 0; k < J; ++k) {
            l2[k] = mu / static_cast<double>(T);
            l1[J + k] = xi * mix;
            l2[J + k] = xi * (1.0 - mix);
            warm[k] = out.b[k];
            warm[J + k] = out.l[k];
        }
        ElasticNetOptions eo;
        eo.tolerance = options.enet_tolerance;
        const ElasticNetFit fit = coordinate_descent(E, data.y, l1, l2, warm, eo);
        out.b = fit.coef.head(J);
        out.l = fit.coef.tail(J);
        out.objective.push_back(objective(out.b, out.l, out.f));

        out.l_history.push_back(out.l);
        out.f_history.push_back(out.f);
        out.b_history.push_back(out.b);
    }

    Matrix U(T - 1, J);
    for (Index k = 0; k < J; ++k) U.col(k) = out.f * out.l[k];
    VarianceProfile p = VarianceProfile::homogeneous(T, J, lf, mu);
    out.estimate = assemble_estimate(e, data.y, out.b, U, p);
    return out;
}

} // namespace tvp
