#include <tvp/elastic_net.hpp>
#include <tvp/tuning.hpp>

#include <cmath>
#include <limits>

namespace tvp {

namespace {

double soft(double z, double g)
{
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

Vector ones_if_empty(const Vector& v, Index p)
{
    if (v.size() == 0) return Vector::Ones(p);
    if (v.size() != p) throw DimensionError("elastic net: per-coordinate vector has wrong length");
    return v;
}

Vector zeros_if_empty(const Vector& v, Index p)
{
    if (v.size() == 0) return Vector::Zero(p);
    if (v.size() != p) throw DimensionError("elastic net: per-coordinate vector has wrong length");
    return v;
}

} // namespace

ElasticNetFit coordinate_descent_gram(const Matrix& G, const Vector& c, double y_scale, const Vector& l1,
                                      const Vector& l2, const Vector& warm, const ElasticNetOptions& options)
{
    const Index p = G.rows();
    ElasticNetFit fit;
    fit.coef = warm.size() == p ? warm : Vector::Zero(p);
    Vector q = G * fit.coef;
    const double scale = std::max(y_scale, 1e-300);
    for (Index sweep = 0; sweep < options.max_sweeps; ++sweep) {
        double worst = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double gjj = G(j, j);
            const double den = gjj + l2[j];
            if (!(den > 0.0)) continue;
            const double bj = fit.coef[j];
            const double z = c[j] - q[j] + gjj * bj;
            const double nb = soft(z, l1[j]) / den;
            const double delta = nb - bj;
            if (delta != 0.0) {
                fit.coef[j] = nb;
                q.noalias() += G.col(j) * delta;
                worst = std::max(worst, std::abs(delta) * std::sqrt(gjj));
            }
        }
        fit.sweeps = sweep + 1;
        if (worst < options.tolerance * scale) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

ElasticNetFit coordinate_descent(const Matrix& A, const Vector& y, const Vector& l1, const Vector& l2,
                                 const Vector& warm, const ElasticNetOptions& options)
{
    if (A.rows() != y.size()) throw DimensionError("elastic net: design rows must equal response length");
    const double n = static_cast<double>(A.rows());
    const Matrix G = A.transpose() * A / n;
    const Vector c = A.transpose() * y / n;
    return coordinate_descent_gram(G, c, std::sqrt(y.squaredNorm() / n), l1, l2, warm, options);
}

ElasticNetFit elastic_net(const Matrix& A, const Vector& y, double xi, double mixing, const Vector& penalty_factor,
                          const ElasticNetOptions& options)
{
    if (!(xi >= 0.0)) throw ValidationError("elastic_net: xi must be nonnegative");
    if (!(mixing >= 0.0 && mixing <= 1.0)) throw ValidationError("elastic_net: mixing must lie in [0, 1]");
    const Index p = A.cols();
    const Vector pf = ones_if_empty(penalty_factor, p);
    const Vector l1 = xi * mixing * pf;
    const Vector l2 = xi * (1.0 - mixing) * pf;
    ElasticNetFit fit = coordinate_descent(A, y, l1, l2, Vector::Zero(p), options);
    fit.xi = xi;
    return fit;
}

double elastic_net_xi_max(const Matrix& A, const Vector& y, double mixing, const Vector& penalty_factor,
                          const Vector& base_l2)
{
    const Index p = A.cols();
    const double n = static_cast<double>(A.rows());
    const Vector pf = ones_if_empty(penalty_factor, p);
    const Vector l2 = zeros_if_empty(base_l2, p);
    // Fit the unpenalized coordinates alone, then read the gradient of the rest.
    Vector l1 = Vector::Zero(p);
    Vector l2_fixed = l2;
    for (Index j = 0; j < p; ++j)
        if (pf[j] > 0.0) l1[j] = std::numeric_limits<double>::max();
    const ElasticNetFit base = coordinate_descent(A, y, l1, l2_fixed, Vector::Zero(p));
    const Vector r = y - A * base.coef;
    const Vector grad = A.transpose() * r / n;
    const double m = std::max(mixing, 1e-3);
    double xi = 0.0;
    for (Index j = 0; j < p; ++j)
        if (pf[j] > 0.0) xi = std::max(xi, std::abs(grad[j]) / (m * pf[j]));
    return xi;
}

ElasticNetCv elastic_net_cv(const Matrix& A, const Vector& y, double mixing, const Vector& penalty_factor,
                            const Vector& base_l2, Index n_folds, std::uint64_t seed, Index grid_points, double ratio)
{
    const Index n = A.rows();
    const Index p = A.cols();
    const Vector pf = ones_if_empty(penalty_factor, p);
    const Vector l2_base = zeros_if_empty(base_l2, p);
    ElasticNetCv out;
    double xmax = elastic_net_xi_max(A, y, mixing, pf, l2_base);
    if (!(xmax > 0.0)) xmax = 1e-8;
    out.xi_grid.resize(grid_points);
    for (Index g = 0; g < grid_points; ++g) {
        const double e = grid_points == 1 ? 0.0 : static_cast<double>(g) / static_cast<double>(grid_points - 1);
        out.xi_grid[g] = xmax * std::pow(ratio, e);
    }
    out.curve = Vector::Zero(grid_points);
    const auto folds = assign_folds(n, n_folds, FoldAssignment::RandomFolds, seed);
    for (Index f = 0; f < n_folds; ++f) {
        std::vector<Index> tr, te;
        for (Index t = 0; t < n; ++t) (folds[t] == f ? te : tr).push_back(t);
        if (te.empty()) continue;
        Matrix Atr(tr.size(), p), Ate(te.size(), p);
        Vector ytr(tr.size()), yte(te.size());
        for (std::size_t i = 0; i < tr.size(); ++i) {
            Atr.row(i) = A.row(tr[i]);
            ytr[i] = y[tr[i]];
        }
        for (std::size_t i = 0; i < te.size(); ++i) {
            Ate.row(i) = A.row(te[i]);
            yte[i] = y[te[i]];
        }
        const double ntr = static_cast<double>(tr.size());
        const Matrix G = Atr.transpose() * Atr / ntr;
        const Vector c = Atr.transpose() * ytr / ntr;
        const double ys = std::sqrt(ytr.squaredNorm() / ntr);
        Vector warm = Vector::Zero(p);
        for (Index g = 0; g < grid_points; ++g) {
            const double xi = out.xi_grid[g];
            const Vector l1 = xi * mixing * pf;
            const Vector l2 = l2_base + xi * (1.0 - mixing) * pf;
            const ElasticNetFit fit = coordinate_descent_gram(G, c, ys, l1, l2, warm);
            warm = fit.coef;
            out.curve[g] += (yte - Ate * fit.coef).squaredNorm() / static_cast<double>(n);
        }
    }
    // Ties favour the larger xi (sparser model).
    Index best = 0;
    for (Index g = 1; g < grid_points; ++g)
        if (out.curve[g] < out.curve[best]) best = g;
    out.xi = out.xi_grid[best];
    const Vector l1 = out.xi * mixing * pf;
    const Vector l2 = l2_base + out.xi * (1.0 - mixing) * pf;
    out.fit = coordinate_descent(A, y, l1, l2, Vector::Zero(p));
    out.fit.xi = out.xi;
    return out;
}

} // namespace tvp
