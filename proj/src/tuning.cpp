#include <tvp/kernels.hpp>
#include <tvp/tuning.hpp>

#include <limits>
#include <random>
#include <sstream>

namespace tvp {

Vector default_lambda0_grid()
{
    Vector g(3);
    g << 0.1, 1.0, 10.0;
    return g;
}

void CvSpec::validate(Index T) const
{
    if (n_folds < 2 || n_folds > T / 2) {
        std::ostringstream os;
        os << "n_folds must lie in [2, T/2]; got " << n_folds << " with T = " << T;
        throw ValidationError(os.str());
    }
    for (Index i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0)) throw ValidationError("lambda grid must be positive");
        if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))
            throw ValidationError("lambda grid must be strictly increasing");
    }
    if (lambda0_grid.size() == 0) throw ValidationError("lambda0 grid must be nonempty");
    for (Index i = 0; i < lambda0_grid.size(); ++i)
        if (!(lambda0_grid[i] > 0.0)) throw ValidationError("lambda0 grid must be positive");
    if (lambda_grid.size() == 0 && grid_points < 2) throw ValidationError("grid_points must be >= 2");
}

namespace {

// Uniform integer in [0, n) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

Vector log_grid(double center, Index points, double decades)
{
    Vector g(points);
    for (Index i = 0; i < points; ++i) {
        const double e = -0.5 * decades + decades * static_cast<double>(i) / static_cast<double>(points - 1);
        g[i] = center * std::pow(10.0, e);
    }
    return g;
}

Vector resolve_grid(const BasisExpansion& e, const CvSpec& spec)
{
    if (spec.lambda_grid.size() > 0) return spec.lambda_grid;
    return make_lambda_grid(e, spec.grid_points, spec.grid_decades);
}

} // namespace

std::vector<Index> assign_folds(Index T, Index n_folds, FoldAssignment assignment, std::uint64_t seed)
{
    std::vector<Index> fold(T);
    if (assignment == FoldAssignment::ContiguousBlocks) {
        for (Index t = 0; t < T; ++t) fold[t] = (t * n_folds) / T;
        return fold;
    }
    std::vector<Index> perm(T);
    for (Index t = 0; t < T; ++t) perm[t] = t;
    std::mt19937_64 rng(seed);
    for (Index i = T - 1; i > 0; --i) {
        const Index j = static_cast<Index>(bounded(rng, static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[i], perm[j]);
    }
    for (Index i = 0; i < T; ++i) fold[perm[i]] = i % n_folds;
    return fold;
}

Vector make_lambda_grid(const Vector& /*y*/, const Matrix& Z, Index points, double decades)
{
    if (points < 2) throw ValidationError("make_lambda_grid: points must be >= 2");
    const double center = Z.squaredNorm() / static_cast<double>(Z.rows());
    return log_grid(center, points, decades);
}

Vector make_lambda_grid(const BasisExpansion& e, Index points, double decades)
{
    if (points < 2) throw ValidationError("make_lambda_grid: points must be >= 2");
    const Vector row_norms = e.C.rowwise().squaredNorm();
    double trace = 0.0;
    for (Index j = 0; j < e.blocks(); ++j)
        trace += e.regressors.col(j).cwiseAbs2().dot(row_norms);
    return log_grid(trace / static_cast<double>(e.T), points, decades);
}

KernelCvOutput kernel_cv(const Matrix& Ku1, const Matrix& X0, const Vector& omega, const Matrix& Y,
                         const std::vector<Index>& folds, Index n_folds, const Vector& lambda_grid,
                         const Vector& lambda0_grid, const Parallelism& par)
{
    const Index T = Ku1.rows();
    const Index nl = lambda_grid.size();
    const Index n0 = lambda0_grid.size();
    const Index p = X0.cols();
    const Index M = Y.cols();
    KernelCvOutput out;
    out.errors = Matrix::Zero(n_folds, n0 * nl);
    out.skipped.assign(n_folds, false);

    const int nt = par.resolved();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (Index f = 0; f < n_folds; ++f) {
        std::vector<Index> tr, te;
        for (Index t = 0; t < T; ++t) (folds[t] == f ? te : tr).push_back(t);
        const Index ntr = static_cast<Index>(tr.size());
        const Index nte = static_cast<Index>(te.size());

        bool test_zero = true, train_zero = true;
        for (Index t : te)
            if (X0.row(t).squaredNorm() > 0.0 || Ku1(t, t) > 0.0) test_zero = false;
        for (Index t : tr)
            if (X0.row(t).squaredNorm() > 0.0 || Ku1(t, t) > 0.0) train_zero = false;
        if (nte == 0 || test_zero || train_zero) {
            out.skipped[f] = true;
            continue;
        }

        Vector s(ntr);
        for (Index i = 0; i < ntr; ++i) s[i] = 1.0 / std::sqrt(omega[tr[i]]);
        Matrix Mtr(ntr, ntr);
        for (Index i = 0; i < ntr; ++i)
            for (Index j = 0; j < ntr; ++j) Mtr(i, j) = s[i] * Ku1(tr[i], tr[j]) * s[j];
        Eigen::SelfAdjointEigenSolver<Matrix> es(Mtr);
        const Vector d = es.eigenvalues().cwiseMax(0.0);
        const Matrix S = s.asDiagonal() * es.eigenvectors();

        Matrix X0tr(ntr, p), Ytr(ntr, M), Kte(nte, ntr), X0te(nte, p), Yte(nte, M);
        for (Index i = 0; i < ntr; ++i) {
            X0tr.row(i) = X0.row(tr[i]);
            Ytr.row(i) = Y.row(tr[i]);
        }
        for (Index i = 0; i < nte; ++i) {
            X0te.row(i) = X0.row(te[i]);
            Yte.row(i) = Y.row(te[i]);
            for (Index j = 0; j < ntr; ++j) Kte(i, j) = Ku1(te[i], tr[j]);
        }
        const Matrix P = S.transpose() * X0tr;
        const Matrix w = S.transpose() * Ytr;
        const Matrix R = Kte * S;

        for (Index l = 0; l < nl; ++l) {
            const double lam = lambda_grid[l];
            const Vector g = (1.0 + d.array() / lam).inverse().matrix();
            const Matrix gP = g.asDiagonal() * P;
            const Matrix Gm = P.transpose() * gP;
            const Matrix rhs = gP.transpose() * w;
            for (Index i0 = 0; i0 < n0; ++i0) {
                Matrix G = Gm;
                G.diagonal().array() += lambda0_grid[i0];
                const Matrix b = G.llt().solve(rhs);
                const Matrix z = g.asDiagonal() * (w - P * b);
                const Matrix pred = X0te * b + R * z / lam;
                out.errors(f, i0 * nl + l) = (Yte - pred).squaredNorm() / static_cast<double>(nte);
            }
        }
    }
    return out;
}

CvResult reduce_cv(const KernelCvOutput& raw, const Vector& lambda_grid, const Vector& lambda0_grid)
{
    const Index nl = lambda_grid.size();
    const Index n0 = lambda0_grid.size();
    const Index nf = raw.errors.rows();
    CvResult r;
    r.lambda_grid = lambda_grid;
    r.curve_by_lambda0 = Matrix::Zero(n0, nl);
    Index used = 0;
    for (Index f = 0; f < nf; ++f) {
        if (raw.skipped[f]) {
            ++r.skipped_folds;
            continue;
        }
        ++used;
        for (Index i0 = 0; i0 < n0; ++i0)
            for (Index l = 0; l < nl; ++l) r.curve_by_lambda0(i0, l) += raw.errors(f, i0 * nl + l);
    }
    if (used == 0) throw NumericalError("cross-validation: every fold was degenerate");
    r.curve_by_lambda0 /= static_cast<double>(used);

    double best = std::numeric_limits<double>::infinity();
    Index best_l = 0, best_0 = 0;
    for (Index l = 0; l < nl; ++l)
        for (Index i0 = 0; i0 < n0; ++i0) {
            const double v = r.curve_by_lambda0(i0, l);
            if (v <= best) {
                best = v;
                best_l = l;
                best_0 = i0;
            }
        }
    r.best_index = best_l;
    r.best_lambda = lambda_grid[best_l];
    r.best_lambda0 = lambda0_grid[best_0];
    r.curve = r.curve_by_lambda0.row(best_0).transpose();
    r.per_fold_errors.resize(nf, nl);
    for (Index f = 0; f < nf; ++f)
        for (Index l = 0; l < nl; ++l) r.per_fold_errors(f, l) = raw.errors(f, best_0 * nl + l);
    return r;
}

namespace {

CvResult cv_impl(const BasisExpansion& e, const Matrix& Y, const CvSpec& spec,
                 const std::optional<VarianceProfile>& profile, const Parallelism& par)
{
    if (Y.rows() != e.T) throw DimensionError("kfold_cv: response length must equal T");
    spec.validate(e.T);
    const Vector grid = resolve_grid(e, spec);
    Vector shape;
    Vector omega;
    Vector lambda0_grid;
    if (profile) {
        profile->validate(e.T, e.blocks());
        shape = profile->sigma_u_k * profile->lambda;
        omega = profile->sigma_eps_t;
        lambda0_grid = Vector::Constant(1, profile->lambda0);
    } else {
        shape = Vector::Constant(e.blocks(), 1.0 / static_cast<double>(e.blocks()));
        omega = Vector::Ones(e.T);
        lambda0_grid = spec.lambda0_grid;
    }
    const Matrix Ku1 = kernels::hadamard_gram(e.regressors, shape, e.G_u, par);
    const auto folds = assign_folds(e.T, spec.n_folds, spec.assignment, spec.seed);
    const KernelCvOutput raw =
        kernel_cv(Ku1, e.beta0_design(), omega, Y, folds, spec.n_folds, grid, lambda0_grid, par);
    return reduce_cv(raw, grid, lambda0_grid);
}

} // namespace

CvResult kfold_cv(const BasisExpansion& e, const Vector& y, const CvSpec& spec,
                  const std::optional<VarianceProfile>& profile, const Parallelism& par)
{
    return cv_impl(e, y, spec, profile, par);
}

CvResult kfold_cv_multi(const BasisExpansion& e, const Matrix& Y, const CvSpec& spec, const Parallelism& par)
{
    return cv_impl(e, Y, spec, std::nullopt, par);
}

} // namespace tvp
