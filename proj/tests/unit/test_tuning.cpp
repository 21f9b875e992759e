#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace tvp;
using testing::gaussian;
using testing::max_abs;

TEST_CASE("lambda grid")
{
    std::mt19937_64 rng(61);
    const RegressionData d = testing::random_data(12, 2, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk());
    const double c = e.Z.squaredNorm() / 12.0;

    SUBCASE("two points over two decades sit a decade either side of the center")
    {
        const Vector g = make_lambda_grid(d.y, e.Z, 2, 2.0);
        CHECK(g[0] == doctest::Approx(c / 10.0).epsilon(1e-12));
        CHECK(g[1] == doctest::Approx(c * 10.0).epsilon(1e-12));
    }
    SUBCASE("the grid ignores y")
    {
        CHECK(max_abs(make_lambda_grid(d.y, e.Z, 7, 4.0) - make_lambda_grid(10.0 * d.y, e.Z, 7, 4.0)) == 0.0);
    }
    SUBCASE("the expansion overload agrees with the materialized trace")
    {
        const Vector a = make_lambda_grid(d.y, e.Z, 9, 3.0);
        const Vector b = make_lambda_grid(e, 9, 3.0);
        CHECK(max_abs((a - b).cwiseQuotient(a)) < 1e-12);
    }
    SUBCASE("one point is refused") { CHECK_THROWS_AS(make_lambda_grid(e, 1, 4.0), ValidationError); }
}

TEST_CASE("folds")
{
    const auto f = assign_folds(23, 5, FoldAssignment::RandomFolds, 9);
    std::vector<int> counts(5, 0);
    for (Index v : f) ++counts[static_cast<std::size_t>(v)];
    CHECK(*std::min_element(counts.begin(), counts.end()) >= 4);
    CHECK(*std::max_element(counts.begin(), counts.end()) <= 5);
    CHECK(f == assign_folds(23, 5, FoldAssignment::RandomFolds, 9));
    CHECK(f != assign_folds(23, 5, FoldAssignment::RandomFolds, 10));
    const auto b = assign_folds(10, 2, FoldAssignment::ContiguousBlocks, 0);
    CHECK(b == std::vector<Index>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
}

TEST_CASE("single-point grid returns that point")
{
    std::mt19937_64 rng(62);
    const RegressionData d = testing::random_data(30, 2, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk(), false);
    CvSpec spec;
    spec.lambda_grid = Vector::Constant(1, 3.5);
    const CvResult r = kfold_cv(e, d.y, spec);
    CHECK(r.best_lambda == 3.5);
    CHECK(r.curve.size() == 1);
}

TEST_CASE("CV curve equals a fold-by-fold primal refit")
{
    std::mt19937_64 rng(63);
    const RegressionData d = testing::random_data(40, 2, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk());
    CvSpec spec;
    spec.n_folds = 2;
    spec.lambda_grid = Vector(3);
    spec.lambda_grid << 0.5, 5.0, 50.0;
    spec.lambda0_grid = Vector::Constant(1, 0.8);
    spec.seed = 4;
    const CvResult r = kfold_cv(e, d.y, spec);

    const auto folds = assign_folds(40, 2, FoldAssignment::RandomFolds, 4);
    for (Index l = 0; l < 3; ++l) {
        const double lambda = spec.lambda_grid[l];
        double total = 0.0;
        for (Index f = 0; f < 2; ++f) {
            std::vector<Index> tr, te;
            for (Index t = 0; t < 40; ++t) (folds[t] == f ? te : tr).push_back(t);
            Matrix Ztr(static_cast<Index>(tr.size()), e.Z.cols());
            Vector ytr(static_cast<Index>(tr.size()));
            for (std::size_t i = 0; i < tr.size(); ++i) {
                Ztr.row(static_cast<Index>(i)) = e.Z.row(tr[i]);
                ytr[static_cast<Index>(i)] = d.y[tr[i]];
            }
            Matrix A = Ztr.transpose() * Ztr;
            for (Index j = 0; j < 2; ++j) {
                A(j * 40, j * 40) += 0.8;
                for (Index tau = 1; tau < 40; ++tau) A(j * 40 + tau, j * 40 + tau) += lambda * 2.0;
            }
            const Vector theta = A.ldlt().solve(Ztr.transpose() * ytr);
            double sse = 0.0;
            for (Index t : te) sse += std::pow(d.y[t] - e.Z.row(t).dot(theta), 2);
            total += sse / static_cast<double>(te.size());
        }
        CHECK(std::abs(r.curve[l] - total / 2.0) < 1e-8);
    }
}

TEST_CASE("CV is a pure function of data, spec and seed")
{
    std::mt19937_64 rng(64);
    const RegressionData d = testing::random_data(50, 3, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk(), false);
    CvSpec spec;
    spec.grid_points = 15;
    const CvResult a = kfold_cv(e, d.y, spec);
    const CvResult b = kfold_cv(e, d.y, spec);
    CHECK(a.best_lambda == b.best_lambda);
    CHECK(a.best_lambda0 == b.best_lambda0);
    CHECK((a.curve_by_lambda0.array() == b.curve_by_lambda0.array()).all());
}

TEST_CASE("removing the best lambda removes exactly that curve entry")
{
    std::mt19937_64 rng(65);
    const RegressionData d = testing::random_data(45, 2, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk(), false);
    CvSpec spec;
    spec.lambda_grid = make_lambda_grid(e, 11, 4.0);
    spec.lambda0_grid = Vector::Constant(1, 1.0);
    const CvResult full = kfold_cv(e, d.y, spec);
    const Index b = full.best_index;
    Vector reduced(10);
    for (Index i = 0, j = 0; i < 11; ++i)
        if (i != b) reduced[j++] = spec.lambda_grid[i];
    spec.lambda_grid = reduced;
    const CvResult part = kfold_cv(e, d.y, spec);
    for (Index i = 0, j = 0; i < 11; ++i)
        if (i != b) CHECK(part.curve[j++] == doctest::Approx(full.curve[i]).epsilon(1e-12));
}

TEST_CASE("multi-equation CV scores the summed error")
{
    std::mt19937_64 rng(66);
    const RegressionData d = testing::random_data(40, 2, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk(), false);
    const Matrix Y = gaussian(40, 2, rng);
    CvSpec spec;
    spec.grid_points = 7;
    spec.lambda0_grid = Vector::Constant(1, 1.0);
    const CvResult m = kfold_cv_multi(e, Y, spec);
    const CvResult a = kfold_cv(e, Y.col(0), spec);
    const CvResult b = kfold_cv(e, Y.col(1), spec);
    CHECK(max_abs(m.curve - (a.curve + b.curve)) < 1e-10);
}

TEST_CASE("spec validation")
{
    CvSpec spec;
    CHECK_NOTHROW(spec.validate(100));
    spec.n_folds = 1;
    CHECK_THROWS_AS(spec.validate(100), ValidationError);
    spec = CvSpec{};
    spec.lambda_grid = Vector(2);
    spec.lambda_grid << 2.0, 1.0;
    CHECK_THROWS_AS(spec.validate(100), ValidationError);
    spec = CvSpec{};
    spec.lambda0_grid = Vector();
    CHECK_THROWS_AS(spec.validate(100), ValidationError);
}

TEST_CASE("default grid brackets the CV optimum on the simulation designs")
{
    Index interior = 0;
    const Index reps = 100;
    for (Index rep = 0; rep < reps; ++rep) {
        DgpSpec s;
        const double shares[3] = {0.2, 0.5, 1.0};
        s.design = static_cast<Design>(rep % 4);
        s.K = (rep / 4) % 2 == 0 ? 6 : 20;
        s.share_varying = shares[(rep / 8) % 3];
        s.seed = 300 + static_cast<std::uint64_t>(rep);
        const SimulatedInstance inst = gen_dgp(s);
        const RegressionData sd = apply_standardization(inst.data, fit_standardization(inst.data.X));
        const BasisExpansion e = build_expansion(sd, LawOfMotion::random_walk(), false);
        const CvResult r = kfold_cv(e, sd.y, CvSpec{});
        if (r.best_index > 0 && r.best_index + 1 < r.lambda_grid.size()) ++interior;
    }
    CHECK(interior >= 95);
}

TEST_CASE("smoothness CV")
{
    SUBCASE("a constant column never prefers less smoothing")
    {
        const Matrix eta = Matrix::Constant(30, 1, 2.0);
        Vector grid(6);
        grid << 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0;
        const SmoothnessCv r = cv_smoothness(eta, grid, 5, 1, DifferencePenalty::PureDifference);
        for (Index g = 1; g < 6; ++g) CHECK(r.curve(g, 0) <= r.curve(g - 1, 0) + 1e-12);
        CHECK(r.curve(5, 0) <= r.curve(0, 0));
    }
    SUBCASE("a single-point grid is returned as is")
    {
        std::mt19937_64 rng(67);
        const SmoothnessCv r = cv_smoothness(gaussian(20, 2, rng), Vector::Constant(1, 4.0), 5);
        CHECK((r.best_phi.array() == 4.0).all());
    }
    SUBCASE("factorizations are bounded by the grid size, not the column count")
    {
        std::mt19937_64 rng(68);
        Vector grid(5);
        grid << 0.1, 1, 10, 100, 1000;
        const SmoothnessCv r = cv_smoothness(gaussian(40, 3, rng), grid, 4);
        CHECK(r.factorizations <= 5);
        CHECK(r.best_phi.size() == 3);
    }
    SUBCASE("held-out shortcut equals explicit refits")
    {
        std::mt19937_64 rng(69);
        const Index T = 16;
        const Matrix eta = gaussian(T, 1, rng);
        Vector grid(2);
        grid << 0.5, 5.0;
        const SmoothnessCv r = cv_smoothness(eta, grid, 4, 3);
        const auto folds = assign_folds(T, 4, FoldAssignment::RandomFolds, 3);
        const Matrix D = difference_operator(T);
        for (Index g = 0; g < 2; ++g) {
            double sse = 0.0;
            for (Index f = 0; f < 4; ++f) {
                // Fit on the other folds only: penalized least squares with zero weight on the held-out rows.
                Vector w = Vector::Ones(T);
                for (Index t = 0; t < T; ++t)
                    if (folds[t] == f) w[t] = 0.0;
                const Matrix A = Matrix(w.asDiagonal()) + grid[g] * D.transpose() * D;
                const Vector fit = A.ldlt().solve(w.cwiseProduct(eta.col(0)));
                for (Index t = 0; t < T; ++t)
                    if (folds[t] == f) sse += std::pow(eta(t, 0) - fit[t], 2);
            }
            CHECK(r.curve(g, 0) == doctest::Approx(sse / static_cast<double>(T)).epsilon(1e-9));
        }
    }
}
