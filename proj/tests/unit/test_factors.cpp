#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace tvp;
using testing::gaussian;
using testing::max_abs;

TEST_CASE("rank-one drift matrix is recovered exactly")
{
    std::mt19937_64 rng(91);
    const Vector f = gaussian(40, rng);
    const Vector l = gaussian(5, rng);
    const Matrix U = f * l.transpose();
    const FactorStructure fs = extract_factors(U, 0.99, 5);
    CHECK(fs.rank == 1);
    CHECK(max_abs((fs.loadings * fs.factors).transpose() - U) < 1e-12);
    CHECK(fs.factors.row(0).squaredNorm() / 40.0 == doctest::Approx(1.0));
    CHECK(fs.explained_variance[0] == doctest::Approx(1.0));
}

TEST_CASE("a zero drift matrix has rank zero")
{
    const FactorStructure fs = extract_factors(Matrix::Zero(10, 3), 0.9, 3);
    CHECK(fs.rank == 0);
    CHECK(fs.loadings.cols() == 0);
    CHECK(path_variance_rank(Matrix::Zero(10, 3), 0.9, 3) == 0);
}

TEST_CASE("retained components reach the threshold and no fewer would")
{
    std::mt19937_64 rng(92);
    const Matrix U = gaussian(60, 8, rng);
    const FactorStructure fs = extract_factors(U, 0.9, 8);
    const Vector sv = Eigen::JacobiSVD<Matrix>(U).singularValues();
    const double total = sv.squaredNorm();
    const double kept = sv.head(fs.rank).squaredNorm();
    CHECK(kept >= 0.9 * total * (1.0 - 1e-12));
    CHECK(sv.head(fs.rank - 1).squaredNorm() < 0.9 * total);
    CHECK(fs.explained_variance.sum() == doctest::Approx(kept / total));
}

TEST_CASE("identified form")
{
    std::mt19937_64 rng(93);
    const Matrix U = gaussian(50, 3, rng) * gaussian(3, 6, rng);
    const FactorStructure fs = extract_factors(U, 1.0, 3);
    CHECK(fs.rank == 3);
    const Matrix FF = fs.factors * fs.factors.transpose() / 50.0;
    CHECK(max_abs(FF - Matrix::Identity(3, 3)) < 1e-10);
    const Matrix LL = fs.loadings.transpose() * fs.loadings;
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
            if (i != j) CHECK(std::abs(LL(i, j)) < 1e-10);
}

TEST_CASE("rank is capped")
{
    std::mt19937_64 rng(94);
    const Matrix U = gaussian(30, 6, rng);
    CHECK(extract_factors(U, 1.0, 2).rank == 2);
    CHECK(path_variance_rank(U, 1.0, 2) == 2);
    CHECK_THROWS_AS(extract_factors(U, 0.0, 2), ValidationError);
    CHECK_THROWS_AS(path_variance_rank(U, 1.5, 2), ValidationError);
}

TEST_CASE("path rank sees a persistent common drift through idiosyncratic noise")
{
    std::mt19937_64 rng(95);
    const Index n = 200;
    const Vector f = Vector::Constant(n, 0.3);  // steady common trend
    const Vector l = gaussian(6, rng);
    const Matrix U = f * l.transpose() + 0.5 * gaussian(n, 6, rng);
    CHECK(path_variance_rank(U, 0.9, 5) == 1);
    // Raw innovations are dominated by the noise and need more components.
    CHECK(extract_factors(U, 0.9, 5).rank > 1);
}

TEST_CASE("normalization preserves the product and keeps zero rows")
{
    std::mt19937_64 rng(96);
    Matrix L = gaussian(5, 2, rng);
    L.row(2).setZero();
    const Matrix F = gaussian(2, 30, rng);
    const FactorStructure fs = normalize_factors(L, F);
    CHECK(fs.rank == 2);
    CHECK(max_abs(fs.loadings * fs.factors - L * F) < 1e-11);
    CHECK(max_abs(fs.loadings.row(2)) < 1e-14);
    CHECK(max_abs(fs.factors * fs.factors.transpose() / 30.0 - Matrix::Identity(2, 2)) < 1e-10);
}

TEST_CASE("normalization drops directions with no signal")
{
    std::mt19937_64 rng(97);
    Matrix L = gaussian(4, 2, rng);
    L.col(1) = 2.0 * L.col(0);
    const Matrix F = gaussian(2, 20, rng);
    const FactorStructure fs = normalize_factors(L, F);
    CHECK(fs.rank == 1);
    CHECK(max_abs(fs.loadings * fs.factors - L * F) < 1e-11);
}
