#include "helpers.hpp"

#include <doctest.h>

using namespace tvp;
using testing::gaussian;
using testing::max_abs;

TEST_CASE("summation matrix for the random walk is the lower triangle of ones")
{
    Matrix expected(4, 4);
    expected << 1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1;
    CHECK(max_abs(build_summation_matrix(4, LawOfMotion::random_walk()) - expected) == 0.0);
}

TEST_CASE("summation matrix for AR(0.5) and the local level")
{
    Matrix ar(2, 2);
    ar << 1, 0, 0.5, 1;
    CHECK(max_abs(build_summation_matrix(2, LawOfMotion::autoregressive(0.5)) - ar) == 0.0);

    Matrix ll(3, 3);
    ll << 1, 0, 0, 2, 1, 0, 3, 2, 1;
    CHECK(max_abs(build_summation_matrix(3, LawOfMotion::local_level()) - ll) == 0.0);
}

TEST_CASE("C times its inverse is the identity for every law")
{
    for (const LawOfMotion& law : {LawOfMotion::random_walk(), LawOfMotion::random_walk_with_drift(),
                                   LawOfMotion::local_level(), LawOfMotion::autoregressive(0.9)}) {
        for (Index T : {2, 17, 60, 200}) {
            const Matrix C = build_summation_matrix(T, law);
            const Matrix D = C.inverse();
            CHECK(max_abs(C * D - Matrix::Identity(T, T)) < 1e-10);
        }
    }
}

TEST_CASE("bad laws and short samples are rejected")
{
    CHECK_THROWS_AS(build_summation_matrix(1, LawOfMotion::random_walk()), DimensionError);
    CHECK_THROWS_AS(build_summation_matrix(5, LawOfMotion::autoregressive(1.5)), ValidationError);
    CHECK_THROWS_AS(build_summation_matrix(5, LawOfMotion::autoregressive(0.0)), ValidationError);
    CHECK_THROWS_AS(LawOfMotion::parse("brownian"), ValidationError);
    CHECK_THROWS_AS(LawOfMotion::parse("ar:0.5x"), ValidationError);
    CHECK(LawOfMotion::parse("ar:0.25").phi == 0.25);
    CHECK(LawOfMotion::parse("rw-drift").kind == LawKind::RandomWalkWithDrift);
    CHECK(LawOfMotion::parse("local-level").kind == LawKind::LocalLevel);
}

TEST_CASE("design for K=2, T=4 matches the hand-built running-sum matrix")
{
    Matrix X(4, 2);
    X << 1, 5, 2, 6, 3, 7, 4, 8;
    const RegressionData d{Vector::Zero(4), X, {}};
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk());
    Matrix expected(4, 8);
    expected << 1, 0, 0, 0, 5, 0, 0, 0,
                2, 2, 0, 0, 6, 6, 0, 0,
                3, 3, 3, 0, 7, 7, 7, 0,
                4, 4, 4, 4, 8, 8, 8, 8;
    CHECK(max_abs(e.Z - expected) == 0.0);
}

TEST_CASE("a column of ones expands to C itself")
{
    const RegressionData d{Vector::Zero(6), Matrix::Ones(6, 1), {}};
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk());
    CHECK(max_abs(e.Z - e.C) == 0.0);
}

TEST_CASE("design blocks equal diag(X_k) C from a dense product")
{
    std::mt19937_64 rng(3);
    const RegressionData d = testing::random_data(6, 3, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk());
    for (Index k = 0; k < 3; ++k) {
        Matrix W = Matrix::Zero(6, 6);
        for (Index t = 0; t < 6; ++t) W(t, t) = d.X(t, k);
        CHECK(max_abs(e.Z.middleCols(k * 6, 6) - W * e.C) < 1e-12);
    }
}

TEST_CASE("drift law doubles the blocks with a trend-modulated copy")
{
    std::mt19937_64 rng(4);
    const RegressionData d = testing::random_data(8, 2, rng);
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk_with_drift());
    CHECK(e.blocks() == 4);
    CHECK(e.source == std::vector<Index>{0, 1, 0, 1});
    for (Index t = 0; t < 8; ++t)
        CHECK(e.regressors(t, 3) == doctest::Approx(d.X(t, 1) * static_cast<double>(t + 1) / 8.0));
}

TEST_CASE("column layout round-trips through locate")
{
    std::mt19937_64 rng(5);
    const BasisExpansion e = build_expansion(testing::random_data(7, 3, rng), LawOfMotion::random_walk(), false);
    for (Index c = 0; c < e.blocks() * e.T; ++c) {
        const auto [block, tau] = e.locate(c);
        CHECK(e.column(block, tau) == c);
    }
    CHECK(e.beta0_columns() == std::vector<Index>{0, 7, 14});
    CHECK(e.u_columns().size() == 18u);
}

TEST_CASE("GLS weights")
{
    std::mt19937_64 rng(6);
    const Matrix Z = gaussian(5, 6, rng);
    const Vector y = gaussian(5, rng);

    SUBCASE("unit weights leave the problem unchanged")
    {
        const auto [Zt, yt] = apply_gls_weights(Z, y, Vector::Ones(5), Vector::Ones(6));
        CHECK(max_abs(Zt - Z) == 0.0);
        CHECK(max_abs(yt - y) == 0.0);
    }
    SUBCASE("uniform variance four halves everything")
    {
        const auto [Zt, yt] = apply_gls_weights(Z, y, Vector::Constant(5, 4.0), Vector::Ones(6));
        CHECK(max_abs(Zt - Z / 2.0) < 1e-15);
        CHECK(max_abs(yt - y / 2.0) < 1e-15);
    }
    SUBCASE("heterogeneous weights match the diagonal-matrix product")
    {
        const Vector se = gaussian(5, rng).cwiseAbs().array() + 0.1;
        const Vector om = gaussian(6, rng).cwiseAbs();
        const auto [Zt, yt] = apply_gls_weights(Z, y, se, om);
        const Matrix Wl = se.cwiseSqrt().cwiseInverse().asDiagonal();
        const Matrix Wr = om.cwiseSqrt().asDiagonal();
        CHECK(max_abs(Zt - Wl * Z * Wr) < 1e-14);
        CHECK(max_abs(yt - Wl * y) < 1e-14);
    }
    SUBCASE("nonpositive residual variance is rejected")
    {
        Vector se = Vector::Ones(5);
        se[2] = 0.0;
        CHECK_THROWS_AS(apply_gls_weights(Z, y, se, Vector::Ones(6)), ValidationError);
    }
}

TEST_CASE("recover_beta")
{
    const RegressionData d{Vector::Zero(4), Matrix::Ones(4, 1), {}};
    const BasisExpansion e = build_expansion(d, LawOfMotion::random_walk(), false);

    SUBCASE("level only gives a constant path")
    {
        Vector theta = Vector::Zero(4);
        theta[0] = 1.0;
        CHECK(max_abs(recover_beta(theta, e) - Matrix::Ones(4, 1)) == 0.0);
    }
    SUBCASE("unit innovations give the running sum")
    {
        Vector theta(4);
        theta << 0, 1, 1, 1;
        Matrix expected(4, 1);
        expected << 0, 1, 2, 3;
        CHECK(max_abs(recover_beta(theta, e) - expected) == 0.0);
    }
    SUBCASE("random theta equals the per-block dense product")
    {
        std::mt19937_64 rng(7);
        const BasisExpansion e2 = build_expansion(testing::random_data(12, 2, rng), LawOfMotion::random_walk(), false);
        const Vector theta = gaussian(24, rng);
        const Matrix beta = recover_beta(theta, e2);
        for (Index k = 0; k < 2; ++k) CHECK(max_abs(beta.col(k) - e2.C * theta.segment(k * 12, 12)) < 1e-12);
    }
    SUBCASE("random-walk innovations are the first differences of the path")
    {
        std::mt19937_64 rng(8);
        const BasisExpansion e2 = build_expansion(testing::random_data(9, 1, rng), LawOfMotion::random_walk(), false);
        const Vector theta = gaussian(9, rng);
        const Matrix beta = recover_beta(theta, e2);
        for (Index t = 1; t < 9; ++t) CHECK(beta(t, 0) - beta(t - 1, 0) == doctest::Approx(theta[t]).epsilon(1e-14));
    }
}

TEST_CASE("apply_design agrees with the materialized product")
{
    std::mt19937_64 rng(9);
    const BasisExpansion e = build_expansion(testing::random_data(15, 3, rng), LawOfMotion::autoregressive(0.8));
    const Vector theta = gaussian(45, rng);
    CHECK(max_abs(apply_design(theta, e) - e.Z * theta) < 1e-12);
}

TEST_CASE("regression data validation names the offending cell")
{
    Matrix X = Matrix::Ones(5, 2);
    X(3, 1) = std::nan("");
    const RegressionData d{Vector::Zero(5), X, {}};
    try {
        d.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row") != std::string::npos);
    }
}
