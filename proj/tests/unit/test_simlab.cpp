#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace tvp;
using testing::max_abs;

namespace {

double corr(const Vector& a, const Vector& b)
{
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

bool is_constant(const Vector& v) { return (v.array() == v[0]).all(); }

Index distinct_values(const Vector& v) { return static_cast<Index>(std::set<double>(v.begin(), v.end()).size()); }

} // namespace

TEST_CASE("path shapes")
{
    const auto f = gen_paths(300, 7);
    for (const Vector& v : f) {
        CHECK(v.minCoeff() == doctest::Approx(-1.0));
        CHECK(v.maxCoeff() == doctest::Approx(1.0));
    }
    CHECK(f[0][0] == doctest::Approx(f[0][299]));
    CHECK(distinct_values(f[2]) == 2);
    Index changes = 0;
    for (Index t = 1; t < 300; ++t) changes += f[2][t] != f[2][t - 1];
    CHECK(changes == 1);
    CHECK(f[2][148] == -1.0);
    CHECK(f[2][149] == 1.0);
    // The kinked trend peaks at the break date.
    Index peak = 0;
    f[4].maxCoeff(&peak);
    CHECK(peak == 149);
}

TEST_CASE("random-walk path is reproducible by seed")
{
    const auto a = gen_paths(200, 11);
    const auto b = gen_paths(200, 11);
    const auto c = gen_paths(200, 12);
    CHECK((a[3].array() == b[3].array()).all());
    CHECK(max_abs(a[3] - c[3]) > 0.0);
    CHECK_THROWS_AS(gen_paths(5, 1), ValidationError);
}

TEST_CASE("all-varying S1 alternates signs")
{
    DgpSpec s;
    s.K = 4;
    s.share_varying = 1.0;
    const SimulatedInstance inst = gen_dgp(s);
    const Vector f1 = gen_paths(s.T, 0)[0];
    for (Index k = 0; k < 4; ++k) {
        CHECK_FALSE(is_constant(inst.true_beta.col(k)));
        const double c = corr(inst.true_beta.col(k), f1);
        // 1-based index k+1: even is +f1, odd is -f1.
        CHECK(std::abs(std::abs(c) - 1.0) < 1e-12);
        CHECK((c > 0) == ((k + 1) % 2 == 0));
    }
    // The lag coefficient stays inside the stable range.
    CHECK(inst.true_beta.col(0).minCoeff() >= 0.0);
    CHECK(inst.true_beta.col(0).maxCoeff() <= 0.8 + 1e-15);
}

TEST_CASE("S3 mixes step and smooth paths")
{
    DgpSpec s;
    s.design = Design::S3;
    s.K = 10;
    s.share_varying = 0.5;
    s.seed = 3;
    const SimulatedInstance inst = gen_dgp(s);
    const Vector f1 = gen_paths(s.T, 0)[0];
    Index step = 0, smooth = 0, flat = 0;
    for (Index k = 0; k < 10; ++k) {
        const Vector col = inst.true_beta.col(k);
        if (is_constant(col))
            ++flat;
        else if (distinct_values(col) == 2)
            ++step;
        else if (std::abs(std::abs(corr(col, f1)) - 1.0) < 1e-12)
            ++smooth;
    }
    CHECK(step >= 2);
    CHECK(step <= 3);
    CHECK(smooth >= 2);
    CHECK(smooth <= 3);
    CHECK(step + smooth == 5);
    CHECK(flat == 5);
}

TEST_CASE("low-noise instances hit the target fit")
{
    Index inside = 0, total = 0;
    for (Design d : {Design::S1, Design::S2, Design::S3, Design::S4})
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            DgpSpec s;
            s.design = d;
            s.seed = 1000 + seed;
            const SimulatedInstance inst = gen_dgp(s);
            inside += inst.realized_r2 >= 0.7 && inst.realized_r2 <= 0.9;
            ++total;
        }
    CHECK(inside >= (9 * total) / 10);
}

TEST_CASE("response reconstructs from the stored pieces")
{
    for (Design d : {Design::S1, Design::S4}) {
        DgpSpec s;
        s.design = d;
        s.noise = NoiseRegime::SvLowHigh;
        s.seed = 21;
        const SimulatedInstance inst = gen_dgp(s);
        const Vector rebuilt = inst.data.X.cwiseProduct(inst.true_beta).rowwise().sum() + inst.eps;
        CHECK(max_abs(rebuilt - inst.data.y) < 1e-9 * (1.0 + max_abs(inst.data.y)));
        CHECK(inst.data.X(0, 0) == 0.0);
        CHECK(inst.data.X(1, 0) == inst.data.y[0]);
        CHECK(inst.true_sigma_eps_t.minCoeff() < inst.true_sigma_eps_t.maxCoeff());
    }
}

TEST_CASE("mean absolute deviation")
{
    Matrix a(2, 2);
    a << 1.0, 2.0, 3.0, 4.0;
    CHECK(mae(a, a) == 0.0);
    CHECK(mae(a.array() + 0.25, a) == doctest::Approx(0.25));
    Matrix b(2, 2);
    b << 0.0, 2.5, 3.0, 1.0;
    CHECK(mae(a, b) == doctest::Approx((1.0 + 0.5 + 0.0 + 3.0) / 4.0));
    CHECK_THROWS_AS(mae(a, Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("a single-cell study equals one direct fit")
{
    DgpSpec s;
    s.T = 80;
    s.K = 3;
    s.seed = 44;
    StudyConfig cfg;
    cfg.setups = {s};
    cfg.estimators = {EstimatorKind::TwoStep};
    cfg.replications = 1;
    cfg.cv.grid_points = 12;
    const StudyResult r = run_study(cfg);
    REQUIRE(r.cells.size() == 1u);
    REQUIRE(r.records.size() == 1u);
    // Replication 0 keeps the base seed.
    const SimulatedInstance inst = gen_dgp(s);
    bool converged = true;
    const Matrix b = fit_estimator(EstimatorKind::TwoStep, inst.data, LawOfMotion::random_walk(), cfg.cv, {}, converged);
    CHECK(r.cells[0].mean_mae == mae(b, inst.true_beta));
    CHECK(r.failures == 0);
}

TEST_CASE("studies are deterministic across thread counts")
{
    DgpSpec a, b;
    a.T = b.T = 60;
    a.K = b.K = 3;
    b.design = Design::S3;
    a.seed = 8;
    b.seed = 9;
    StudyConfig cfg;
    cfg.setups = {a, b};
    cfg.estimators = {EstimatorKind::Ridge, EstimatorKind::TwoStep};
    cfg.replications = 3;
    cfg.cv.grid_points = 10;
    const StudyResult r1 = run_study(cfg);
    cfg.par.threads = 1;
    const StudyResult r2 = run_study(cfg);
    REQUIRE(r1.records.size() == 12u);
    for (std::size_t i = 0; i < r1.records.size(); ++i) {
        CHECK(r1.records[i].mae == r2.records[i].mae);
        CHECK(r1.records[i].spec.seed == r2.records[i].spec.seed);
    }
    CHECK(r1.records[1].spec.seed == (8u ^ 1u));
    CHECK(study_csv_header().find("mae") != std::string::npos);
}

TEST_CASE("noise regimes order the estimation error")
{
    // Averaged over replications, more noise should not help.
    Index ordered = 0, setups = 0;
    for (Design d : {Design::S1, Design::S2, Design::S3, Design::S4}) {
        double err[3] = {0.0, 0.0, 0.0};
        const NoiseRegime regimes[3] = {NoiseRegime::Low, NoiseRegime::Medium, NoiseRegime::High};
        for (int n = 0; n < 3; ++n)
            for (std::uint64_t rep = 0; rep < 4; ++rep) {
                DgpSpec s;
                s.design = d;
                s.T = 200;
                s.noise = regimes[n];
                s.seed = 700 + rep;
                const SimulatedInstance inst = gen_dgp(s);
                bool converged = true;
                CvSpec cv;
                cv.grid_points = 20;
                err[n] += mae(fit_estimator(EstimatorKind::TwoStep, inst.data, LawOfMotion::random_walk(), cv, {},
                                            converged),
                              inst.true_beta);
            }
        ordered += err[0] < err[1] && err[1] < err[2];
        ++setups;
    }
    CHECK(ordered * 5 >= setups * 4);
}

TEST_CASE("timing rows")
{
    const auto rows = benchmark_timing({300}, {6}, {EstimatorKind::TwoStep, EstimatorKind::Glrr}, 1, 5);
    REQUIRE(rows.size() == 2u);
    CHECK(rows[0].seconds > 0.0);
    CHECK(rows[0].seconds <= 30.0);
    // GLRR starts from the two-step fit so it cannot be cheaper.
    CHECK(rows[1].seconds >= rows[0].seconds);
    CHECK_THROWS_AS(benchmark_timing({300}, {6}, {EstimatorKind::TwoStep}, 0), ValidationError);
}
