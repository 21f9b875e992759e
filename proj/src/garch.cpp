#include <tvp/volatility.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace tvp {

namespace {

using Point = std::array<double, 3>;

struct SimplexResult {
    Point x;
    double f;
};

// Minimizes f from x0 with the standard reflection/expansion/contraction/shrink moves.
SimplexResult nelder_mead(const std::function<double(const Point&)>& f, const Point& x0, double step, int max_evals,
                          double ftol)
{
    std::array<Point, 4> s;
    std::array<double, 4> fv;
    s[0] = x0;
    for (int i = 0; i < 3; ++i) {
        s[i + 1] = x0;
        s[i + 1][i] += step;
    }
    for (int i = 0; i < 4; ++i) fv[i] = f(s[i]);
    int evals = 4;

    auto order = [&]() {
        std::array<int, 4> idx{0, 1, 2, 3};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        std::array<Point, 4> s2;
        std::array<double, 4> f2;
        for (int i = 0; i < 4; ++i) {
            s2[i] = s[idx[i]];
            f2[i] = fv[idx[i]];
        }
        s = s2;
        fv = f2;
    };

    while (evals < max_evals) {
        order();
        if (std::abs(fv[3] - fv[0]) <= ftol * (std::abs(fv[0]) + 1e-12)) break;
        Point c{0, 0, 0};
        for (int i = 0; i < 3; ++i)
            for (int d = 0; d < 3; ++d) c[d] += s[i][d] / 3.0;
        auto along = [&](double t) {
            Point p;
            for (int d = 0; d < 3; ++d) p[d] = c[d] + t * (s[3][d] - c[d]);
            return p;
        };
        const Point xr = along(-1.0);
        const double fr = f(xr);
        ++evals;
        if (fr < fv[0]) {
            const Point xe = along(-2.0);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) {
                s[3] = xe;
                fv[3] = fe;
            } else {
                s[3] = xr;
                fv[3] = fr;
            }
        } else if (fr < fv[2]) {
            s[3] = xr;
            fv[3] = fr;
        } else {
            const bool outside = fr < fv[3];
            const Point xc = along(outside ? -0.5 : 0.5);
            const double fc = f(xc);
            ++evals;
            if (fc < (outside ? fr : fv[3])) {
                s[3] = xc;
                fv[3] = fc;
            } else {
                for (int i = 1; i < 4; ++i) {
                    for (int d = 0; d < 3; ++d) s[i][d] = s[0][d] + 0.5 * (s[i][d] - s[0][d]);
                    fv[i] = f(s[i]);
                    ++evals;
                }
            }
        }
    }
    order();
    return {s[0], fv[0]};
}

// omega = exp(p0); (alpha, beta) on the open simplex alpha + beta < 1.
void unpack(const Point& p, double& omega, double& alpha, double& beta)
{
    omega = std::exp(p[0]);
    const double m = std::max({0.0, p[1], p[2]});
    const double e0 = std::exp(-m), e1 = std::exp(p[1] - m), e2 = std::exp(p[2] - m);
    const double den = e0 + e1 + e2;
    alpha = e1 / den;
    beta = e2 / den;
}

Point pack(double omega, double alpha, double beta)
{
    const double rest = 1.0 - alpha - beta;
    return {std::log(omega), std::log(alpha / rest), std::log(beta / rest)};
}

Vector demeaned(const Vector& r)
{
    return (r.array() - r.mean()).matrix();
}

} // namespace

Vector garch_filter(const Vector& r, double omega, double alpha, double beta)
{
    const Index T = r.size();
    Vector h(T);
    h[0] = r.squaredNorm() / static_cast<double>(T);
    for (Index t = 1; t < T; ++t) h[t] = omega + alpha * r[t - 1] * r[t - 1] + beta * h[t - 1];
    return h;
}

double garch_loglik(const Vector& r, double omega, double alpha, double beta)
{
    const Vector h = garch_filter(r, omega, alpha, beta);
    double ll = 0.0;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    for (Index t = 0; t < r.size(); ++t) {
        if (!(h[t] > 0.0) || !std::isfinite(h[t])) return -INFINITY;
        ll -= 0.5 * (log2pi + std::log(h[t]) + r[t] * r[t] / h[t]);
    }
    return ll;
}

Vector rolling_variance(const Vector& r, Index window, double floor)
{
    const Index T = r.size();
    Vector out(T);
    for (Index t = 0; t < T; ++t) {
        const Index lo = std::max<Index>(0, t - window + 1);
        out[t] = std::max(floor, r.segment(lo, t - lo + 1).squaredNorm() / static_cast<double>(t - lo + 1));
    }
    return out;
}

GarchFit fit_garch11(const Vector& residuals)
{
    GarchFit fit;
    const Vector r = demeaned(residuals);
    const Index T = r.size();
    auto fallback = [&](const std::string& why) {
        fit.fallback = true;
        fit.note = why;
        fit.sigma2 = rolling_variance(r);
        fit.params = {};
        return fit;
    };
    if (T < 30) return fallback("fewer than 30 observations");
    const double s2 = r.squaredNorm() / static_cast<double>(T);
    if (!(s2 > 0.0) || !std::isfinite(s2)) return fallback("zero or non-finite sample variance");

    auto objective = [&](const Point& p) {
        double omega, alpha, beta;
        unpack(p, omega, alpha, beta);
        const double ll = garch_loglik(r, omega, alpha, beta);
        return std::isfinite(ll) ? -ll : 1e300;
    };

    const std::array<std::array<double, 2>, 3> starts{{{0.05, 0.90}, {0.10, 0.80}, {0.20, 0.50}}};
    SimplexResult best{{0, 0, 0}, INFINITY};
    for (const auto& st : starts) {
        const Point x0 = pack(s2 * (1.0 - st[0] - st[1]), st[0], st[1]);
        SimplexResult res = nelder_mead(objective, x0, 0.5, 3000, 1e-11);
        // A restart from the optimum guards against premature simplex collapse.
        res = nelder_mead(objective, res.x, 0.1, 1500, 1e-12);
        if (res.f < best.f) best = res;
    }
    double omega, alpha, beta;
    unpack(best.x, omega, alpha, beta);
    if (!std::isfinite(best.f) || !(omega > 0.0) || !(alpha + beta < 1.0 - 1e-8))
        return fallback("simplex search ended outside the stationary region");
    fit.params = {omega, alpha, beta, -best.f};
    fit.sigma2 = garch_filter(r, omega, alpha, beta);
    for (Index t = 0; t < T; ++t)
        if (!(fit.sigma2[t] > 0.0) || !std::isfinite(fit.sigma2[t])) return fallback("non-positive variance path");
    return fit;
}

Vector simulate_garch11(Index T, double omega, double alpha, double beta, std::uint64_t seed, Index burn)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    double h = omega / (1.0 - alpha - beta);
    double prev = 0.0;
    Vector out(T);
    for (Index t = -burn; t < T; ++t) {
        if (t > -burn) h = omega + alpha * prev * prev + beta * h;
        prev = std::sqrt(h) * z(rng);
        if (t >= 0) out[t] = prev;
    }
    return out;
}

Vector normalize_mean_one(const Vector& path)
{
    for (Index t = 0; t < path.size(); ++t)
        if (!(path[t] > 0.0)) throw ValidationError("normalize_mean_one: entries must be positive");
    if (path.size() == 0) throw ValidationError("normalize_mean_one: empty path");
    return path / path.mean();
}

} // namespace tvp
