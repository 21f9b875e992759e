#pragma once

#include <tvp/common.hpp>

#include <cstdint>

namespace tvp {

struct ElasticNetOptions {
    double tolerance = 1e-8;
    Index max_sweeps = 200000;
};

struct ElasticNetFit {
    Vector coef;
    double xi = 0.0;
    Index sweeps = 0;
    bool converged = false;
};

// Minimizes (1/2n)|y - A b|^2 + sum_j l1_j |b_j| + (1/2) sum_j l2_j b_j^2
// by cyclic coordinate descent with soft-thresholding, starting from `warm`.
ElasticNetFit coordinate_descent(const Matrix& A, const Vector& y, const Vector& l1, const Vector& l2,
                                 const Vector& warm, const ElasticNetOptions& options = {});

// Same objective given G = A'A/n, c = A'y/n and the scale sqrt(y'y/n).
ElasticNetFit coordinate_descent_gram(const Matrix& G, const Vector& c, double y_scale, const Vector& l1,
                                      const Vector& l2, const Vector& warm, const ElasticNetOptions& options = {});

// Penalty xi * pf_j * (mixing |b_j| + (1 - mixing)/2 b_j^2); pf defaults to ones.
ElasticNetFit elastic_net(const Matrix& A, const Vector& y, double xi, double mixing,
                          const Vector& penalty_factor = Vector(), const ElasticNetOptions& options = {});

// Smallest xi for which every penalized coefficient is zero.
double elastic_net_xi_max(const Matrix& A, const Vector& y, double mixing, const Vector& penalty_factor = Vector(),
                          const Vector& base_l2 = Vector());

struct ElasticNetCv {
    double xi = 0.0;
    Vector xi_grid;
    Vector curve;
    ElasticNetFit fit;
};

// xi chosen by k-fold CV on a log grid from xi_max down to ratio * xi_max.
// base_l2 adds a fixed ridge term per coordinate (e.g. for unpenalized blocks).
ElasticNetCv elastic_net_cv(const Matrix& A, const Vector& y, double mixing, const Vector& penalty_factor = Vector(),
                            const Vector& base_l2 = Vector(), Index n_folds = 5, std::uint64_t seed = 7,
                            Index grid_points = 10, double ratio = 1e-3);

} // namespace tvp
