#pragma once

#include <tvp/common.hpp>

#include <vector>

namespace tvp {

// U (time x K) ~ factors' * loadings', factors r x time with unit mean square
// rows, F F'/n diagonal and loadings columns mutually orthogonal.
struct FactorStructure {
    Matrix loadings;  // K x r
    Matrix factors;   // r x n
    Index rank = 0;
    std::vector<Index> selected_rank_history;
    Vector explained_variance;  // share of total energy per retained factor
};

// Principal components of U (uncentered: drift innovations have zero prior
// mean). Rank is the smallest r reaching the cumulative threshold, capped.
FactorStructure extract_factors(const Matrix& U, double variance_threshold, Index max_rank);

// Smallest r whose leading components of the cumulated paths (running sums
// of the rows of U) reach `variance_threshold` of their energy, capped.
// Cumulation damps period-to-period noise, so the count tracks persistent
// common movements in the coefficient paths.
Index path_variance_rank(const Matrix& U, double variance_threshold, Index max_rank);

// Identified rotation of an arbitrary (loadings, factors) pair with the same
// product; zero loading rows stay zero.
FactorStructure normalize_factors(const Matrix& loadings, const Matrix& factors);

} // namespace tvp
