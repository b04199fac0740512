#pragma once

#include "twocultures/matrix.hpp"

#include <cstdint>
#include <random>

namespace twocultures {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Derives an independent stream from a base seed, so that unrelated random
// consumers (e.g. shuffling vs. dropout masks) never share state.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

inline Matrix uniform_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = unif(rng);
    return m;
}

inline Vector gaussian_vector(Index n, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

// Random unit direction.
inline Vector random_unit_vector(Index n, Rng& rng) {
    Vector v = gaussian_vector(n, rng);
    return v / v.norm();
}

}  // namespace twocultures
