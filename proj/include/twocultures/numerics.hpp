#pragma once

#include "twocultures/matrix.hpp"

namespace twocultures::numerics {

// Relative cutoff below which a singular value counts as zero.
inline constexpr double kRankTol = 1e-12;

struct SvdResult {
    Matrix U;  // n x r, orthonormal columns
    Vector D;  // r singular values, non-increasing
    Matrix V;  // p x r, orthonormal columns
};

struct EigResult {
    Vector values;   // descending
    Matrix vectors;  // orthonormal columns, vectors.col(j) pairs with values(j)
};

struct StandardizationParams {
    Vector means;
    Vector sds;  // strictly positive
};

struct CholeskyResult {
    Matrix L;       // lower triangular, L*L^T = K + jitter*I
    double jitter;  // additive diagonal actually used
};

// Thin SVD with a deterministic sign convention: the largest-magnitude entry
// of each right singular vector is positive.
SvdResult svd(const Matrix& m);

// Symmetric eigendecomposition, eigenvalues descending, same sign convention.
// Rejects matrices that are not symmetric to 1e-10.
EigResult eigh_sym(const Matrix& s);

// Least-squares solve with minimum-norm semantics on rank-deficient inputs.
Matrix solve_ols(const Matrix& x, const Matrix& y);

// Column standardization to mean 0, sd 1 (sample sd). Constant columns are
// rejected with the offending index.
std::pair<Matrix, StandardizationParams> standardize(const Matrix& m);

Matrix apply_standardization(const Matrix& m, const StandardizationParams& p);
Matrix invert_standardization(const Matrix& m, const StandardizationParams& p);

// Cholesky of K + jitter*I, escalating jitter from 0 through jitter0, 10*jitter0, ...
// until the factorization succeeds or the cap 1e-2 * trace/n is exceeded.
CholeskyResult cholesky_jitter(const Matrix& k, double jitter0);

// Degree-2 polynomial feature map on R^2: phi(x) dot phi(x') = (1 + x.x')^2.
Vector poly2_feature_map(const Vector& x);

// Maximum number of regions h hyperplanes in general position induce in R^d.
unsigned long long region_count(int hyperplanes, int dim);

// Count of singular values above kRankTol * D[0].
Index numerical_rank(const Vector& singular_values);

}  // namespace twocultures::numerics
