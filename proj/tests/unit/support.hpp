#pragma once

#include "twocultures/matrix.hpp"
#include "twocultures/rng.hpp"

#include <Eigen/QR>

namespace twocultures::testsupport {

// Design matrix with mutually orthogonal columns, each orthogonal to the
// ones vector with zero mean and unit sample sd. Standardization leaves it
// unchanged up to rounding, and X^T X = (n-1) I exactly.
inline Matrix orthonormal_design(Index n, Index p, Rng& rng) {
    Matrix g(n, p + 1);
    g.col(0) = Vector::Ones(n);
    g.rightCols(p) = gaussian_matrix(n, p, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(n, p + 1);
    return q.rightCols(p) * std::sqrt(static_cast<double>(n - 1));
}

inline double mse(const Matrix& a, const Matrix& b) {
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace twocultures::testsupport
