#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace twocultures {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Contract violations: bad shapes, out-of-range hyperparameters, malformed input.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a usable result (non-convergence,
// loss of positive definiteness past the jitter cap, all restarts failed).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A column cannot be standardized (zero spread). Carries the column index.
class DegenerateColumnError : public ValidationError {
public:
    DegenerateColumnError(Index column, const std::string& msg)
        : ValidationError(msg), column_(column) {}
    Index column() const { return column_; }

private:
    Index column_;
};

void require_finite(const Matrix& m, const std::string& what);

// Builds a matrix from row-major values, rejecting NaN/Inf and size mismatches.
Matrix make_matrix(Index rows, Index cols, const std::vector<double>& row_major);

inline void require_same_rows(const Matrix& a, const Matrix& b, const std::string& what) {
    if (a.rows() != b.rows()) {
        throw ValidationError(what + ": row counts differ (" + std::to_string(a.rows()) +
                              " vs " + std::to_string(b.rows()) + ")");
    }
}

inline void require_cols(const Matrix& m, Index cols, const std::string& what) {
    if (m.cols() != cols) {
        throw ValidationError(what + ": expected " + std::to_string(cols) + " columns, got " +
                              std::to_string(m.cols()));
    }
}

}  // namespace twocultures
