#include "twocultures/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace twocultures {

void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) throw ValidationError(what + ": non-finite entries");
}

Matrix make_matrix(Index rows, Index cols, const std::vector<double>& row_major) {
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != row_major.size()) {
        throw ValidationError("make_matrix: values length " + std::to_string(row_major.size()) +
                              " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = row_major[static_cast<std::size_t>(i * cols + j)];
    require_finite(m, "make_matrix");
    return m;
}

namespace numerics {

namespace {

// Flips column signs so the largest-magnitude entry of each column of `basis`
// is positive; `paired` (if non-null) gets the same flips.
void fix_column_signs(Matrix& basis, Matrix* paired) {
    for (Index j = 0; j < basis.cols(); ++j) {
        Index imax = 0;
        basis.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, j) < 0.0) {
            basis.col(j) = -basis.col(j);
            if (paired) paired->col(j) = -paired->col(j);
        }
    }
}

void require_symmetric(const Matrix& s, const std::string& what) {
    if (s.rows() != s.cols()) throw ValidationError(what + ": matrix is not square");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw ValidationError(what + ": matrix is not symmetric (max asymmetry " +
                              std::to_string(asym) + ")");
    }
}

}  // namespace

SvdResult svd(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw ValidationError("svd: empty matrix");
    require_finite(m, "svd input");

    SvdResult r;
    // Jacobi is more accurate for small problems, BDC scales better.
    if (std::min(m.rows(), m.cols()) <= 16) {
        Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (solver.info() != Eigen::Success) throw NumericalError("svd: Jacobi iteration did not converge");
        r.U = solver.matrixU();
        r.D = solver.singularValues();
        r.V = solver.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (solver.info() != Eigen::Success) throw NumericalError("svd: BDC iteration did not converge");
        r.U = solver.matrixU();
        r.D = solver.singularValues();
        r.V = solver.matrixV();
    }
    fix_column_signs(r.V, &r.U);
    return r;
}

EigResult eigh_sym(const Matrix& s) {
    require_finite(s, "eigh_sym input");
    require_symmetric(s, "eigh_sym");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
    if (solver.info() != Eigen::Success) throw NumericalError("eigh_sym: iteration did not converge");

    const Index p = s.rows();
    EigResult r;
    r.values = Vector(p);
    r.vectors = Matrix(p, p);
    for (Index j = 0; j < p; ++j) {  // ascending -> descending
        r.values(j) = solver.eigenvalues()(p - 1 - j);
        r.vectors.col(j) = solver.eigenvectors().col(p - 1 - j);
    }
    fix_column_signs(r.vectors, nullptr);
    return r;
}

Matrix solve_ols(const Matrix& x, const Matrix& y) {
    require_finite(x, "solve_ols X");
    require_finite(y, "solve_ols Y");
    require_same_rows(x, y, "solve_ols");

    Eigen::BDCSVD<Matrix> solver(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    solver.setThreshold(kRankTol);
    return solver.solve(y);
}

std::pair<Matrix, StandardizationParams> standardize(const Matrix& m) {
    require_finite(m, "standardize input");
    const Index n = m.rows(), p = m.cols();
    if (n < 2) throw ValidationError("standardize: need at least 2 rows");

    StandardizationParams params;
    params.means = m.colwise().mean();
    params.sds = Vector(p);
    for (Index j = 0; j < p; ++j) {
        const double ss = (m.col(j).array() - params.means(j)).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (sd <= 1e-12 * std::max(1.0, std::abs(params.means(j)))) {
            throw DegenerateColumnError(j, "standardize: column " + std::to_string(j) +
                                               " is constant (sd = " + std::to_string(sd) + ")");
        }
        params.sds(j) = sd;
    }
    return {apply_standardization(m, params), params};
}

Matrix apply_standardization(const Matrix& m, const StandardizationParams& p) {
    require_cols(m, p.means.size(), "apply_standardization");
    return (m.rowwise() - p.means.transpose()).array().rowwise() / p.sds.transpose().array();
}

Matrix invert_standardization(const Matrix& m, const StandardizationParams& p) {
    require_cols(m, p.means.size(), "invert_standardization");
    return (m.array().rowwise() * p.sds.transpose().array()).matrix().rowwise() +
           p.means.transpose();
}

CholeskyResult cholesky_jitter(const Matrix& k, double jitter0) {
    require_finite(k, "cholesky_jitter input");
    require_symmetric(k, "cholesky_jitter");
    if (jitter0 <= 0.0) throw ValidationError("cholesky_jitter: jitter0 must be positive");

    const Index n = k.rows();
    const double cap = 1e-2 * k.trace() / static_cast<double>(n);
    double jitter = 0.0;
    while (true) {
        Matrix shifted = k;
        shifted.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() == Eigen::Success) return {Matrix(llt.matrixL()), jitter};
        const double next = (jitter == 0.0) ? jitter0 : 10.0 * jitter;
        if (next > cap) {
            throw NumericalError("cholesky_jitter: matrix not positive definite within jitter cap " +
                                 std::to_string(cap));
        }
        jitter = next;
    }
}

Vector poly2_feature_map(const Vector& x) {
    if (x.size() != 2) throw ValidationError("poly2_feature_map: input must have 2 components");
    const double s2 = std::sqrt(2.0);
    Vector phi(6);
    phi << 1.0, s2 * x(0), s2 * x(1), x(0) * x(0), x(1) * x(1), s2 * x(0) * x(1);
    return phi;
}

unsigned long long region_count(int hyperplanes, int dim) {
    if (hyperplanes < 0) throw ValidationError("region_count: hyperplane count must be >= 0");
    if (dim < 1) throw ValidationError("region_count: dimension must be >= 1");

    unsigned long long total = 0;
    unsigned long long binom = 1;  // C(h, 0)
    for (int i = 0; i <= std::min(dim, hyperplanes); ++i) {
        if (i > 0) binom = binom * static_cast<unsigned long long>(hyperplanes - i + 1) /
                           static_cast<unsigned long long>(i);
        total += binom;
    }
    return total;
}

Index numerical_rank(const Vector& singular_values) {
    if (singular_values.size() == 0) return 0;
    const double cutoff = kRankTol * singular_values(0);
    Index rank = 0;
    for (Index j = 0; j < singular_values.size(); ++j)
        if (singular_values(j) > cutoff) ++rank;
    return rank;
}

}  // namespace numerics
}  // namespace twocultures
