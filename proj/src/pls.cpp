#include "twocultures/pls.hpp"

#include "twocultures/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>

namespace twocultures::pls {

namespace {

// Cross-covariance is judged on the per-sample scale, so the early-stop
// threshold does not depend on n.
constexpr double kCrossCovTol = 1e-12;

void finalize_coefficients(PlsModel& m, Index p, Index q) {
    if (m.L == 0) {
        m.rotation = Matrix::Zero(p, 0);
        m.beta = Matrix::Zero(p, q);
        return;
    }
    const Matrix ptw = m.P.transpose() * m.W;  // L x L
    Eigen::PartialPivLU<Matrix> lu(ptw.transpose());
    m.rotation = lu.solve(m.W.transpose()).transpose();  // W * (P^T W)^{-1}
    m.beta = m.rotation * m.b.asDiagonal() * m.Q;
}

}  // namespace

PlsModel fit(const Matrix& x, const Matrix& y, Index components) {
    require_same_rows(x, y, "pls::fit");
    const Index n = x.rows(), p = x.cols(), q = y.cols();
    if (components < 1) throw ValidationError("pls::fit: component count must be >= 1");
    if (components > std::min(n - 1, p)) {
        throw ValidationError("pls::fit: " + std::to_string(components) +
                              " components exceed min(n-1, p) = " +
                              std::to_string(std::min(n - 1, p)));
    }

    PlsModel m;
    m.requested = components;
    auto [xs, x_std] = numerics::standardize(x);
    auto [ys, y_std] = numerics::standardize(y);
    m.x_std = x_std;
    m.y_std = y_std;

    Matrix xd = xs, yd = ys;
    m.W = Matrix(p, components);
    m.P = Matrix(p, components);
    m.Q = Matrix(components, q);
    m.T = Matrix(n, components);
    m.U = Matrix(n, components);
    m.b = Vector(components);

    Index k = 0;
    for (; k < components; ++k) {
        Matrix cross = xd.transpose() * yd;
        if (cross.norm() <= kCrossCovTol * static_cast<double>(n)) {
            m.early_stopped = true;
            break;
        }
        numerics::SvdResult dec = numerics::svd(cross);
        const Vector w = dec.U.col(0);
        const Vector qv = dec.V.col(0);

        const Vector t = xd * w;
        const double tt = t.squaredNorm();
        if (tt <= 1e-300) {
            m.early_stopped = true;
            break;
        }
        const Vector u = yd * qv;
        const Vector p_load = xd.transpose() * t / tt;
        const double b_k = t.dot(u) / tt;

        m.W.col(k) = w;
        m.P.col(k) = p_load;
        m.Q.row(k) = qv.transpose();
        m.T.col(k) = t;
        m.U.col(k) = u;
        m.b(k) = b_k;

        xd.noalias() -= t * p_load.transpose();
        yd.noalias() -= (b_k * t) * qv.transpose();
    }

    m.L = k;
    m.W.conservativeResize(p, k);
    m.P.conservativeResize(p, k);
    m.Q.conservativeResize(k, q);
    m.T.conservativeResize(n, k);
    m.U.conservativeResize(n, k);
    m.b.conservativeResize(k);
    finalize_coefficients(m, p, q);
    return m;
}

KrylovBasis build_krylov_basis(const Matrix& x_std, const Vector& y_std, Index k) {
    const Index n = x_std.rows(), p = x_std.cols();
    KrylovBasis basis;
    basis.S_xx = x_std.transpose() * x_std / static_cast<double>(n);
    basis.S_xy = x_std.transpose() * y_std / static_cast<double>(n);
    basis.R = Matrix(p, k);
    Vector col = basis.S_xy;
    for (Index j = 0; j < k; ++j) {
        basis.R.col(j) = col;
        col = basis.S_xx * col;
    }
    return basis;
}

HellandFit fit_helland(const Matrix& x, const Vector& y, Index k) {
    require_same_rows(x, Matrix(y), "pls::fit_helland");
    const Index p = x.cols();
    if (k < 1 || k > p) throw ValidationError("pls::fit_helland: K must be in [1, p]");

    auto [xs, x_std] = numerics::standardize(x);
    auto [ys_m, y_std] = numerics::standardize(Matrix(y));
    const Vector ys = ys_m.col(0);

    KrylovBasis basis = build_krylov_basis(xs, ys, k);

    // Saturated Krylov directions carry no new span; drop them rather than
    // inverting an ill-conditioned Gram matrix.
    Eigen::ColPivHouseholderQR<Matrix> qr(basis.R);
    qr.setThreshold(1e-10);
    const Index rank = qr.rank();

    HellandFit fit;
    fit.used_K = std::max<Index>(rank, 1);
    fit.reduced = fit.used_K < k;

    const Matrix q_full = qr.householderQ() * Matrix::Identity(p, std::min(p, k));
    const Matrix qb = q_full.leftCols(fit.used_K);  // orthonormal basis of span(R)

    const Matrix gram = qb.transpose() * basis.S_xx * qb;
    const Vector rhs = qb.transpose() * basis.S_xy;
    fit.beta = qb * gram.ldlt().solve(rhs);
    return fit;
}

std::vector<Vector> iterative_helland_fits(const Matrix& x, const Vector& y) {
    const Index n = x.rows(), p = x.cols();
    auto [xs, x_std] = numerics::standardize(x);
    auto [ys_m, y_std] = numerics::standardize(Matrix(y));
    const Vector ys = ys_m.col(0);

    KrylovBasis basis = build_krylov_basis(xs, ys, p);
    std::vector<Vector> fits;
    fits.reserve(static_cast<std::size_t>(p));
    Matrix features(n, p);
    for (Index k = 0; k < p; ++k) {
        features.col(k) = xs * basis.R.col(k);  // (s_k^T x) per row
        const Matrix z = features.leftCols(k + 1);
        const Vector coef = numerics::solve_ols(z, Matrix(ys)).col(0);
        const Vector fitted_std = z * coef;
        fits.push_back(fitted_std * y_std.sds(0) + Vector::Constant(n, y_std.means(0)));
    }
    return fits;
}

Matrix transform(const PlsModel& model, const Matrix& x_new) {
    require_cols(x_new, model.x_std.means.size(), "pls::transform");
    return numerics::apply_standardization(x_new, model.x_std) * model.rotation;
}

Matrix predict(const PlsModel& model, const Matrix& x_new) {
    return predict_with_components(model, x_new, model.L);
}

Matrix predict_with_components(const PlsModel& model, const Matrix& x_new, Index components) {
    require_cols(x_new, model.x_std.means.size(), "pls::predict");
    if (components < 0 || components > model.L) {
        throw ValidationError("pls::predict: component count out of range");
    }
    const Index q = model.y_std.means.size();
    Matrix yhat_std;
    if (components == 0) {
        yhat_std = Matrix::Zero(x_new.rows(), q);
    } else {
        const Matrix t = transform(model, x_new).leftCols(components);
        yhat_std = t * model.b.head(components).asDiagonal() * model.Q.topRows(components);
    }
    return numerics::invert_standardization(yhat_std, model.y_std);
}

CvSelection cv_select_components(const Matrix& x, const Matrix& y, Index l_max, int folds,
                                 std::uint64_t seed) {
    require_same_rows(x, y, "pls::cv_select_components");
    const Index n = x.rows(), p = x.cols();
    if (folds < 2) throw ValidationError("pls::cv_select_components: need at least 2 folds");
    if (folds > n) throw ValidationError("pls::cv_select_components: more folds than rows");

    const Index max_fold = (n + folds - 1) / folds;
    const Index train_min = n - max_fold;
    if (l_max < 1 || l_max > std::min(train_min - 1, p)) {
        throw ValidationError("pls::cv_select_components: Lmax " + std::to_string(l_max) +
                              " infeasible with " + std::to_string(folds) + " folds over " +
                              std::to_string(n) + " rows");
    }

    // Shuffled round-robin assignment: balanced folds, no contiguous blocks.
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = static_cast<int>(i % folds);

    Matrix sq_err = Matrix::Zero(l_max, folds);
    Vector counts = Vector::Zero(folds);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> tr, te;
        for (Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        Matrix xtr(tr.size(), p), ytr(tr.size(), y.cols());
        Matrix xte(te.size(), p), yte(te.size(), y.cols());
        for (std::size_t i = 0; i < tr.size(); ++i) { xtr.row(i) = x.row(tr[i]); ytr.row(i) = y.row(tr[i]); }
        for (std::size_t i = 0; i < te.size(); ++i) { xte.row(i) = x.row(te[i]); yte.row(i) = y.row(te[i]); }

        const PlsModel m = fit(xtr, ytr, l_max);
        counts(f) = static_cast<double>(te.size() * static_cast<std::size_t>(y.cols()));
        for (Index l = 1; l <= l_max; ++l) {
            const Matrix pred = predict_with_components(m, xte, std::min(l, m.L));
            sq_err(l - 1, f) = (pred - yte).squaredNorm() / counts(f);
        }
    }

    CvSelection sel;
    sel.cv_mse = sq_err.rowwise().mean();
    sel.cv_se = Vector(l_max);
    for (Index l = 0; l < l_max; ++l) {
        const double mean = sel.cv_mse(l);
        const double var = (sq_err.row(l).array() - mean).square().sum() /
                           static_cast<double>(std::max(folds - 1, 1));
        sel.cv_se(l) = std::sqrt(var / static_cast<double>(folds));
    }

    Index argmin = 0;
    for (Index l = 1; l < l_max; ++l)
        if (sel.cv_mse(l) < sel.cv_mse(argmin)) argmin = l;
    sel.argmin_L = argmin + 1;

    // Fold-level MSE differences beyond the informative components are noise;
    // models within one standard error of the minimum count as tied, and ties
    // go to the smaller model.
    const double cutoff = sel.cv_mse(argmin) + sel.cv_se(argmin);
    Index best = argmin;
    for (Index l = 0; l < argmin; ++l) {
        if (sel.cv_mse(l) <= cutoff) {
            best = l;
            break;
        }
    }
    sel.best_L = best + 1;
    return sel;
}

}  // namespace twocultures::pls
