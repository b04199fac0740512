#pragma once

#include "twocultures/numerics.hpp"

#include <cstdint>
#include <vector>

namespace twocultures::pls {

// Partial least squares model in the classical Wold form. Weights come from
// the SVD of the deflated cross-covariance, scores from the deflated X, and
// the inner T->U relation is a per-component scalar regression.
struct PlsModel {
    Index L = 0;           // achieved component count (may be < requested on early stop)
    Index requested = 0;
    Matrix W;              // p x L x-weights, orthonormal columns
    Matrix P;              // p x L x-loadings
    Matrix Q;              // L x q y-loadings (unit y-weight rows)
    Matrix T;              // n x L x-scores
    Matrix U;              // n x L y-scores of the deflated Y
    Vector b;              // inner regression coefficients, one per component
    Matrix beta;           // p x q coefficients on the standardized scale
    Matrix rotation;       // p x L score map: T = X_std * rotation
    numerics::StandardizationParams x_std;
    numerics::StandardizationParams y_std;
    bool early_stopped = false;
};

// Krylov sequence of the cross-covariance under the sample covariance map,
// the basis of Helland's closed form.
struct KrylovBasis {
    Matrix R;     // p x K, columns S_xy, S_xx S_xy, ..., S_xx^{K-1} S_xy
    Matrix S_xx;  // p x p sample covariance of standardized X
    Vector S_xy;  // cross-covariance with the (univariate) standardized y
};

struct HellandFit {
    Vector beta;      // standardized scale
    Index used_K = 0; // K actually used after rank screening
    bool reduced = false;
};

struct CvSelection {
    Index best_L = 0;       // smallest L whose CV-MSE is within one standard
                            // error of the minimum (parsimony rule)
    Index argmin_L = 0;     // strict minimizer of the mean CV-MSE
    Vector cv_mse;          // mean held-out MSE per component count 1..Lmax
    Vector cv_se;           // standard error of each mean across folds
};

PlsModel fit(const Matrix& x, const Matrix& y, Index components);

KrylovBasis build_krylov_basis(const Matrix& x_std, const Vector& y_std, Index k);

// Closed-form PLS coefficients via the Krylov basis (univariate y). Reduces K
// when the basis saturates numerically.
HellandFit fit_helland(const Matrix& x, const Vector& y, Index k);

// Sequential variant: fitted values of y regressed on the first K Krylov
// features, K = 1..p, on the original y scale.
std::vector<Vector> iterative_helland_fits(const Matrix& x, const Vector& y);

// Scores for new rows via the stored standardization and score map.
Matrix transform(const PlsModel& model, const Matrix& x_new);

// Predictions on the original output scale.
Matrix predict(const PlsModel& model, const Matrix& x_new);

// Predictions using only the leading `components` columns of the model.
Matrix predict_with_components(const PlsModel& model, const Matrix& x_new, Index components);

// K-fold cross-validation over component counts; ties go to the smaller L.
CvSelection cv_select_components(const Matrix& x, const Matrix& y, Index l_max, int folds,
                                 std::uint64_t seed);

}  // namespace twocultures::pls
