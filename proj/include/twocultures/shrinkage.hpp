#pragma once

#include "twocultures/numerics.hpp"

#include <cstdint>
#include <vector>

namespace twocultures::shrinkage {

enum class Method { Ridge, Pcr, Pls };

// Eigenbasis of the standardized input covariance X^T X / n together with the
// OLS coefficients expressed in that basis.
struct SpectralBasis {
    Vector e2;         // eigenvalues, descending
    Matrix V;          // p x p eigenvectors
    Vector alpha_hat;  // V^T beta_ols
    Vector beta_ols;   // minimum-norm OLS coefficients (standardized scale)
};

// Per-eigendirection multipliers relating a method's coefficients to OLS.
struct ShrinkageProfile {
    Method method = Method::Ridge;
    Vector f;                   // factor per direction; meaningful where defined
    std::vector<bool> defined;  // false where |alpha_hat_j| <= 1e-12
    double hyper = 0.0;         // lambda for ridge, L for PCR, K for PLS
    Vector beta;                // directly fitted coefficients (standardized scale)
    SpectralBasis basis;
};

struct ExpansionDiagnostic {
    std::vector<Index> expanded_indices;  // directions with f_j > 1
    Vector magnitudes;                    // f_j at those directions
    Vector truncated;                     // min(f_j, 1), undefined entries passed through
};

struct EqualizeResult {
    double hyper = 0.0;
    bool feasible = false;
    double achieved_norm = 0.0;
    double target_norm = 0.0;
};

struct PcrFit {
    Vector beta;       // standardized scale, top-L eigendirections
    Matrix fitted;     // n x (L+1): column l is the fit with l components, original scale
};

struct DropoutRidgeFit {
    Matrix w;               // minimizer of the marginalized objective
    Vector gamma;           // diag(X^T X)^{1/2}
    double penalty_weight;  // p(1-p)
    double marginal_objective;  // closed-form objective at w
    double mc_objective;        // Monte-Carlo estimate at w (if masks requested)
};

SpectralBasis spectral_basis(const Matrix& x, const Vector& y);

// Ridge coefficients solving (X^T X + n*lambda*I) beta = X^T y on
// standardized data; lambda lives on the covariance (divide-by-n) scale.
Vector fit_ridge(const Matrix& x, const Vector& y, double lambda);

// Principal-components regression on the top-L eigendirections. L = 0 is the
// mean-only model.
PcrFit fit_pcr(const Matrix& x, const Vector& y, Index components);

ShrinkageProfile shrinkage_profile(Method method, const Matrix& x, const Vector& y, double hyper);

ExpansionDiagnostic expansion_diagnostic(const ShrinkageProfile& profile);

// Rescales ridge's lambda by bisection until its coefficient norm matches the
// other profile's. Targets above the OLS norm are infeasible.
EqualizeResult equalize_shrinkage(const ShrinkageProfile& ridge_profile,
                                  const ShrinkageProfile& target_profile, const Matrix& x,
                                  const Vector& y);

// Closed-form minimizer of the dropout-marginalized objective
// |Y - p W X|^2 + p(1-p) |Gamma W|^2 with Gamma = diag(X^T X)^{1/2}.
DropoutRidgeFit dropout_ridge(const Matrix& x, const Matrix& y, double p_keep,
                              int mc_masks = 0, std::uint64_t seed = 0);

// Monte-Carlo estimate of E over Bernoulli masks of |Y - (D .* X) W|^2.
double dropout_mc_objective(const Matrix& x, const Matrix& y, const Matrix& w, double p_keep,
                            int masks, std::uint64_t seed);

}  // namespace twocultures::shrinkage
