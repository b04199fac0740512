#pragma once

#include "twocultures/numerics.hpp"
#include "twocultures/pls.hpp"

#include <cstdint>
#include <vector>

namespace twocultures::brillinger {

// The regression direction is unidentifiable: the projection of y onto the
// column space carries no more signal than a random subspace would.
class DegenerateIndexError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Nadaraya-Watson smoother over (index, response) pairs.
struct LinkSmoother {
    Vector index_values;
    Vector targets;
    double bandwidth = 0.0;
    double lo = 0.0, hi = 0.0;  // observed index range
};

struct LinkEval {
    Vector values;
    std::vector<bool> extrapolated;  // query clamped to the observed range
    std::vector<bool> widened;       // bandwidth widened locally
};

struct IndexModel {
    Vector beta_dir;  // unit direction on the standardized-x scale
    double k_scale = 0.0;
    numerics::StandardizationParams x_std;
    double y_mean = 0.0;
    double f_stat = 0.0;
    double p_value = 1.0;
};

struct LinearSystemResult {
    Index rounds = 0;
    Vector residual_fraction;        // index k: fraction of output energy left after k rounds
    Vector residual_variance;        // original scale, per element
    std::vector<Matrix> coefficients;  // cumulative X->Y coefficient estimate per round
    pls::PlsModel model;
};

struct NonlinearRecovery {
    Vector direction;       // estimated unit direction on the raw-x scale
    Vector true_direction;  // unit direction actually used to generate the data
    double cosine = 0.0;    // |cos| between the two
    double k_scale = 0.0;
    double pls_ols_cosine = 0.0;   // 3-component PLS coefficient vs OLS
    double pls1_ols_cosine = 0.0;  // first PLS weight vs OLS
    Matrix link_curve;      // columns: index value, observed y, smoothed link
};

// OLS direction recovery under an unknown link (Gaussian inputs assumed).
// Raises DegenerateIndexError when the regression carries no direction.
IndexModel estimate_index(const Matrix& x, const Vector& y);

// Kernel regression of y on the scalar index; bandwidth <= 0 selects
// Silverman's rule on the index values.
LinkSmoother estimate_link(const IndexModel& model, const Matrix& x, const Vector& y,
                           double bandwidth = 0.0);

LinkEval evaluate_link(const LinkSmoother& smoother, const Vector& queries);

Vector index_values(const IndexModel& model, const Matrix& x);

// Sequential PLS extraction on a multivariate linear system; reports how much
// output energy each round leaves behind.
LinearSystemResult identify_linear_system(const Matrix& x, const Matrix& y, Index rounds);

// The |10 + XP| recovery experiment: generates the data, estimates the
// direction by OLS, smooths the link, and cross-checks the PLS direction.
NonlinearRecovery recover_nonlinear_system(Index n, std::uint64_t seed);

}  // namespace twocultures::brillinger
