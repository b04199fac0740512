#pragma once

#include "twocultures/numerics.hpp"

#include <cstdint>

namespace twocultures::gp {

// Anisotropic squared-exponential kernel with per-dimension denominators:
// C(x, x') = exp(-sum_i (x_i - x_i')^2 / d_i), plus a nugget g on the
// diagonal of a self-kernel.
struct KernelParams {
    Vector d;       // lengthscale denominators, strictly positive
    double g = 0.0; // nugget, non-negative
};

enum class MeanTag { Zero, Constant };

struct FitOptions {
    double log_d_lo = -6.0;
    double log_d_hi = 8.0;
    double log_g_lo = -12.0;
    double log_g_hi = 1.0;
    int restarts = 5;
    int max_iters = 60;
    std::uint64_t seed = 0;
    MeanTag mean = MeanTag::Zero;
};

struct GpModel {
    Matrix x_train;
    Vector y_train;
    KernelParams params;
    MeanTag mean_tag = MeanTag::Zero;
    double mean_value = 0.0;
    double mll = 0.0;     // marginal log-likelihood at params
    double jitter = 0.0;  // diagonal stabilizer used by the factorization
    Matrix chol;          // lower factor of K + jitter*I
    Vector alpha;         // (K + jitter*I)^{-1} (y - m)
};

struct GpPrediction {
    Vector mean;
    Vector var;   // includes the nugget, clamped at zero
    Matrix cov;   // full predictive covariance when requested, else 0x0
};

// Kernel matrix between row sets; the nugget enters only on the diagonal when
// `self_kernel` marks A and B as the same set.
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelParams& params,
                     bool self_kernel = false);

// Gaussian marginal log-likelihood; optional gradient with respect to
// (log d_1, ..., log d_p, log g).
double log_marginal_likelihood(const Matrix& x, const Vector& y, const KernelParams& params,
                               MeanTag mean, Vector* grad_log = nullptr);

// Builds a ready-to-predict model at fixed kernel parameters.
GpModel make_gp(const Matrix& x, const Vector& y, const KernelParams& params,
                MeanTag mean = MeanTag::Zero);

// Maximizes the marginal likelihood over the log-parameter box with
// multi-start quasi-Newton search; deterministic given the seed.
GpModel fit_gp(const Matrix& x, const Vector& y, const FitOptions& opts = {});

GpPrediction predict(const GpModel& model, const Matrix& x_new, bool full_cov = false);

}  // namespace twocultures::gp
