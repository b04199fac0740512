#include "twocultures/shrinkage.hpp"

#include "twocultures/pls.hpp"
#include "twocultures/rng.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace twocultures::shrinkage {

namespace {

constexpr double kAlphaTol = 1e-12;

struct StandardizedProblem {
    Matrix xs;
    Vector ys;
    numerics::StandardizationParams x_std, y_std;
};

StandardizedProblem standardize_problem(const Matrix& x, const Vector& y) {
    require_same_rows(x, Matrix(y), "shrinkage");
    StandardizedProblem prob;
    auto [xs, xp] = numerics::standardize(x);
    auto [ys, yp] = numerics::standardize(Matrix(y));
    prob.xs = std::move(xs);
    prob.ys = ys.col(0);
    prob.x_std = xp;
    prob.y_std = yp;
    return prob;
}

double ridge_norm(const Matrix& xs, const Vector& ys, double lambda) {
    const Index n = xs.rows();
    Matrix lhs = xs.transpose() * xs;
    lhs.diagonal().array() += static_cast<double>(n) * lambda;
    return Vector(lhs.ldlt().solve(xs.transpose() * ys)).norm();
}

}  // namespace

SpectralBasis spectral_basis(const Matrix& x, const Vector& y) {
    StandardizedProblem prob = standardize_problem(x, y);
    const Index n = prob.xs.rows();

    SpectralBasis basis;
    numerics::EigResult eig = numerics::eigh_sym(Matrix(prob.xs.transpose() * prob.xs / static_cast<double>(n)));
    basis.e2 = eig.values.cwiseMax(0.0);
    basis.V = eig.vectors;
    basis.beta_ols = numerics::solve_ols(prob.xs, Matrix(prob.ys)).col(0);
    basis.alpha_hat = basis.V.transpose() * basis.beta_ols;
    return basis;
}

Vector fit_ridge(const Matrix& x, const Vector& y, double lambda) {
    if (lambda < 0.0) throw ValidationError("fit_ridge: lambda must be >= 0");
    StandardizedProblem prob = standardize_problem(x, y);
    if (lambda == 0.0) return numerics::solve_ols(prob.xs, Matrix(prob.ys)).col(0);

    const Index n = prob.xs.rows();
    Matrix lhs = prob.xs.transpose() * prob.xs;
    lhs.diagonal().array() += static_cast<double>(n) * lambda;
    return lhs.ldlt().solve(prob.xs.transpose() * prob.ys);
}

PcrFit fit_pcr(const Matrix& x, const Vector& y, Index components) {
    StandardizedProblem prob = standardize_problem(x, y);
    SpectralBasis basis = spectral_basis(x, y);

    Index rank = 0;
    for (Index j = 0; j < basis.e2.size(); ++j)
        if (basis.e2(j) > numerics::kRankTol * basis.e2(0)) ++rank;
    if (components < 0 || components > rank) {
        throw ValidationError("fit_pcr: component count " + std::to_string(components) +
                              " exceeds numerical rank " + std::to_string(rank));
    }

    const Index n = prob.xs.rows();
    PcrFit fit;
    fit.beta = Vector::Zero(x.cols());
    fit.fitted = Matrix(n, components + 1);
    fit.fitted.col(0) = Vector::Constant(n, prob.y_std.means(0));  // mean-only model
    for (Index l = 0; l < components; ++l) {
        fit.beta += basis.alpha_hat(l) * basis.V.col(l);
        const Vector fitted_std = prob.xs * fit.beta;
        fit.fitted.col(l + 1) = fitted_std * prob.y_std.sds(0) +
                                Vector::Constant(n, prob.y_std.means(0));
    }
    return fit;
}

ShrinkageProfile shrinkage_profile(Method method, const Matrix& x, const Vector& y, double hyper) {
    ShrinkageProfile profile;
    profile.method = method;
    profile.hyper = hyper;
    profile.basis = spectral_basis(x, y);

    switch (method) {
        case Method::Ridge:
            profile.beta = fit_ridge(x, y, hyper);
            break;
        case Method::Pcr:
            profile.beta = fit_pcr(x, y, static_cast<Index>(hyper)).beta;
            break;
        case Method::Pls: {
            pls::PlsModel m = pls::fit(x, Matrix(y), static_cast<Index>(hyper));
            profile.beta = m.beta.col(0);
            break;
        }
    }

    const Index p = x.cols();
    profile.f = Vector::Zero(p);
    profile.defined.assign(static_cast<std::size_t>(p), false);
    for (Index j = 0; j < p; ++j) {
        const double alpha = profile.basis.alpha_hat(j);
        if (std::abs(alpha) <= kAlphaTol) continue;  // reported undefined, not fabricated
        profile.defined[static_cast<std::size_t>(j)] = true;
        profile.f(j) = profile.basis.V.col(j).dot(profile.beta) / alpha;
    }
    return profile;
}

ExpansionDiagnostic expansion_diagnostic(const ShrinkageProfile& profile) {
    // Guard against rounding: PCR factors sit exactly at 1 up to fp noise.
    constexpr double kExpansionTol = 1e-10;
    ExpansionDiagnostic diag;
    diag.truncated = profile.f;
    std::vector<double> mags;
    for (Index j = 0; j < profile.f.size(); ++j) {
        if (!profile.defined[static_cast<std::size_t>(j)]) continue;
        if (profile.f(j) > 1.0 + kExpansionTol) {
            diag.expanded_indices.push_back(j);
            mags.push_back(profile.f(j));
            diag.truncated(j) = 1.0;
        }
    }
    diag.magnitudes = Eigen::Map<Vector>(mags.data(), static_cast<Index>(mags.size()));
    return diag;
}

EqualizeResult equalize_shrinkage(const ShrinkageProfile& ridge_profile,
                                  const ShrinkageProfile& target_profile, const Matrix& x,
                                  const Vector& y) {
    if (ridge_profile.method != Method::Ridge) {
        throw ValidationError("equalize_shrinkage: bisection needs ridge's continuous lambda");
    }
    StandardizedProblem prob = standardize_problem(x, y);

    EqualizeResult result;
    result.target_norm = target_profile.beta.norm();
    const double ols_norm = ridge_norm(prob.xs, prob.ys, 0.0);

    if (result.target_norm > ols_norm * (1.0 + 1e-9)) {
        result.feasible = false;  // ridge only shrinks, the target is unreachable
        result.achieved_norm = ols_norm;
        result.hyper = 0.0;
        return result;
    }
    result.feasible = true;

    if (result.target_norm >= ols_norm) {
        result.hyper = 0.0;
        result.achieved_norm = ols_norm;
        return result;
    }

    double lo = 0.0, hi = 1.0;
    while (ridge_norm(prob.xs, prob.ys, hi) > result.target_norm && hi < 1e18) hi *= 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double norm = ridge_norm(prob.xs, prob.ys, mid);
        if (norm > result.target_norm) lo = mid; else hi = mid;
        if (std::abs(norm - result.target_norm) <= 1e-9 * std::max(result.target_norm, 1e-300)) {
            result.hyper = mid;
            result.achieved_norm = norm;
            return result;
        }
    }
    result.hyper = 0.5 * (lo + hi);
    result.achieved_norm = ridge_norm(prob.xs, prob.ys, result.hyper);
    return result;
}

DropoutRidgeFit dropout_ridge(const Matrix& x, const Matrix& y, double p_keep, int mc_masks,
                              std::uint64_t seed) {
    if (!(p_keep > 0.0 && p_keep < 1.0)) {
        throw ValidationError("dropout_ridge: keep probability must lie in (0, 1)");
    }
    require_same_rows(x, y, "dropout_ridge");

    DropoutRidgeFit fit;
    fit.gamma = x.colwise().squaredNorm().cwiseSqrt();
    fit.penalty_weight = p_keep * (1.0 - p_keep);

    Matrix lhs = p_keep * p_keep * (x.transpose() * x);
    lhs.diagonal() += fit.penalty_weight * fit.gamma.cwiseProduct(fit.gamma);
    fit.w = lhs.ldlt().solve(p_keep * (x.transpose() * y));

    const Matrix resid = y - p_keep * (x * fit.w);
    fit.marginal_objective = resid.squaredNorm() +
                             fit.penalty_weight *
                                 (fit.gamma.asDiagonal() * fit.w).squaredNorm();
    fit.mc_objective = mc_masks > 0 ? dropout_mc_objective(x, y, fit.w, p_keep, mc_masks, seed)
                                    : std::numeric_limits<double>::quiet_NaN();
    return fit;
}

double dropout_mc_objective(const Matrix& x, const Matrix& y, const Matrix& w, double p_keep,
                            int masks, std::uint64_t seed) {
    if (masks < 1) throw ValidationError("dropout_mc_objective: need at least one mask");
    Rng rng = make_rng(seed);
    std::bernoulli_distribution keep(p_keep);

    const Index n = x.rows(), p = x.cols();
    Matrix masked(n, p);
    double total = 0.0;
    for (int m = 0; m < masks; ++m) {
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) masked(i, j) = keep(rng) ? x(i, j) : 0.0;
        total += (y - masked * w).squaredNorm();
    }
    return total / static_cast<double>(masks);
}

}  // namespace twocultures::shrinkage
