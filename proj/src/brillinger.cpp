#include "twocultures/brillinger.hpp"

#include "twocultures/rng.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>

namespace twocultures::brillinger {

namespace {

constexpr double kDegenerateNorm = 1e-10;
constexpr double kDegenerateAlpha = 0.01;  // F-test significance for identifiability

double silverman_bandwidth(const Vector& u) {
    const Index n = u.size();
    const double sd = std::sqrt((u.array() - u.mean()).square().sum() /
                                static_cast<double>(std::max<Index>(n - 1, 1)));
    std::vector<double> sorted(u.data(), u.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const Index i = static_cast<Index>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < n ? sorted[static_cast<std::size_t>(i)] * (1.0 - frac) +
                               sorted[static_cast<std::size_t>(i + 1)] * frac
                         : sorted[static_cast<std::size_t>(i)];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

// Cumulative regression of standardized Y on the orthogonal scores.
void per_round_tables(const pls::PlsModel& model, const Matrix& ys,
                      const numerics::StandardizationParams& x_std,
                      const numerics::StandardizationParams& y_std, LinearSystemResult& out) {
    const Index n = ys.rows(), q = ys.cols();
    const double total = ys.squaredNorm();

    out.residual_fraction = Vector(model.L + 1);
    out.residual_variance = Vector(model.L + 1);
    out.coefficients.clear();

    Matrix resid = ys;
    Matrix beta_std = Matrix::Zero(model.W.rows(), q);
    out.residual_fraction(0) = 1.0;
    out.residual_variance(0) = [&] {
        double acc = 0.0;
        for (Index j = 0; j < q; ++j) acc += resid.col(j).squaredNorm() * y_std.sds(j) * y_std.sds(j);
        return acc / static_cast<double>(n * q);
    }();

    for (Index k = 0; k < model.L; ++k) {
        const Vector t = model.T.col(k);
        const Eigen::RowVectorXd coef = t.transpose() * resid / t.squaredNorm();
        resid.noalias() -= t * coef;
        beta_std += model.rotation.col(k) * coef;

        out.residual_fraction(k + 1) = resid.squaredNorm() / total;
        double acc = 0.0;
        for (Index j = 0; j < q; ++j) acc += resid.col(j).squaredNorm() * y_std.sds(j) * y_std.sds(j);
        out.residual_variance(k + 1) = acc / static_cast<double>(n * q);

        // Original-scale coefficient estimate after k+1 rounds.
        Matrix beta_orig = beta_std;
        for (Index i = 0; i < beta_orig.rows(); ++i)
            for (Index j = 0; j < q; ++j)
                beta_orig(i, j) *= y_std.sds(j) / x_std.sds(i);
        out.coefficients.push_back(std::move(beta_orig));
    }
}

}  // namespace

IndexModel estimate_index(const Matrix& x, const Vector& y) {
    require_same_rows(x, Matrix(y), "brillinger::estimate_index");
    const Index n = x.rows(), p = x.cols();
    if (n < 10 * p) {
        throw ValidationError("brillinger::estimate_index: need n >= 10p rows (" +
                              std::to_string(n) + " < " + std::to_string(10 * p) + ")");
    }

    IndexModel model;
    auto [xs, x_std] = numerics::standardize(x);
    model.x_std = x_std;
    model.y_mean = y.mean();
    const Vector yc = y.array() - model.y_mean;

    const Vector beta = numerics::solve_ols(xs, Matrix(yc)).col(0);
    const double norm = beta.norm();

    // Identifiability: the fitted direction must explain more than a random
    // p-dimensional projection of the response would.
    const double rss1 = (yc - xs * beta).squaredNorm();
    const double rss0 = yc.squaredNorm();
    const Index df2 = n - p - 1;
    const double f_stat = ((rss0 - rss1) / static_cast<double>(p)) /
                          (rss1 / static_cast<double>(df2));
    boost::math::fisher_f f_dist(static_cast<double>(p), static_cast<double>(df2));
    model.f_stat = f_stat;
    model.p_value = f_stat > 0.0 ? boost::math::cdf(boost::math::complement(f_dist, f_stat)) : 1.0;

    if (norm <= kDegenerateNorm || model.p_value > kDegenerateAlpha) {
        throw DegenerateIndexError(
            "brillinger::estimate_index: direction unidentifiable (|beta| = " +
            std::to_string(norm) + ", regression p-value = " + std::to_string(model.p_value) +
            "); the link carries no linear signal");
    }

    model.k_scale = norm;
    model.beta_dir = beta / norm;
    Index imax = 0;
    model.beta_dir.cwiseAbs().maxCoeff(&imax);
    if (model.beta_dir(imax) < 0.0) model.beta_dir = -model.beta_dir;
    return model;
}

Vector index_values(const IndexModel& model, const Matrix& x) {
    return numerics::apply_standardization(x, model.x_std) * model.beta_dir;
}

LinkSmoother estimate_link(const IndexModel& model, const Matrix& x, const Vector& y,
                           double bandwidth) {
    require_same_rows(x, Matrix(y), "brillinger::estimate_link");
    LinkSmoother smoother;
    smoother.index_values = index_values(model, x);
    smoother.targets = y;
    smoother.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(smoother.index_values);
    smoother.lo = smoother.index_values.minCoeff();
    smoother.hi = smoother.index_values.maxCoeff();
    return smoother;
}

LinkEval evaluate_link(const LinkSmoother& smoother, const Vector& queries) {
    LinkEval eval;
    eval.values = Vector(queries.size());
    eval.extrapolated.assign(static_cast<std::size_t>(queries.size()), false);
    eval.widened.assign(static_cast<std::size_t>(queries.size()), false);

    for (Index i = 0; i < queries.size(); ++i) {
        double u = queries(i);
        if (u < smoother.lo || u > smoother.hi) {
            eval.extrapolated[static_cast<std::size_t>(i)] = true;
            u = std::min(std::max(u, smoother.lo), smoother.hi);
        }
        double h = smoother.bandwidth;
        for (int attempt = 0; attempt < 60; ++attempt) {
            const auto w = (-0.5 * ((smoother.index_values.array() - u) / h).square()).exp();
            const double mass = w.sum();
            if (mass > 1e-12) {
                eval.values(i) = (w * smoother.targets.array()).sum() / mass;
                break;
            }
            h *= 2.0;  // empty neighborhood: widen locally
            eval.widened[static_cast<std::size_t>(i)] = true;
        }
    }
    return eval;
}

LinearSystemResult identify_linear_system(const Matrix& x, const Matrix& y, Index rounds) {
    require_same_rows(x, y, "brillinger::identify_linear_system");
    const Index limit = std::min(x.rows() - 1, x.cols());
    if (rounds < 1 || rounds > limit) {
        throw ValidationError(
            "brillinger::identify_linear_system: rounds must lie in [1, min(n-1, p)]");
    }

    LinearSystemResult result;
    result.model = pls::fit(x, y, rounds);
    result.rounds = result.model.L;  // early stop reduces the round count

    const Matrix ys = numerics::apply_standardization(y, result.model.y_std);
    per_round_tables(result.model, ys, result.model.x_std, result.model.y_std, result);
    return result;
}

NonlinearRecovery recover_nonlinear_system(Index n, std::uint64_t seed) {
    if (n < 1000) throw ValidationError("brillinger::recover_nonlinear_system: need n >= 1000");
    const Index p = 100;

    Rng rng = make_rng(seed);
    NonlinearRecovery rec;
    rec.true_direction = random_unit_vector(p, rng);
    const Vector coef = 2.0 * rec.true_direction;  // index sd ~ 2 under unit-variance inputs

    const Matrix x = gaussian_matrix(n, p, rng);
    const Vector noise = gaussian_vector(n, rng, 0.1);
    const Vector y = ((x * coef).array() + 10.0).abs().matrix() + noise;

    IndexModel model = estimate_index(x, y);
    rec.k_scale = model.k_scale;

    // Undo the standardization so the direction lives on the raw-x scale.
    Vector dir_raw = model.beta_dir.cwiseQuotient(model.x_std.sds);
    dir_raw.normalize();
    rec.direction = dir_raw;
    rec.cosine = std::abs(dir_raw.dot(rec.true_direction));

    // The first PLS weight points along X'X beta, so its finite-sample angle
    // to OLS is limited by the Gram distortion (~sqrt(p/n)); a few components
    // of the Krylov iteration close that gap.
    pls::PlsModel pls1 = pls::fit(x, Matrix(y), 1);
    Vector pls1_dir = pls1.W.col(0).cwiseQuotient(pls1.x_std.sds);
    pls1_dir.normalize();
    rec.pls1_ols_cosine = std::abs(pls1_dir.dot(dir_raw));

    pls::PlsModel pls3 = pls::fit(x, Matrix(y), 3);
    Vector pls3_dir = pls3.beta.col(0).cwiseQuotient(pls3.x_std.sds);
    pls3_dir.normalize();
    rec.pls_ols_cosine = std::abs(pls3_dir.dot(dir_raw));

    LinkSmoother link = estimate_link(model, x, y);
    LinkEval at_data = evaluate_link(link, link.index_values);
    rec.link_curve = Matrix(n, 3);
    rec.link_curve.col(0) = link.index_values;
    rec.link_curve.col(1) = y;
    rec.link_curve.col(2) = at_data.values;
    return rec;
}

}  // namespace twocultures::brillinger
