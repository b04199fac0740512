#include "twocultures/gp.hpp"

#include "twocultures/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>

namespace twocultures::gp {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kJitter0 = 1e-10;

void validate_params(const KernelParams& params, Index p) {
    if (params.d.size() != p) throw ValidationError("gp: lengthscale count does not match input dimension");
    if ((params.d.array() <= 0.0).any()) throw ValidationError("gp: lengthscale denominators must be positive");
    if (params.g < 0.0) throw ValidationError("gp: nugget must be non-negative");
}

// exp(-squared distance) via scaled inner products.
Matrix se_kernel(const Matrix& a, const Matrix& b, const Vector& d) {
    const Vector inv_sqrt_d = d.cwiseSqrt().cwiseInverse();
    const Matrix as = a * inv_sqrt_d.asDiagonal();
    const Matrix bs = b * inv_sqrt_d.asDiagonal();
    const Vector an = as.rowwise().squaredNorm();
    const Vector bn = bs.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * as * bs.transpose());
    d2.colwise() += an;
    d2.rowwise() += bn.transpose();
    return (-d2.cwiseMax(0.0)).array().exp();
}

struct MeanInfo {
    double value;
};

MeanInfo mean_info(const Vector& y, MeanTag tag) {
    return {tag == MeanTag::Constant ? y.mean() : 0.0};
}

// Box transform: log-parameter = lo + (hi - lo) * sigmoid(z).
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct Box {
    Vector lo, hi;  // per-coordinate log bounds

    Vector to_params(const Vector& z) const {
        Vector logp(z.size());
        for (Index i = 0; i < z.size(); ++i) logp(i) = lo(i) + (hi(i) - lo(i)) * sigmoid(z(i));
        return logp;
    }
    Vector to_z(const Vector& logp) const {
        Vector z(logp.size());
        for (Index i = 0; i < logp.size(); ++i) {
            const double w = hi(i) - lo(i);
            double frac = (logp(i) - lo(i)) / w;
            frac = std::min(std::max(frac, 1e-6), 1.0 - 1e-6);
            z(i) = std::log(frac / (1.0 - frac));
        }
        return z;
    }
    Vector chain(const Vector& z) const {  // d(log-param)/dz
        Vector c(z.size());
        for (Index i = 0; i < z.size(); ++i) {
            const double s = sigmoid(z(i));
            c(i) = (hi(i) - lo(i)) * s * (1.0 - s);
        }
        return c;
    }
};

// Compact two-loop L-BFGS with Armijo backtracking; minimizes fg.
// fg returns the objective and fills the gradient.
Vector lbfgs_minimize(const std::function<double(const Vector&, Vector&)>& fg, Vector x,
                      int max_iters, double* final_f) {
    const int memory = 8;
    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;

    Vector g(x.size());
    double f = fg(x, g);
    for (int iter = 0; iter < max_iters; ++iter) {
        if (g.cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, std::abs(f))) break;

        Vector q = g;
        std::vector<double> alphas(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alphas[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alphas[i] * y_hist[i];
        }
        if (!y_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alphas[i] - beta) * s_hist[i];
        }
        Vector dir = -q;
        double slope = g.dot(dir);
        if (slope >= 0.0) {  // fall back to steepest descent
            dir = -g;
            slope = g.dot(dir);
        }
        if (y_hist.empty()) {
            // No curvature estimate yet: a raw gradient step can overshoot
            // into the flat tails of the box transform. Take a unit step.
            const double norm = dir.norm();
            if (norm > 1.0) {
                dir /= norm;
                slope /= norm;
            }
        }

        double step = 1.0;
        Vector x_new;
        Vector g_new(x.size());
        double f_new = f;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = x + step * dir;
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;

        const Vector s = x_new - x;
        const Vector yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    if (final_f) *final_f = f;
    return x;
}

}  // namespace

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelParams& params,
                     bool self_kernel) {
    if (a.cols() != b.cols()) throw ValidationError("gp::kernel_matrix: column counts differ");
    validate_params(params, a.cols());
    if (self_kernel && a.rows() != b.rows()) {
        throw ValidationError("gp::kernel_matrix: self-kernel requires identical row sets");
    }
    Matrix k = se_kernel(a, b, params.d);
    if (self_kernel) k.diagonal().array() += params.g;
    return k;
}

double log_marginal_likelihood(const Matrix& x, const Vector& y, const KernelParams& params,
                               MeanTag mean, Vector* grad_log) {
    const Index n = x.rows(), p = x.cols();
    validate_params(params, p);

    const MeanInfo m = mean_info(y, mean);
    const Vector r = y.array() - m.value;

    Matrix k_se = se_kernel(x, x, params.d);
    Matrix k = k_se;
    k.diagonal().array() += params.g;
    numerics::CholeskyResult chol = numerics::cholesky_jitter(k, kJitter0);

    const Vector alpha = chol.L.transpose().triangularView<Eigen::Upper>().solve(
        Vector(chol.L.triangularView<Eigen::Lower>().solve(r)));
    const double log_det = 2.0 * chol.L.diagonal().array().log().sum();
    const double mll = -0.5 * r.dot(alpha) - 0.5 * log_det -
                       0.5 * static_cast<double>(n) * std::log(kTwoPi);

    if (grad_log) {
        // d mll / d theta = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)
        Matrix k_inv = chol.L.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
        k_inv = chol.L.transpose().triangularView<Eigen::Upper>().solve(k_inv);
        const Matrix a_mat = alpha * alpha.transpose() - k_inv;

        grad_log->resize(p + 1);
        const Matrix weighted = a_mat.cwiseProduct(k_se);
        for (Index i = 0; i < p; ++i) {
            double acc = 0.0;
            const Vector& col = x.col(i);
            for (Index r2 = 0; r2 < n; ++r2) {
                for (Index c2 = 0; c2 < n; ++c2) {
                    const double diff = col(r2) - col(c2);
                    acc += weighted(r2, c2) * diff * diff;
                }
            }
            (*grad_log)(i) = 0.5 * acc / params.d(i);
        }
        (*grad_log)(p) = 0.5 * params.g * a_mat.trace();
    }
    return mll;
}

GpModel make_gp(const Matrix& x, const Vector& y, const KernelParams& params, MeanTag mean) {
    require_same_rows(x, Matrix(y), "gp::make_gp");
    validate_params(params, x.cols());

    GpModel model;
    model.x_train = x;
    model.y_train = y;
    model.params = params;
    model.mean_tag = mean;
    model.mean_value = mean_info(y, mean).value;

    Matrix k = kernel_matrix(x, x, params, true);
    numerics::CholeskyResult chol = numerics::cholesky_jitter(k, kJitter0);
    model.chol = chol.L;
    model.jitter = chol.jitter;

    const Vector r = y.array() - model.mean_value;
    model.alpha = model.chol.transpose().triangularView<Eigen::Upper>().solve(
        Vector(model.chol.triangularView<Eigen::Lower>().solve(r)));
    const double log_det = 2.0 * model.chol.diagonal().array().log().sum();
    model.mll = -0.5 * r.dot(model.alpha) - 0.5 * log_det -
                0.5 * static_cast<double>(x.rows()) * std::log(kTwoPi);
    return model;
}

GpModel fit_gp(const Matrix& x, const Vector& y, const FitOptions& opts) {
    require_same_rows(x, Matrix(y), "gp::fit_gp");
    const Index n = x.rows(), p = x.cols();
    if (n < 3) throw ValidationError("gp::fit_gp: need at least 3 rows");
    if (opts.restarts < 1) throw ValidationError("gp::fit_gp: need at least one restart");
    if (opts.log_d_lo >= opts.log_d_hi || opts.log_g_lo >= opts.log_g_hi) {
        throw ValidationError("gp::fit_gp: empty parameter bounds");
    }

    Box box;
    box.lo = Vector(p + 1);
    box.hi = Vector(p + 1);
    box.lo.head(p).array() = opts.log_d_lo;
    box.hi.head(p).array() = opts.log_d_hi;
    box.lo(p) = opts.log_g_lo;
    box.hi(p) = opts.log_g_hi;

    const auto objective = [&](const Vector& z, Vector& grad_z) {
        const Vector logp = box.to_params(z);
        KernelParams params;
        params.d = logp.head(p).array().exp();
        params.g = std::exp(logp(p));
        Vector grad_logp;
        double mll;
        try {
            mll = log_marginal_likelihood(x, y, params, opts.mean, &grad_logp);
        } catch (const NumericalError&) {
            grad_z = Vector::Zero(z.size());
            return std::numeric_limits<double>::infinity();
        }
        grad_z = -grad_logp.cwiseProduct(box.chain(z));
        return -mll;
    };

    // Data-driven center: exponents near one at typical squared distances.
    Vector log_d0(p);
    for (Index i = 0; i < p; ++i) {
        const double var = (x.col(i).array() - x.col(i).mean()).square().sum() /
                           static_cast<double>(std::max<Index>(n - 1, 1));
        const double scale = std::max(2.0 * var * static_cast<double>(p), 1e-8);
        log_d0(i) = std::min(std::max(std::log(scale), opts.log_d_lo), opts.log_d_hi);
    }
    Vector start0(p + 1);
    start0.head(p) = log_d0;
    start0(p) = std::min(std::max(std::log(1e-3), opts.log_g_lo), opts.log_g_hi);

    Rng rng = make_rng(opts.seed);
    std::uniform_real_distribution<double> unif(0.05, 0.95);

    bool any_success = false;
    double best_f = std::numeric_limits<double>::infinity();
    Vector best_logp;
    for (int r = 0; r < opts.restarts; ++r) {
        Vector z0;
        if (r == 0) {
            z0 = box.to_z(start0);
        } else {
            z0 = Vector(p + 1);
            for (Index i = 0; i < p + 1; ++i) {
                const double logp = box.lo(i) + (box.hi(i) - box.lo(i)) * unif(rng);
                Vector tmp(1);
                tmp(0) = logp;
                Box single{box.lo.segment(i, 1), box.hi.segment(i, 1)};
                z0(i) = single.to_z(tmp)(0);
            }
        }
        double f = std::numeric_limits<double>::infinity();
        const Vector z_opt = lbfgs_minimize(objective, z0, opts.max_iters, &f);
        if (std::isfinite(f)) {
            any_success = true;
            if (f < best_f) {
                best_f = f;
                best_logp = box.to_params(z_opt);
            }
        }
    }
    if (!any_success) {
        throw NumericalError("gp::fit_gp: every restart failed to factorize the kernel (n=" +
                             std::to_string(n) + ", p=" + std::to_string(p) + ")");
    }

    KernelParams params;
    params.d = best_logp.head(p).array().exp();
    params.g = std::exp(best_logp(p));
    return make_gp(x, y, params, opts.mean);
}

GpPrediction predict(const GpModel& model, const Matrix& x_new, bool full_cov) {
    require_cols(x_new, model.x_train.cols(), "gp::predict");

    const Matrix k_star = kernel_matrix(model.x_train, x_new, model.params);  // n x m
    GpPrediction pred;
    pred.mean = k_star.transpose() * model.alpha;
    pred.mean.array() += model.mean_value;

    const Matrix v = model.chol.triangularView<Eigen::Lower>().solve(k_star);
    const double prior_var = 1.0 + model.params.g;
    pred.var = (prior_var - v.colwise().squaredNorm().array()).cwiseMax(0.0);

    if (full_cov) {
        pred.cov = kernel_matrix(x_new, x_new, model.params, true) - v.transpose() * v;
    }
    return pred;
}

}  // namespace twocultures::gp
