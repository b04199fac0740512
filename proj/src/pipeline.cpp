#include "twocultures/pipeline.hpp"

#include "twocultures/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twocultures::pipeline {

namespace {

// Standardizes a head target so the unit-amplitude GP prior applies.
GpHead fit_gp_head(const Matrix& features, const Vector& target, const gp::FitOptions& options) {
    GpHead head;
    head.offset = target.mean();
    const double sd = std::sqrt((target.array() - head.offset).square().sum() /
                                static_cast<double>(std::max<Index>(target.size() - 1, 1)));
    head.scale = sd > 1e-12 ? sd : 1.0;
    const Vector target_std = (target.array() - head.offset) / head.scale;
    head.model = gp::fit_gp(features, target_std, options);
    return head;
}

struct HeadOutput {
    Matrix mean;
    Matrix var;
};

HeadOutput predict_heads(const std::vector<Head>& heads, const Matrix& features) {
    Index total = 0;
    for (const Head& head : heads) total += head_output_dim(head);

    HeadOutput out;
    out.mean = Matrix(features.rows(), total);
    out.var = Matrix::Zero(features.rows(), total);

    Index col = 0;
    for (const Head& head : heads) {
        if (const auto* gp_head = std::get_if<GpHead>(&head)) {
            gp::GpPrediction pred = gp::predict(gp_head->model, features);
            out.mean.col(col) = (pred.mean.array() * gp_head->scale + gp_head->offset).matrix();
            out.var.col(col) = pred.var * (gp_head->scale * gp_head->scale);
            col += 1;
        } else if (const auto* mlp_head = std::get_if<MlpHead>(&head)) {
            const Matrix m = nnet::forward(mlp_head->model, features);
            out.mean.middleCols(col, m.cols()) = m;
            col += m.cols();
        } else if (const auto* linear_head = std::get_if<LinearHead>(&head)) {
            out.mean.middleCols(col, linear_head->coef.cols()) =
                (features * linear_head->coef).rowwise() + linear_head->intercept;
            col += linear_head->coef.cols();
        } else {
            out.mean.col(col).setZero();
            col += 1;
        }
    }
    return out;
}

// Least-squares back-projection of the standardized outputs onto the y-score
// columns. Summing per-component heads through the raw unit y-weights double
// counts shared output content (the first y-score of a univariate response is
// the response itself), so the weights are refit.
Matrix refit_back_projection(const Matrix& u, const Matrix& ys) {
    return numerics::solve_ols(u, ys);
}

bool negligible_row(const Matrix& q, Index row) {
    const double scale = q.cwiseAbs().maxCoeff();
    return q.row(row).cwiseAbs().maxCoeff() <= 1e-10 * std::max(scale, 1e-300);
}

}  // namespace

Matrix apply_transform(const Transform& transform, const Matrix& x_new) {
    if (const auto* t = std::get_if<PlsTransform>(&transform)) {
        return pls::transform(t->model, x_new);
    }
    if (const auto* t = std::get_if<BottleneckTransform>(&transform)) {
        Matrix z = numerics::apply_standardization(x_new, t->x_std);
        nnet::MlpModel truncated;
        truncated.layers.assign(t->network.layers.begin(),
                                t->network.layers.begin() + t->feature_layers);
        return nnet::forward(truncated, z);
    }
    if (const auto* t = std::get_if<PcaTransform>(&transform)) {
        return numerics::apply_standardization(x_new, t->x_std) * t->basis;
    }
    const auto& t = std::get<IdentityTransform>(transform);
    return numerics::apply_standardization(x_new, t.x_std);
}

Index transform_dim(const Transform& transform) {
    if (const auto* t = std::get_if<PlsTransform>(&transform)) return t->model.L;
    if (const auto* t = std::get_if<BottleneckTransform>(&transform)) return t->out_dim;
    if (const auto* t = std::get_if<PcaTransform>(&transform)) return t->basis.cols();
    return std::get<IdentityTransform>(transform).x_std.means.size();
}

Index head_output_dim(const Head& head) {
    if (std::holds_alternative<GpHead>(head)) return 1;
    if (const auto* mlp_head = std::get_if<MlpHead>(&head)) return mlp_head->model.output_dim();
    if (const auto* linear_head = std::get_if<LinearHead>(&head)) return linear_head->coef.cols();
    return 1;
}

PredictiveDistribution predict(const CompositeModel& model, const Matrix& x_new) {
    const Matrix features = apply_transform(model.transform, x_new);
    const HeadOutput heads = predict_heads(model.heads, features);

    PredictiveDistribution dist;
    const Matrix mean_std = heads.mean * model.back_projection;
    dist.mean = numerics::invert_standardization(mean_std, model.y_std);

    // Independent-head propagation through the back-projection.
    const Matrix var_std = heads.var * model.back_projection.cwiseAbs2();
    dist.sd = var_std.cwiseMax(0.0).cwiseSqrt().array().rowwise() *
              model.y_std.sds.transpose().array();
    return dist;
}

CompositeModel fit_pls_gp(const Matrix& x, const Matrix& y, Index components,
                          const gp::FitOptions& gp_options) {
    pls::PlsModel model = pls::fit(x, y, components);
    if (model.L == 0) throw NumericalError("fit_pls_gp: cross-covariance vanished at the first component");
    const Matrix ys = numerics::apply_standardization(y, model.y_std);

    CompositeModel composite;
    composite.y_std = model.y_std;
    composite.back_projection = refit_back_projection(model.U, ys);

    for (Index k = 0; k < model.L; ++k) {
        if (negligible_row(composite.back_projection, k)) {
            composite.heads.emplace_back(ZeroHead{});
        } else {
            composite.heads.emplace_back(fit_gp_head(model.T, model.U.col(k), gp_options));
        }
    }
    composite.transform = PlsTransform{std::move(model)};
    return composite;
}

CompositeModel fit_dl_gp(const Matrix& x, const Matrix& y, Index reduced_dim, Index hidden_width,
                         const nnet::TrainConfig& nn_config, const gp::FitOptions& gp_options,
                         bool affine_features) {
    if (reduced_dim < 1 || reduced_dim > x.cols()) {
        throw ValidationError("fit_dl_gp: reduced dimension must lie in [1, p]");
    }
    auto [xs, x_std] = numerics::standardize(x);
    auto [ys, y_std] = numerics::standardize(y);

    nnet::Architecture arch;
    if (affine_features) {
        arch.hidden = {reduced_dim, hidden_width};
        arch.hidden_activations = {nnet::Activation::Identity, nnet::Activation::Relu};
    } else {
        arch.hidden = {hidden_width, reduced_dim, hidden_width};
        arch.hidden_activations = {nnet::Activation::Relu, nnet::Activation::Identity,
                                   nnet::Activation::Relu};
    }
    nnet::TrainResult trained = nnet::train_sgd(nn_config, xs, ys, arch);

    BottleneckTransform transform;
    transform.network = std::move(trained.model);
    transform.feature_layers = affine_features ? 1 : 2;
    transform.out_dim = reduced_dim;
    transform.x_std = x_std;

    CompositeModel composite;
    composite.transform = std::move(transform);
    composite.y_std = y_std;

    const Matrix features = apply_transform(composite.transform, x);
    for (Index j = 0; j < ys.cols(); ++j) {
        composite.heads.emplace_back(fit_gp_head(features, ys.col(j), gp_options));
    }
    composite.back_projection = Matrix::Identity(ys.cols(), ys.cols());
    return composite;
}

CompositeModel fit_dl_pls(const Matrix& x, const Matrix& y, Index components,
                          const std::vector<Index>& hidden, const nnet::TrainConfig& nn_config) {
    pls::PlsModel model = pls::fit(x, y, components);
    if (model.L == 0) throw NumericalError("fit_dl_pls: cross-covariance vanished at the first component");
    const Matrix ys = numerics::apply_standardization(y, model.y_std);

    nnet::Architecture arch;
    arch.hidden = hidden;
    nnet::TrainResult trained = nnet::train_sgd(nn_config, model.T, model.U, arch);

    CompositeModel composite;
    composite.y_std = model.y_std;
    composite.back_projection = refit_back_projection(model.U, ys);
    composite.heads.emplace_back(MlpHead{std::move(trained.model)});
    composite.transform = PlsTransform{std::move(model)};
    return composite;
}

DlPlsAutoencoderFit fit_dl_pls_autoencoder(const Matrix& x, const Matrix& y, Index components,
                                           Index hidden, const nnet::TrainConfig& nn_config) {
    pls::PlsModel model = pls::fit(x, y, components);
    if (model.L == 0) {
        throw NumericalError("fit_dl_pls_autoencoder: cross-covariance vanished at the first component");
    }
    nnet::AutoencoderFit ae = nnet::fit_autoencoder(model.T, hidden, nnet::Activation::Relu,
                                                    nnet::Activation::Identity, nn_config);
    const Matrix ys = numerics::apply_standardization(y, model.y_std);

    DlPlsAutoencoderFit fit;
    fit.score_reconstruction_mse = ae.train_mse;
    fit.model.y_std = model.y_std;
    fit.model.back_projection = refit_back_projection(model.U, ys);
    fit.model.heads.emplace_back(MlpHead{std::move(ae.model)});
    fit.model.transform = PlsTransform{std::move(model)};
    return fit;
}

CompositeModel fit_pca_gp(const Matrix& x, const Matrix& y, Index k,
                          const gp::FitOptions& gp_options) {
    const Index q = y.cols();
    if (q < 2) throw ValidationError("fit_pca_gp: output must be multivariate");

    Matrix yc = y.rowwise() - y.colwise().mean();
    numerics::SvdResult dec = numerics::svd(yc);
    const Index rank = numerics::numerical_rank(dec.D);
    if (k < 1 || k > rank) {
        throw ValidationError("fit_pca_gp: basis size " + std::to_string(k) +
                              " exceeds output rank " + std::to_string(rank));
    }

    auto [xs, x_std] = numerics::standardize(x);
    CompositeModel composite;
    composite.transform = IdentityTransform{x_std};
    composite.y_std.means = y.colwise().mean();
    composite.y_std.sds = Vector::Ones(q);

    const Matrix basis = dec.V.leftCols(k);  // q x k
    composite.back_projection = basis.transpose();
    for (Index i = 0; i < k; ++i) {
        const Vector weights = yc * basis.col(i);
        composite.heads.emplace_back(fit_gp_head(xs, weights, gp_options));
    }
    return composite;
}

CompositeModel fit_plain_gp(const Matrix& x, const Matrix& y, const gp::FitOptions& gp_options) {
    auto [xs, x_std] = numerics::standardize(x);
    auto [ys, y_std] = numerics::standardize(y);

    CompositeModel composite;
    composite.transform = IdentityTransform{x_std};
    composite.y_std = y_std;
    for (Index j = 0; j < ys.cols(); ++j) {
        composite.heads.emplace_back(fit_gp_head(xs, ys.col(j), gp_options));
    }
    composite.back_projection = Matrix::Identity(ys.cols(), ys.cols());
    return composite;
}

PredictiveDistribution ensemble_average(const std::vector<Predictor>& members,
                                        const Matrix& x_new) {
    if (members.empty()) throw ValidationError("ensemble_average: need at least one member");

    PredictiveDistribution first = members.front()(x_new);
    Matrix mean_sum = first.mean;
    Matrix sq_sum = first.mean.cwiseAbs2();
    Matrix var_sum = first.sd.cwiseAbs2();
    for (std::size_t i = 1; i < members.size(); ++i) {
        PredictiveDistribution pred = members[i](x_new);
        if (pred.mean.rows() != first.mean.rows() || pred.mean.cols() != first.mean.cols()) {
            throw ValidationError("ensemble_average: member output shapes differ");
        }
        mean_sum += pred.mean;
        sq_sum += pred.mean.cwiseAbs2();
        var_sum += pred.sd.cwiseAbs2();
    }

    const double n = static_cast<double>(members.size());
    PredictiveDistribution out;
    out.mean = mean_sum / n;
    const Matrix mean_of_sq = sq_sum / n;
    const Matrix var_of_means = (mean_of_sq - out.mean.cwiseAbs2()).cwiseMax(0.0);
    out.sd = (var_sum / n + var_of_means).cwiseSqrt();
    return out;
}

Metrics metrics(const Matrix& y_true, const Matrix& y_pred) {
    if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) {
        throw ValidationError("metrics: shapes differ");
    }
    Metrics out;
    out.rmse = std::sqrt((y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size()));

    double ape_sum = 0.0;
    Index used = 0;
    for (Index i = 0; i < y_true.rows(); ++i) {
        for (Index j = 0; j < y_true.cols(); ++j) {
            if (std::abs(y_true(i, j)) <= 1e-12) {
                ++out.mape_excluded;
                continue;
            }
            ape_sum += std::abs(y_true(i, j) - y_pred(i, j)) / std::abs(y_true(i, j));
            ++used;
        }
    }
    if (used == 0) throw ValidationError("metrics: MAPE undefined, every true value is zero");
    out.mape = ape_sum / static_cast<double>(used);
    return out;
}

double spearman(const Vector& a, const Vector& b) {
    if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman: need matched vectors");
    const auto ranks = [](const Vector& v) {
        std::vector<Index> idx(static_cast<std::size_t>(v.size()));
        std::iota(idx.begin(), idx.end(), Index{0});
        std::sort(idx.begin(), idx.end(), [&](Index i, Index j) { return v(i) < v(j); });
        Vector r(v.size());
        for (Index pos = 0; pos < v.size(); ++pos)
            r(idx[static_cast<std::size_t>(pos)]) = static_cast<double>(pos);
        return r;
    };
    Vector ra = ranks(a), rb = ranks(b);
    ra.array() -= ra.mean();
    rb.array() -= rb.mean();
    const double denom = ra.norm() * rb.norm();
    if (denom == 0.0) throw ValidationError("spearman: constant input");
    return ra.dot(rb) / denom;
}

PipelineCv cross_validate_pipeline(const PipelineBuilder& builder, const Matrix& x,
                                   const Matrix& y, const std::vector<double>& grid, int folds,
                                   std::uint64_t seed) {
    require_same_rows(x, y, "cross_validate_pipeline");
    if (grid.empty()) throw ValidationError("cross_validate_pipeline: empty grid");
    if (folds < 2) throw ValidationError("cross_validate_pipeline: need at least 2 folds");
    const Index n = x.rows();
    if (folds > n) throw ValidationError("cross_validate_pipeline: more folds than rows");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = static_cast<int>(i % folds);

    Matrix rmse(static_cast<Index>(grid.size()), folds);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> tr, te;
        for (Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        Matrix xtr(tr.size(), x.cols()), ytr(tr.size(), y.cols());
        Matrix xte(te.size(), x.cols()), yte(te.size(), y.cols());
        for (std::size_t i = 0; i < tr.size(); ++i) { xtr.row(i) = x.row(tr[i]); ytr.row(i) = y.row(tr[i]); }
        for (std::size_t i = 0; i < te.size(); ++i) { xte.row(i) = x.row(te[i]); yte.row(i) = y.row(te[i]); }

        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Matrix pred = builder(xtr, ytr, xte, grid[g]);
            rmse(static_cast<Index>(g), f) = metrics(yte, pred).rmse;
        }
    }

    PipelineCv cv;
    cv.cv_rmse = rmse.rowwise().mean();
    cv.cv_se = Vector(static_cast<Index>(grid.size()));
    for (Index g = 0; g < cv.cv_rmse.size(); ++g) {
        const double var = (rmse.row(g).array() - cv.cv_rmse(g)).square().sum() /
                           static_cast<double>(std::max(folds - 1, 1));
        cv.cv_se(g) = std::sqrt(var / static_cast<double>(folds));
    }

    Index argmin = 0;
    for (Index g = 1; g < cv.cv_rmse.size(); ++g)
        if (cv.cv_rmse(g) < cv.cv_rmse(argmin)) argmin = g;

    // Same parsimony rule as component selection: earlier grid entries within
    // one standard error of the minimum win ties.
    Index best = argmin;
    const double cutoff = cv.cv_rmse(argmin) + cv.cv_se(argmin);
    for (Index g = 0; g < argmin; ++g) {
        if (cv.cv_rmse(g) <= cutoff) {
            best = g;
            break;
        }
    }
    cv.best_index = static_cast<std::size_t>(best);
    cv.best_config = grid[cv.best_index];
    return cv;
}

}  // namespace twocultures::pipeline
