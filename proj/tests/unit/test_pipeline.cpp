#include <doctest.h>

#include "support.hpp"
#include "twocultures/pipeline.hpp"
#include "twocultures/shrinkage.hpp"

#include <memory>

using namespace twocultures;
namespace tp = twocultures::pipeline;
namespace tn = twocultures::numerics;

namespace {

gp::FitOptions quick_gp(std::uint64_t seed = 0, int restarts = 2) {
    gp::FitOptions opts;
    opts.restarts = restarts;
    opts.max_iters = 50;
    opts.seed = seed;
    return opts;
}

gp::FitOptions interpolating_gp(std::uint64_t seed = 0) {
    gp::FitOptions opts = quick_gp(seed);
    opts.log_g_lo = -26.0;
    opts.log_g_hi = -20.0;  // pin the nugget near zero
    return opts;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("pls-gp on univariate linear data matches the linear fit inside the hull") {
    Rng rng = make_rng(900);
    Matrix x = uniform_matrix(100, 1, rng, -2.0, 2.0);
    Matrix y = 2.0 * x;

    tp::CompositeModel model = tp::fit_pls_gp(x, y, 1, quick_gp(1, 3));
    Matrix x_test = uniform_matrix(50, 1, rng, -1.8, 1.8);
    tp::PredictiveDistribution pred = tp::predict(model, x_test);
    CHECK((pred.mean - 2.0 * x_test).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("pls-gp with a tiny nugget reproduces the training response") {
    Rng rng = make_rng(901);
    Matrix x = gaussian_matrix(50, 4, rng);
    Vector u = x * Vector::LinSpaced(4, 1.0, 2.5);
    Matrix y = (u.array().sin() + 0.5 * u.array()).matrix();

    tp::CompositeModel model = tp::fit_pls_gp(x, y, 2, interpolating_gp(2));
    tp::PredictiveDistribution pred = tp::predict(model, x);
    CHECK((pred.mean - y).cwiseAbs().maxCoeff() <= 1e-3);

    // A univariate response makes the first y-score the response itself, so
    // the refit back-projection zeroes every later head.
    REQUIRE(model.heads.size() == 2);
    CHECK(std::holds_alternative<tp::GpHead>(model.heads[0]));
    CHECK(std::holds_alternative<tp::ZeroHead>(model.heads[1]));
}

TEST_CASE("pls-gp end-to-end determinism") {
    Rng rng = make_rng(902);
    Matrix x = gaussian_matrix(40, 3, rng);
    Matrix y = ((x * Vector::Ones(3)).array().tanh() + 0.1).matrix();

    tp::CompositeModel a = tp::fit_pls_gp(x, y, 2, quick_gp(3));
    tp::CompositeModel b = tp::fit_pls_gp(x, y, 2, quick_gp(3));
    Matrix xq = gaussian_matrix(20, 3, rng);
    tp::PredictiveDistribution pa = tp::predict(a, xq);
    tp::PredictiveDistribution pb = tp::predict(b, xq);
    CHECK((pa.mean - pb.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pa.sd - pb.sd).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interpolating heads reproduce the pls training fit") {
    Rng rng = make_rng(903);
    Matrix x = testsupport::orthonormal_design(60, 4, rng);
    Matrix y = x * gaussian_matrix(4, 2, rng);  // exact rank-2 across two outputs

    tp::CompositeModel model = tp::fit_pls_gp(x, y, 2, interpolating_gp(4));
    pls::PlsModel plain = pls::fit(x, y, 2);

    tp::PredictiveDistribution pred = tp::predict(model, x);
    Matrix pls_fit = pls::predict(plain, x);
    CHECK((pred.mean - pls_fit).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("dl-pls with a linear inner map reduces to plain pls") {
    Rng rng = make_rng(904);
    Matrix x = testsupport::orthonormal_design(60, 3, rng);
    Matrix y = x * gaussian_matrix(3, 2, rng);

    nnet::TrainConfig config;
    config.learning_rate = 0.3;
    config.epochs = 5000;
    config.batch_size = 60;
    config.seed = 5;
    tp::CompositeModel model = tp::fit_dl_pls(x, y, 2, {}, config);

    pls::PlsModel plain = pls::fit(x, y, 2);
    Matrix x_test = gaussian_matrix(30, 3, rng);
    Matrix a = tp::predict(model, x_test).mean;
    Matrix b = pls::predict(plain, x_test);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + b.cwiseAbs().maxCoeff()));
}

TEST_CASE("dl-pls beats linear pls on a quadratic score relation") {
    Rng rng = make_rng(905);
    const Index n = 400;
    Matrix x = uniform_matrix(n, 1, rng, -1.5, 1.5);
    Matrix x_test = uniform_matrix(200, 1, rng, -1.5, 1.5);
    auto response = [](const Matrix& input) -> Matrix {
        return ((input.array() + 1.0).square()).matrix();
    };
    Matrix y = response(x) + gaussian_matrix(n, 1, rng, 0.05);
    Matrix y_test = response(x_test);

    nnet::TrainConfig config;
    config.learning_rate = 0.05;
    config.epochs = 800;
    config.batch_size = 32;
    config.seed = 6;
    tp::CompositeModel nonlinear = tp::fit_dl_pls(x, y, 1, {16}, config);
    pls::PlsModel linear = pls::fit(x, y, 1);

    const double mse_nl = testsupport::mse(tp::predict(nonlinear, x_test).mean, y_test);
    const double mse_lin = testsupport::mse(pls::predict(linear, x_test), y_test);
    CHECK(mse_nl <= 0.5 * mse_lin);
}

TEST_CASE("dl-pls autoencoder variant reports reconstruction and predicts") {
    Rng rng = make_rng(906);
    Matrix x = gaussian_matrix(120, 5, rng);
    Matrix y = x * gaussian_matrix(5, 2, rng) + gaussian_matrix(120, 2, rng, 0.1);

    nnet::TrainConfig config;
    config.epochs = 200;
    config.seed = 7;
    tp::DlPlsAutoencoderFit fit = tp::fit_dl_pls_autoencoder(x, y, 3, 2, config);
    CHECK(std::isfinite(fit.score_reconstruction_mse));
    tp::PredictiveDistribution pred = tp::predict(fit.model, x);
    CHECK(pred.mean.allFinite());
    CHECK(tp::metrics(y, pred.mean).rmse < tp::metrics(y, Matrix(Matrix::Zero(120, 2))).rmse);
}

TEST_CASE("dl-gp with full-width reduction stays near the plain gp") {
    Rng rng = make_rng(907);
    const Index n = 250, p = 3;
    Matrix x = uniform_matrix(n, p, rng, -2.0, 2.0);
    Matrix x_test = uniform_matrix(150, p, rng, -2.0, 2.0);
    auto response = [](const Matrix& input) -> Matrix {
        return (input.col(0).array().sin() + 0.5 * input.col(1).array() -
                0.3 * input.col(2).array().square())
            .matrix();
    };
    const double noise = 0.15;
    Matrix y = response(x) + gaussian_matrix(n, 1, rng, noise);
    Matrix y_test = response(x_test) + gaussian_matrix(150, 1, rng, noise);

    nnet::TrainConfig config;
    config.learning_rate = 0.1;
    config.epochs = 2000;
    config.batch_size = 32;
    config.seed = 8;
    tp::CompositeModel dl = tp::fit_dl_gp(x, y, p, 16, config, quick_gp(9));
    tp::CompositeModel plain = tp::fit_plain_gp(x, y, quick_gp(10));

    const double rmse_dl = tp::metrics(y_test, tp::predict(dl, x_test).mean).rmse;
    const double rmse_plain = tp::metrics(y_test, tp::predict(plain, x_test).mean).rmse;
    CHECK(rmse_dl <= 1.2 * rmse_plain + 0.02);
}

TEST_CASE("dl-gp exploits a low-dimensional active subspace") {
    // A rotated two-dimensional ridge response in 25 ambient dimensions:
    // axis-aligned lengthscales cannot absorb the rotation, while the
    // bottleneck learns the subspace and hands the GP a cheap problem.
    int wins = 0;
    for (int rep = 0; rep < 5; ++rep) {
        Rng rng = make_rng(910 + rep);
        const Index n = 400, p = 25;
        Matrix basis = gaussian_matrix(p, 2, rng);
        basis.col(0).normalize();
        basis.col(1).normalize();
        Matrix x = uniform_matrix(n, p, rng, -2.0, 2.0);
        Matrix x_test = uniform_matrix(300, p, rng, -2.0, 2.0);
        auto response = [&](const Matrix& input) -> Matrix {
            Vector v1 = input * basis.col(0), v2 = input * basis.col(1);
            return (v1.array().abs() + 0.8 * v2.array()).matrix();
        };
        Matrix y = response(x) + gaussian_matrix(n, 1, rng, 0.05);
        Matrix y_test = response(x_test);

        nnet::TrainConfig config;
        config.learning_rate = 0.1;
        config.epochs = 4000;
        config.batch_size = 32;
        config.seed = 100 + static_cast<std::uint64_t>(rep);
        tp::CompositeModel dl = tp::fit_dl_gp(x, y, 2, 24, config, quick_gp(11));
        tp::CompositeModel plain = tp::fit_plain_gp(x, y, quick_gp(12));

        const double rmse_dl = tp::metrics(y_test, tp::predict(dl, x_test).mean).rmse;
        const double rmse_plain = tp::metrics(y_test, tp::predict(plain, x_test).mean).rmse;
        if (rmse_dl <= rmse_plain) ++wins;
    }
    CHECK(wins >= 4);
}

TEST_CASE("dl-gp validates the reduced dimension and is deterministic") {
    Rng rng = make_rng(908);
    Matrix x = gaussian_matrix(40, 3, rng);
    Matrix y = gaussian_matrix(40, 1, rng);
    nnet::TrainConfig config;
    config.epochs = 30;
    CHECK_THROWS_AS(tp::fit_dl_gp(x, y, 4, 8, config, quick_gp()), ValidationError);

    tp::CompositeModel a = tp::fit_dl_gp(x, y, 2, 8, config, quick_gp(13));
    tp::CompositeModel b = tp::fit_dl_gp(x, y, 2, 8, config, quick_gp(13));
    Matrix xq = gaussian_matrix(10, 3, rng);
    CHECK((tp::predict(a, xq).mean - tp::predict(b, xq).mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pca-gp captures an exactly rank-1 output") {
    Rng rng = make_rng(909);
    const Index n = 50;
    Matrix x = uniform_matrix(n, 1, rng, -2.0, 2.0);
    Vector signal = x.col(0).array().sin();
    Eigen::RowVectorXd direction(3);
    direction << 1.0, -2.0, 0.5;
    Matrix y = signal * direction;

    tp::CompositeModel model = tp::fit_pca_gp(x, y, 1, interpolating_gp(14));

    // Basis completeness: the single output direction carries everything.
    Matrix yc = y.rowwise() - y.colwise().mean();
    Matrix recon = (yc * model.back_projection.transpose()) * model.back_projection;
    CHECK((recon - yc).cwiseAbs().maxCoeff() <= 1e-8);

    // Interpolating weight-series GP reproduces the training outputs.
    tp::PredictiveDistribution pred = tp::predict(model, x);
    CHECK((pred.mean - y).cwiseAbs().maxCoeff() <= 1e-4);

    CHECK_THROWS_AS(tp::fit_pca_gp(x, y, 2, quick_gp()), ValidationError);  // rank is 1
}

TEST_CASE("pca-gp with a complete basis spans the outputs") {
    Rng rng = make_rng(911);
    Matrix x = uniform_matrix(60, 2, rng, -2.0, 2.0);
    Matrix y(60, 2);
    y.col(0) = x.col(0).array().sin() + 0.3 * x.col(1).array();
    y.col(1) = x.col(1).array().cos();

    tp::CompositeModel model = tp::fit_pca_gp(x, y, 2, quick_gp(15));
    Matrix yc = y.rowwise() - y.colwise().mean();
    Matrix recon = (yc * model.back_projection.transpose()) * model.back_projection;
    CHECK((recon - yc).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_THROWS_AS(tp::fit_pca_gp(x, Matrix(y.col(0)), 1, quick_gp()), ValidationError);
}

TEST_CASE("pca-gp tracks per-output gps on a smooth two-output response") {
    Rng rng = make_rng(912);
    const Index n = 150;
    Matrix x = uniform_matrix(n, 2, rng, -2.0, 2.0);
    Matrix x_test = uniform_matrix(100, 2, rng, -1.8, 1.8);
    auto response = [](const Matrix& input) -> Matrix {
        Vector f = (input.col(0).array().sin() + 0.5 * input.col(1).array()).matrix();
        Vector h = input.col(1).array().cos().matrix();
        Matrix out(input.rows(), 2);
        out.col(0) = f + 0.2 * h;
        out.col(1) = 0.7 * f - 0.3 * h;
        return out;
    };
    const double noise = 0.05;
    Matrix y = response(x) + gaussian_matrix(n, 2, rng, noise);
    Matrix y_test = response(x_test) + gaussian_matrix(100, 2, rng, noise);

    tp::CompositeModel pca = tp::fit_pca_gp(x, y, 2, quick_gp(16));
    tp::CompositeModel per_output = tp::fit_plain_gp(x, y, quick_gp(17));

    const double rmse_pca = tp::metrics(y_test, tp::predict(pca, x_test).mean).rmse;
    const double rmse_base = tp::metrics(y_test, tp::predict(per_output, x_test).mean).rmse;
    CHECK(rmse_pca <= 1.1 * rmse_base + 1e-3);
}

TEST_CASE("ensemble of one is the identity and constants average") {
    Rng rng = make_rng(913);
    Matrix xq = gaussian_matrix(5, 2, rng);

    auto constant = [](double value) {
        return [value](const Matrix& x_new) {
            tp::PredictiveDistribution dist;
            dist.mean = Matrix::Constant(x_new.rows(), 1, value);
            dist.sd = Matrix::Zero(x_new.rows(), 1);
            return dist;
        };
    };

    tp::PredictiveDistribution single = tp::ensemble_average({constant(3.0)}, xq);
    CHECK((single.mean.array() - 3.0).abs().maxCoeff() == 0.0);

    tp::PredictiveDistribution pair = tp::ensemble_average({constant(1.0), constant(2.0)}, xq);
    CHECK((pair.mean.array() - 1.5).abs().maxCoeff() == 0.0);
    CHECK((pair.sd.array() - 0.5).abs().maxCoeff() <= 1e-12);  // spread of the means
}

TEST_CASE("ensemble mixture moments match the hand formula") {
    Matrix xq = Matrix::Zero(1, 1);
    auto member = [](double m, double s) {
        return [m, s](const Matrix& x_new) {
            tp::PredictiveDistribution dist;
            dist.mean = Matrix::Constant(x_new.rows(), 1, m);
            dist.sd = Matrix::Constant(x_new.rows(), 1, s);
            return dist;
        };
    };
    tp::PredictiveDistribution mix = tp::ensemble_average({member(1.0, 0.5), member(3.0, 1.0)}, xq);
    CHECK(mix.mean(0, 0) == doctest::Approx(2.0));
    // var = mean of variances + variance of means = (0.25 + 1)/2 + 1 = 1.625
    CHECK(mix.sd(0, 0) == doctest::Approx(std::sqrt(1.625)).epsilon(1e-12));
}

TEST_CASE("ensemble mse never exceeds the average member mse") {
    Rng rng = make_rng(914);
    const Index n = 300;
    Matrix x = uniform_matrix(n, 2, rng, -2.0, 2.0);
    Matrix y = (x.col(0).array().square() + x.col(1).array()).matrix() +
               gaussian_matrix(n, 1, rng, 0.3);
    Matrix x_test = uniform_matrix(200, 2, rng, -2.0, 2.0);
    Matrix y_test = (x_test.col(0).array().square() + x_test.col(1).array()).matrix();

    std::vector<tp::Predictor> members;
    std::vector<Matrix> preds;
    for (int k = 0; k < 10; ++k) {
        nnet::TrainConfig config;
        config.epochs = 60;
        config.learning_rate = 0.03;
        config.seed = 40 + static_cast<std::uint64_t>(k);
        nnet::Architecture arch;
        arch.hidden = {8};
        auto net = std::make_shared<nnet::MlpModel>(nnet::train_sgd(config, x, y, arch).model);
        members.push_back([net](const Matrix& xn) {
            tp::PredictiveDistribution dist;
            dist.mean = nnet::forward(*net, xn);
            dist.sd = Matrix::Zero(xn.rows(), 1);
            return dist;
        });
        preds.push_back(nnet::forward(*net, x_test));
    }

    tp::PredictiveDistribution ens = tp::ensemble_average(members, x_test);
    double avg_member_mse = 0.0;
    for (const Matrix& p : preds) avg_member_mse += testsupport::mse(p, y_test);
    avg_member_mse /= 10.0;
    CHECK(testsupport::mse(ens.mean, y_test) <= avg_member_mse + 1e-12);
}

TEST_CASE("metrics: hand values, offsets, and exclusions") {
    Matrix y(2, 1), yhat(2, 1);
    y << 1.0, 2.0;
    yhat << 2.0, 2.0;
    tp::Metrics m = tp::metrics(y, yhat);
    CHECK(m.rmse == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(m.mape == doctest::Approx(0.5).epsilon(1e-12));

    tp::Metrics perfect = tp::metrics(y, y);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.mape == 0.0);

    Matrix shifted = y.array() + 0.3;
    CHECK(tp::metrics(y, shifted).rmse == doctest::Approx(0.3).epsilon(1e-12));

    Matrix with_zero(3, 1), pred3(3, 1);
    with_zero << 1.0, 0.0, 2.0;
    pred3 << 1.0, 5.0, 2.0;
    tp::Metrics partial = tp::metrics(with_zero, pred3);
    CHECK(partial.mape_excluded == 1);
    CHECK(partial.mape == 0.0);

    CHECK_THROWS_AS(tp::metrics(Matrix(Matrix::Zero(2, 1)), pred3), ValidationError);
    CHECK_THROWS_AS(tp::metrics(Matrix(Matrix::Zero(2, 2)), Matrix(Matrix::Zero(2, 2))),
                    ValidationError);
}

TEST_CASE("pipeline cross-validation selects the right component count") {
    Rng rng = make_rng(915);
    const Index n = 640, p = 6;
    Matrix x = Matrix::Zero(n, p);
    x.topLeftCorner(n / 2, 2) = gaussian_matrix(n / 2, 2, rng);
    x.bottomRightCorner(n / 2, 4) = gaussian_matrix(n / 2, 4, rng);
    Vector beta(p);
    beta << 1.0, -0.7, 0, 0, 0, 0;
    Matrix y = x * beta + gaussian_matrix(n, 1, rng, 0.01);

    tp::PipelineBuilder builder = [](const Matrix& xtr, const Matrix& ytr, const Matrix& xte,
                                     double config) {
        pls::PlsModel m = pls::fit(xtr, ytr, static_cast<Index>(config));
        return pls::predict(m, xte);
    };

    tp::PipelineCv cv = tp::cross_validate_pipeline(builder, x, y, {1, 2, 3, 4}, 5, 77);
    CHECK(cv.best_config == 2.0);

    tp::PipelineCv one = tp::cross_validate_pipeline(builder, x, y, {3}, 5, 77);
    CHECK(one.best_config == 3.0);

    CHECK_THROWS_AS(tp::cross_validate_pipeline(builder, x, y, {1, 2}, 1, 77), ValidationError);
    CHECK_THROWS_AS(tp::cross_validate_pipeline(builder, x, y, {}, 5, 77), ValidationError);
}

TEST_CASE("95 percent bands cover gp-generated data at a sane rate") {
    Rng rng = make_rng(916);
    const Index n = 120, m = 2000;
    Matrix x = uniform_matrix(n, 1, rng, -3.0, 3.0);
    Matrix x_test = uniform_matrix(m, 1, rng, -3.0, 3.0);

    gp::KernelParams truth;
    truth.d = Vector::Constant(1, 1.2);
    truth.g = 0.0;
    Matrix joint(n + m, 1);
    joint << x, x_test;
    Matrix k = gp::kernel_matrix(joint, joint, truth, true);
    numerics::CholeskyResult chol = numerics::cholesky_jitter(k, 1e-10);
    Vector f = chol.L * gaussian_vector(n + m, rng);
    const double noise_sd = 0.1;
    Vector y = f.head(n) + gaussian_vector(n, rng, noise_sd);
    Vector y_test = f.tail(m) + gaussian_vector(m, rng, noise_sd);

    tp::CompositeModel model = tp::fit_plain_gp(x, Matrix(y), quick_gp(18, 3));
    tp::PredictiveDistribution pred = tp::predict(model, x_test);
    Matrix lo = pred.band95_low(), hi = pred.band95_high();
    Index covered = 0;
    for (Index i = 0; i < m; ++i)
        if (y_test(i) >= lo(i, 0) && y_test(i) <= hi(i, 0)) ++covered;
    const double rate = static_cast<double>(covered) / static_cast<double>(m);
    CHECK(rate >= 0.85);
    CHECK(rate <= 0.99);
}

TEST_CASE("pca transform feeds heads like principal component regression") {
    Rng rng = make_rng(917);
    Matrix z = gaussian_matrix(80, 4, rng);
    Matrix mix = Matrix::Identity(4, 4);
    mix.array() += 0.5;
    Matrix x = z * mix;
    Vector y = (x * gaussian_vector(4, rng) + gaussian_vector(80, rng, 0.1)).eval();

    shrinkage::SpectralBasis basis = shrinkage::spectral_basis(x, y);
    auto [xs, x_std] = tn::standardize(x);
    auto [ys_m, y_std] = tn::standardize(Matrix(y));

    const Index k = 2;
    tp::PcaTransform transform;
    transform.basis = basis.V.leftCols(k);
    transform.x_std = x_std;

    Matrix scores = xs * transform.basis;
    tp::LinearHead head;
    head.coef = tn::solve_ols(scores, ys_m);
    head.intercept = Eigen::RowVectorXd::Zero(1);

    tp::CompositeModel model;
    model.transform = transform;
    model.heads = {head};
    model.back_projection = Matrix::Identity(1, 1);
    model.y_std = y_std;

    shrinkage::PcrFit pcr = shrinkage::fit_pcr(x, y, k);
    tp::PredictiveDistribution pred = tp::predict(model, x);
    CHECK((pred.mean.col(0) - pcr.fitted.col(k)).cwiseAbs().maxCoeff() <= 1e-8);
}

}  // TEST_SUITE
