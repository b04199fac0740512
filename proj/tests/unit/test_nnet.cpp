#include <doctest.h>

#include "support.hpp"
#include "twocultures/nnet.hpp"
#include "twocultures/numerics.hpp"
#include "twocultures/shrinkage.hpp"

#include <algorithm>

using namespace twocultures;
namespace nn = twocultures::nnet;
namespace tn = twocultures::numerics;

namespace {

double spearman(const Vector& a, const Vector& b) {
    auto ranks = [](const Vector& v) {
        std::vector<Index> idx(static_cast<std::size_t>(v.size()));
        std::iota(idx.begin(), idx.end(), Index{0});
        std::sort(idx.begin(), idx.end(), [&](Index i, Index j) { return v(i) < v(j); });
        Vector r(v.size());
        for (Index pos = 0; pos < v.size(); ++pos) r(idx[static_cast<std::size_t>(pos)]) = static_cast<double>(pos);
        return r;
    };
    Vector ra = ranks(a), rb = ranks(b);
    ra.array() -= ra.mean();
    rb.array() -= rb.mean();
    return ra.dot(rb) / (ra.norm() * rb.norm());
}

nn::MlpModel random_net(const std::vector<Index>& dims, nn::Activation hidden, Rng& rng) {
    nn::Architecture arch;
    arch.hidden.assign(dims.begin() + 1, dims.end() - 1);
    arch.hidden_activation = hidden;
    return nn::init_mlp(arch, dims.front(), dims.back(), rng);
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("forward through identity and relu layers") {
    nn::MlpModel id;
    nn::Layer layer;
    layer.w = Matrix::Identity(2, 2);
    layer.b = Eigen::RowVectorXd::Zero(2);
    layer.activation = nn::Activation::Identity;
    id.layers = {layer};

    Vector x(2);
    x << 0.3, -1.7;
    CHECK((nn::forward(id, x) - x).cwiseAbs().maxCoeff() == 0.0);

    id.layers[0].activation = nn::Activation::Relu;
    Vector v(2);
    v << -1.0, 2.0;
    Vector out = nn::forward(id, v);
    CHECK(out(0) == 0.0);
    CHECK(out(1) == 2.0);
}

TEST_CASE("forward matches a hand-computed two-layer network") {
    // 1 -> 1 -> 1 with weights 2, 3 and biases -1, 0.5 under relu:
    // x=1: relu(2*1 - 1) = 1, then 3*1 + 0.5 = 3.5.
    nn::MlpModel m;
    nn::Layer l1, l2;
    l1.w = Matrix::Constant(1, 1, 2.0);
    l1.b = Eigen::RowVectorXd::Constant(1, -1.0);
    l1.activation = nn::Activation::Relu;
    l2.w = Matrix::Constant(1, 1, 3.0);
    l2.b = Eigen::RowVectorXd::Constant(1, 0.5);
    l2.activation = nn::Activation::Identity;
    m.layers = {l1, l2};

    Vector x(1);
    x << 1.0;
    CHECK(nn::forward(m, x)(0) == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("zero input with zero biases through relu yields zero") {
    Rng rng = make_rng(700);
    nn::MlpModel m = random_net({4, 8, 3}, nn::Activation::Relu, rng);
    for (auto& l : m.layers) l.b.setZero();
    CHECK(nn::forward(m, Vector(Vector::Zero(4))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pure-relu zero-bias networks are positively homogeneous") {
    Rng rng = make_rng(701);
    nn::MlpModel m = random_net({3, 6, 6, 2}, nn::Activation::Relu, rng);
    for (auto& l : m.layers) l.b.setZero();
    for (auto& l : m.layers) l.activation = nn::Activation::Relu;

    Vector x = gaussian_vector(3, rng);
    for (double c : {0.5, 2.0, 7.3}) {
        Vector lhs = nn::forward(m, Vector(c * x));
        Vector rhs = c * nn::forward(m, x);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("linear architecture recovers OLS coefficients on exact data") {
    Rng rng = make_rng(702);
    Matrix x = gaussian_matrix(300, 3, rng);
    Vector beta(3);
    beta << 1.5, -2.0, 0.5;
    Matrix y = x * beta;

    nn::TrainConfig config;
    config.learning_rate = 0.05;
    config.epochs = 400;
    config.batch_size = 32;
    config.seed = 1;
    nn::Architecture arch;  // no hidden layer
    nn::TrainResult result = nn::train_sgd(config, x, y, arch);

    CHECK((result.model.layers[0].w.col(0) - beta).norm() <= 0.01 * beta.norm());
    CHECK(std::abs(result.model.layers[0].b(0)) <= 0.02);
    CHECK(result.train_loss(result.train_loss.size() - 1) <= 0.01 * result.train_loss(0));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    Rng rng = make_rng(703);
    Matrix x = gaussian_matrix(40, 3, rng);
    Matrix y = gaussian_matrix(40, 1, rng);

    nn::TrainConfig config;
    config.learning_rate = 0.0;
    config.epochs = 2;
    config.seed = 5;
    nn::Architecture arch;
    arch.hidden = {4};
    nn::TrainResult a = nn::train_sgd(config, x, y, arch);
    config.epochs = 9;
    nn::TrainResult b = nn::train_sgd(config, x, y, arch);
    for (std::size_t l = 0; l < a.model.layers.size(); ++l) {
        CHECK((a.model.layers[l].w - b.model.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.model.layers[l].b - b.model.layers[l].b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("training is bit-deterministic given the seed") {
    Rng rng = make_rng(704);
    Matrix x = gaussian_matrix(60, 4, rng);
    Matrix y = gaussian_matrix(60, 2, rng);

    nn::TrainConfig config;
    config.epochs = 20;
    config.seed = 99;
    nn::Architecture arch;
    arch.hidden = {5};
    nn::TrainResult a = nn::train_sgd(config, x, y, arch);
    nn::TrainResult b = nn::train_sgd(config, x, y, arch);
    for (std::size_t l = 0; l < a.model.layers.size(); ++l) {
        CHECK((a.model.layers[l].w - b.model.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((a.train_loss - b.train_loss).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient check: linear, tanh, and relu away from kinks") {
    Rng rng = make_rng(705);

    nn::MlpModel linear = random_net({3, 1}, nn::Activation::Identity, rng);
    Vector x = gaussian_vector(3, rng), y = gaussian_vector(1, rng);
    CHECK(nn::gradient_check(linear, x, y, nn::Loss::Mse) <= 1e-7);

    nn::MlpModel tanh_net = random_net({4, 6, 2}, nn::Activation::Tanh, rng);
    Vector x2 = gaussian_vector(4, rng), y2 = gaussian_vector(2, rng);
    CHECK(nn::gradient_check(tanh_net, x2, y2, nn::Loss::Mse) <= 1e-4);

    for (int rep = 0; rep < 20; ++rep) {
        nn::MlpModel net = random_net({3, 5, 2}, nn::Activation::Relu, rng);
        Vector xr, yr;
        // Resample until every relu pre-activation is comfortably off its kink.
        for (int attempt = 0; attempt < 100; ++attempt) {
            xr = gaussian_vector(3, rng);
            yr = gaussian_vector(2, rng);
            Matrix a = (xr.transpose() * net.layers[0].w).rowwise() + net.layers[0].b;
            if (a.cwiseAbs().minCoeff() > 1e-2) break;
        }
        CHECK(nn::gradient_check(net, xr, yr, nn::Loss::Mse) <= 1e-4);
    }
}

TEST_CASE("divergence raises a numerical error naming the epoch") {
    Rng rng = make_rng(706);
    Matrix x = gaussian_matrix(50, 3, rng, 10.0);
    Matrix y = gaussian_matrix(50, 1, rng, 10.0);
    nn::TrainConfig config;
    config.learning_rate = 1e4;
    config.epochs = 50;
    nn::Architecture arch;
    arch.hidden = {8};
    CHECK_THROWS_AS(nn::train_sgd(config, x, y, arch), NumericalError);
}

TEST_CASE("binary cross-entropy requires a logistic output") {
    Rng rng = make_rng(707);
    Matrix x = gaussian_matrix(20, 2, rng);
    Matrix y = Matrix::Zero(20, 1);
    nn::TrainConfig config;
    config.loss = nn::Loss::BinaryCrossEntropy;
    nn::Architecture arch;  // identity output
    CHECK_THROWS_AS(nn::train_sgd(config, x, y, arch), ValidationError);
}

TEST_CASE("autoencoder reconstructs exactly low-rank scores") {
    Rng rng = make_rng(708);
    Matrix t = gaussian_matrix(200, 2, rng) * gaussian_matrix(2, 4, rng);

    nn::TrainConfig config;
    config.learning_rate = 0.02;
    config.epochs = 1500;
    config.batch_size = 32;
    config.seed = 3;
    nn::AutoencoderFit fit = nn::fit_autoencoder(t, 2, nn::Activation::Identity,
                                                 nn::Activation::Identity, config);
    CHECK(fit.train_mse <= 1e-4);
}

TEST_CASE("autoencoder rejects a hidden layer as wide as the input") {
    Rng rng = make_rng(709);
    Matrix t = gaussian_matrix(30, 3, rng);
    nn::TrainConfig config;
    CHECK_THROWS_AS(nn::fit_autoencoder(t, 3, nn::Activation::Identity,
                                        nn::Activation::Identity, config),
                    ValidationError);
}

TEST_CASE("autoencoder cannot beat the best rank-1 approximation") {
    Rng rng = make_rng(710);
    Matrix t = gaussian_matrix(50, 3, rng);

    nn::TrainConfig config;
    config.learning_rate = 0.02;
    config.epochs = 2000;
    config.batch_size = 16;
    config.seed = 4;
    nn::AutoencoderFit fit = nn::fit_autoencoder(t, 1, nn::Activation::Identity,
                                                 nn::Activation::Identity, config);

    Matrix centered = t.rowwise() - t.colwise().mean();
    numerics::SvdResult dec = numerics::svd(centered);
    double bound = 0.0;
    for (Index j = 1; j < dec.D.size(); ++j) bound += dec.D(j) * dec.D(j);
    bound /= static_cast<double>(t.rows() * t.cols());

    CHECK(fit.train_mse >= bound - 1e-6);
    CHECK(fit.train_mse <= 1.5 * bound);  // and training actually worked
}

TEST_CASE("dropout with full keep matches plain sgd bit for bit") {
    Rng rng = make_rng(711);
    Matrix x = gaussian_matrix(50, 3, rng);
    Matrix y = gaussian_matrix(50, 1, rng);

    nn::TrainConfig config;
    config.epochs = 15;
    config.seed = 21;
    config.dropout_keep = 1.0;
    nn::Architecture arch;
    arch.hidden = {6};
    nn::TrainResult plain = nn::train_sgd(config, x, y, arch);
    nn::TrainResult dropped = nn::train_dropout(config, x, y, arch);
    for (std::size_t l = 0; l < plain.model.layers.size(); ++l) {
        CHECK((plain.model.layers[l].w - dropped.model.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
        CHECK(dropped.model.layers[l].input_keep == 1.0);
    }
}

TEST_CASE("dropout training is reproducible and rescales at inference") {
    Rng rng = make_rng(712);
    Matrix x = gaussian_matrix(60, 4, rng);
    Matrix y = gaussian_matrix(60, 1, rng);

    nn::TrainConfig config;
    config.epochs = 25;
    config.seed = 33;
    config.dropout_keep = 0.7;
    nn::Architecture arch;
    arch.hidden = {5};
    nn::TrainResult a = nn::train_dropout(config, x, y, arch);
    nn::TrainResult b = nn::train_dropout(config, x, y, arch);
    for (std::size_t l = 0; l < a.model.layers.size(); ++l) {
        CHECK((a.model.layers[l].w - b.model.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.model.layers[l].input_keep == doctest::Approx(0.7));
    }
}

TEST_CASE("dropout on a linear model lands nearer the marginalized ridge solution than OLS") {
    Rng rng = make_rng(713);
    const Index n = 400, p = 4;
    Matrix z = gaussian_matrix(n, p, rng);
    Matrix mix = Matrix::Identity(p, p);
    mix.array() += 0.8;
    Matrix x = z * mix;
    Vector beta = gaussian_vector(p, rng);
    Matrix y = x * beta + gaussian_matrix(n, 1, rng, 0.05);

    const double keep = 0.5;
    shrinkage::DropoutRidgeFit closed = shrinkage::dropout_ridge(x, y, keep);
    Matrix ols = numerics::solve_ols(x, y);

    nn::TrainConfig config;
    config.learning_rate = 0.004;
    config.epochs = 1200;
    config.batch_size = 50;
    config.seed = 8;
    config.dropout_keep = keep;
    nn::Architecture arch;  // linear
    nn::TrainResult result = nn::train_dropout(config, x, y, arch);

    const Vector w = result.model.layers[0].w.col(0);
    const double to_closed = (w - closed.w.col(0)).norm();
    const double to_ols = (w - ols.col(0)).norm();
    CHECK(to_closed < to_ols);
}

TEST_CASE("donut classifier values, symmetry, and boundary") {
    Vector origin = Vector::Zero(2);
    CHECK(nn::donut_classifier_fixed(origin) ==
          doctest::Approx(1.0 / (1.0 + std::exp(3.0))).epsilon(1e-12));

    Vector right(2);
    right << 3.0, 0.0;
    CHECK(nn::donut_classifier_fixed(right) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-12));

    Rng rng = make_rng(714);
    for (int k = 0; k < 50; ++k) {
        Vector x = gaussian_vector(2, rng, 2.0);
        Vector neg = -x;
        Vector swp(2);
        swp << x(1), x(0);
        const double p = nn::donut_classifier_fixed(x);
        CHECK(nn::donut_classifier_fixed(neg) == p);
        CHECK(nn::donut_classifier_fixed(swp) == p);
    }

    // 100 points on the square max(|x1|, |x2|) = 3/2 sit exactly on the
    // decision boundary.
    for (int k = 0; k < 100; ++k) {
        const double t = -1.5 + 3.0 * static_cast<double>(k) / 99.0;
        Vector pt(2);
        switch (k % 4) {
            case 0: pt << 1.5, t; break;
            case 1: pt << -1.5, t; break;
            case 2: pt << t, 1.5; break;
            default: pt << t, -1.5; break;
        }
        CHECK(std::abs(nn::donut_logit(pt)) <= 1e-9);
        CHECK(std::abs(nn::donut_classifier_fixed(pt) - 0.5) <= 2.5e-10);
    }
}

TEST_CASE("donut network model agrees with the direct arithmetic") {
    nn::MlpModel model = nn::donut_classifier_model();
    Rng rng = make_rng(715);
    for (int k = 0; k < 20; ++k) {
        Vector x = gaussian_vector(2, rng, 2.0);
        CHECK(nn::forward(model, x)(0) ==
              doctest::Approx(nn::donut_classifier_fixed(x)).epsilon(1e-14));
    }
}

TEST_CASE("bottleneck extracts a one-dimensional ridge structure") {
    Rng rng = make_rng(716);
    const Index n = 600, p = 10;
    Vector u = random_unit_vector(p, rng);
    Matrix x = uniform_matrix(n, p, rng);
    Matrix x_test = uniform_matrix(400, p, rng);
    Vector y = (x * u).cwiseAbs() + gaussian_vector(n, rng, 0.01);
    Vector y_test = (x_test * u).cwiseAbs();

    nn::TrainConfig config;
    config.learning_rate = 0.02;
    config.epochs = 400;
    config.batch_size = 32;
    config.seed = 12;
    nn::BottleneckWidths widths;
    widths.phi_hidden = 32;
    widths.f_hidden = 32;
    nn::BottleneckFit fit = nn::fit_bottleneck(x, y, widths, config);

    Vector pred = nn::bottleneck_predict(fit, x_test).col(0);
    const double ss_res = (pred - y_test).squaredNorm();
    const double ss_tot = (y_test.array() - y_test.mean()).square().sum();
    CHECK(1.0 - ss_res / ss_tot >= 0.8);

    Vector phi = nn::bottleneck_feature(fit, x_test);
    CHECK(std::abs(spearman(phi, Vector(x_test * u))) >= 0.8);
}

TEST_CASE("bottleneck rejects widths other than one") {
    Rng rng = make_rng(717);
    Matrix x = gaussian_matrix(30, 3, rng);
    Vector y = gaussian_vector(30, rng);
    nn::BottleneckWidths widths;
    widths.bottleneck = 2;
    CHECK_THROWS_AS(nn::fit_bottleneck(x, y, widths, nn::TrainConfig{}), ValidationError);
}

}  // TEST_SUITE
