#include "twocultures/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twocultures::nnet {

namespace {

Matrix apply_activation(const Matrix& a, Activation act) {
    switch (act) {
        case Activation::Relu: return a.cwiseMax(0.0);
        case Activation::Tanh: return a.array().tanh();
        case Activation::Identity: return a;
        case Activation::Logistic: return (1.0 / (1.0 + (-a.array()).exp()));
    }
    throw ValidationError("nnet: unknown activation");
}

// Derivative evaluated at the pre-activation.
Matrix activation_grad(const Matrix& a, Activation act) {
    switch (act) {
        case Activation::Relu: return (a.array() > 0.0).cast<double>();
        case Activation::Tanh: return 1.0 - a.array().tanh().square();
        case Activation::Identity: return Matrix::Ones(a.rows(), a.cols());
        case Activation::Logistic: {
            const Matrix s = apply_activation(a, act);
            return s.array() * (1.0 - s.array());
        }
    }
    throw ValidationError("nnet: unknown activation");
}

void validate_config(const TrainConfig& config, Activation output) {
    if (config.learning_rate < 0.0) throw ValidationError("nnet: learning rate must be >= 0");
    if (config.epochs < 1) throw ValidationError("nnet: epochs must be >= 1");
    if (config.batch_size < 1) throw ValidationError("nnet: batch size must be >= 1");
    if (!(config.dropout_keep > 0.0 && config.dropout_keep <= 1.0)) {
        throw ValidationError("nnet: dropout keep rate must lie in (0, 1]");
    }
    if (config.loss == Loss::BinaryCrossEntropy && output != Activation::Logistic) {
        throw ValidationError("nnet: binary cross-entropy requires a logistic output layer");
    }
}

std::vector<Activation> layer_activations(const Architecture& arch) {
    std::vector<Activation> acts;
    if (!arch.hidden_activations.empty()) {
        if (arch.hidden_activations.size() != arch.hidden.size()) {
            throw ValidationError("nnet: per-layer activation count does not match hidden widths");
        }
        acts = arch.hidden_activations;
    } else {
        acts.assign(arch.hidden.size(), arch.hidden_activation);
    }
    acts.push_back(arch.output_activation);
    return acts;
}

double compute_loss(const Matrix& pred, const Matrix& y, Loss loss) {
    const double n = static_cast<double>(y.rows());
    if (loss == Loss::Mse) return (pred - y).squaredNorm() / (2.0 * n);
    const auto p = pred.array().min(1.0 - 1e-12).max(1e-12);
    return -((y.array() * p.log()) + (1.0 - y.array()) * (1.0 - p).log()).sum() / n;
}

struct ForwardTrace {
    std::vector<Matrix> inputs;   // layer inputs after any dropout mask
    std::vector<Matrix> preacts;  // affine outputs
    Matrix output;
};

ForwardTrace forward_trace(const MlpModel& model, const Matrix& x,
                           const std::vector<Eigen::RowVectorXd>* masks) {
    ForwardTrace trace;
    Matrix z = x;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        if (masks) z = z.array().rowwise() * (*masks)[l].array();
        trace.inputs.push_back(z);
        Matrix a = (z * layer.w).rowwise() + layer.b;
        trace.preacts.push_back(a);
        z = apply_activation(a, layer.activation);
    }
    trace.output = z;
    return trace;
}

struct Gradients {
    std::vector<Matrix> dw;
    std::vector<Eigen::RowVectorXd> db;
};

Gradients backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& y, Loss loss,
                   const std::vector<Eigen::RowVectorXd>* masks) {
    const std::size_t depth = model.layers.size();
    const double n = static_cast<double>(y.rows());

    Gradients grads;
    grads.dw.resize(depth);
    grads.db.resize(depth);

    // dL/d(preactivation) at the output layer. Logistic + cross-entropy
    // collapses to (p - y)/n; MSE is (pred - y)/n through the activation.
    Matrix delta;
    if (loss == Loss::BinaryCrossEntropy) {
        delta = (trace.output - y) / n;
    } else {
        delta = ((trace.output - y) / n)
                    .cwiseProduct(activation_grad(trace.preacts.back(),
                                                  model.layers.back().activation));
    }

    for (std::size_t l = depth; l-- > 0;) {
        grads.dw[l] = trace.inputs[l].transpose() * delta;
        grads.db[l] = delta.colwise().sum();
        if (l == 0) break;
        Matrix dz = delta * model.layers[l].w.transpose();
        if (masks) dz = dz.array().rowwise() * (*masks)[l].array();
        delta = dz.cwiseProduct(activation_grad(trace.preacts[l - 1],
                                                model.layers[l - 1].activation));
    }
    return grads;
}

TrainResult train_impl(const TrainConfig& config, const Matrix& x, const Matrix& y,
                       const Architecture& arch, bool dropout, const Matrix* x_holdout,
                       const Matrix* y_holdout) {
    require_same_rows(x, y, "nnet::train");
    validate_config(config, arch.output_activation);
    require_finite(x, "nnet::train X");
    require_finite(y, "nnet::train Y");

    const Index n = x.rows();
    const bool use_masks = dropout && config.dropout_keep < 1.0;

    Rng init_rng = make_rng(config.seed, 0);
    Rng shuffle_rng = make_rng(config.seed, 1);
    Rng mask_rng = make_rng(config.seed, 2);

    TrainResult result;
    result.model = init_mlp(arch, x.cols(), y.cols(), init_rng);
    result.train_loss = Vector(config.epochs);
    if (x_holdout && y_holdout) result.holdout_loss = Vector(config.epochs);

    const std::size_t depth = result.model.layers.size();
    std::bernoulli_distribution keep(config.dropout_keep);
    std::vector<Eigen::RowVectorXd> masks(depth);

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = config.learning_rate / std::sqrt(static_cast<double>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (Index start = 0; start < n; start += config.batch_size) {
            const Index count = std::min<Index>(config.batch_size, n - start);
            Matrix xb(count, x.cols()), yb(count, y.cols());
            for (Index i = 0; i < count; ++i) {
                xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
                yb.row(i) = y.row(order[static_cast<std::size_t>(start + i)]);
            }

            if (use_masks) {
                for (std::size_t l = 0; l < depth; ++l) {
                    const Index width = result.model.layers[l].w.rows();
                    masks[l].resize(width);
                    for (Index j = 0; j < width; ++j) masks[l](j) = keep(mask_rng) ? 1.0 : 0.0;
                }
            }

            const auto* mask_ptr = use_masks ? &masks : nullptr;
            ForwardTrace trace = forward_trace(result.model, xb, mask_ptr);
            Gradients grads = backward(result.model, trace, yb, config.loss, mask_ptr);
            for (std::size_t l = 0; l < depth; ++l) {
                result.model.layers[l].w -= lr * grads.dw[l];
                result.model.layers[l].b -= lr * grads.db[l];
            }
        }

        MlpModel eval_model = result.model;
        if (use_masks) {
            for (Layer& layer : eval_model.layers) layer.input_keep = config.dropout_keep;
        }
        result.train_loss(epoch - 1) = compute_loss(forward(eval_model, x), y, config.loss);
        if (x_holdout && y_holdout) {
            result.holdout_loss(epoch - 1) =
                compute_loss(forward(eval_model, *x_holdout), *y_holdout, config.loss);
        }
        if (!std::isfinite(result.train_loss(epoch - 1))) {
            throw NumericalError("nnet::train diverged at epoch " + std::to_string(epoch));
        }
    }

    if (use_masks) {
        for (Layer& layer : result.model.layers) layer.input_keep = config.dropout_keep;
    }
    return result;
}

}  // namespace

Matrix forward(const MlpModel& model, const Matrix& x) {
    if (model.layers.empty()) throw ValidationError("nnet::forward: empty model");
    require_cols(x, model.input_dim(), "nnet::forward");

    Matrix z = x;
    for (const Layer& layer : model.layers) {
        if (layer.input_keep != 1.0) z *= layer.input_keep;
        z = apply_activation(Matrix((z * layer.w).rowwise() + layer.b), layer.activation);
    }
    return z;
}

Vector forward(const MlpModel& model, const Vector& x) {
    return forward(model, Matrix(x.transpose())).row(0);
}

MlpModel init_mlp(const Architecture& arch, Index input_dim, Index output_dim, Rng& rng) {
    if (input_dim < 1 || output_dim < 1) throw ValidationError("nnet::init_mlp: empty dimensions");
    for (Index h : arch.hidden)
        if (h < 1) throw ValidationError("nnet::init_mlp: hidden width must be >= 1");

    const std::vector<Activation> acts = layer_activations(arch);
    std::vector<Index> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
    dims.push_back(output_dim);

    MlpModel model;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const Index fan_in = dims[l], fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> unif(-limit, limit);
        Layer layer;
        layer.w = Matrix(fan_in, fan_out);
        for (Index i = 0; i < fan_in; ++i)
            for (Index j = 0; j < fan_out; ++j) layer.w(i, j) = unif(rng);
        layer.b = Eigen::RowVectorXd::Zero(fan_out);
        layer.activation = acts[l];
        model.layers.push_back(std::move(layer));
    }
    return model;
}

TrainResult train_sgd(const TrainConfig& config, const Matrix& x, const Matrix& y,
                      const Architecture& arch, const Matrix* x_holdout, const Matrix* y_holdout) {
    return train_impl(config, x, y, arch, false, x_holdout, y_holdout);
}

TrainResult train_dropout(const TrainConfig& config, const Matrix& x, const Matrix& y,
                          const Architecture& arch) {
    return train_impl(config, x, y, arch, true, nullptr, nullptr);
}

double gradient_check(const MlpModel& model, const Vector& x, const Vector& y, Loss loss) {
    if (loss == Loss::BinaryCrossEntropy &&
        model.layers.back().activation != Activation::Logistic) {
        throw ValidationError("nnet::gradient_check: loss incompatible with output activation");
    }
    const Matrix xb = x.transpose();
    const Matrix yb = y.transpose();

    ForwardTrace trace = forward_trace(model, xb, nullptr);
    Gradients grads = backward(model, trace, yb, loss, nullptr);

    const double h = 1e-5;
    double worst = 0.0;
    MlpModel probe = model;
    auto eval = [&]() {
        return compute_loss(forward_trace(probe, xb, nullptr).output, yb, loss);
    };

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        for (Index i = 0; i < model.layers[l].w.rows(); ++i) {
            for (Index j = 0; j < model.layers[l].w.cols(); ++j) {
                probe.layers[l].w(i, j) = model.layers[l].w(i, j) + h;
                const double up = eval();
                probe.layers[l].w(i, j) = model.layers[l].w(i, j) - h;
                const double dn = eval();
                probe.layers[l].w(i, j) = model.layers[l].w(i, j);
                const double fd = (up - dn) / (2.0 * h);
                const double a = grads.dw[l](i, j);
                worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
            }
        }
        for (Index j = 0; j < model.layers[l].b.size(); ++j) {
            probe.layers[l].b(j) = model.layers[l].b(j) + h;
            const double up = eval();
            probe.layers[l].b(j) = model.layers[l].b(j) - h;
            const double dn = eval();
            probe.layers[l].b(j) = model.layers[l].b(j);
            const double fd = (up - dn) / (2.0 * h);
            const double a = grads.db[l](j);
            worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
        }
    }
    return worst;
}

BottleneckFit fit_bottleneck(const Matrix& x, const Vector& y, const BottleneckWidths& widths,
                             const TrainConfig& config, const Matrix* x_holdout,
                             const Vector* y_holdout) {
    if (widths.bottleneck != 1) {
        throw ValidationError("nnet::fit_bottleneck: bottleneck width must be exactly 1");
    }
    BottleneckFit fit;
    auto [xs, xp] = numerics::standardize(x);
    auto [ys, yp] = numerics::standardize(Matrix(y));
    fit.x_std = xp;
    fit.y_std = yp;

    // phi_hidden = 0 makes the feature map a single affine layer, which pins
    // the scalar feature to the best linear index.
    Architecture arch;
    if (widths.phi_hidden > 0) {
        arch.hidden = {widths.phi_hidden, 1, widths.f_hidden};
        arch.hidden_activations = {Activation::Relu, Activation::Identity, Activation::Relu};
        fit.phi_layers = 2;
    } else {
        arch.hidden = {1, widths.f_hidden};
        arch.hidden_activations = {Activation::Identity, Activation::Relu};
        fit.phi_layers = 1;
    }
    arch.output_activation = Activation::Identity;

    Matrix xh, yh;
    const bool with_holdout = x_holdout && y_holdout;
    if (with_holdout) {
        xh = numerics::apply_standardization(*x_holdout, fit.x_std);
        yh = numerics::apply_standardization(Matrix(*y_holdout), fit.y_std);
    }
    TrainResult trained = train_sgd(config, xs, ys, arch, with_holdout ? &xh : nullptr,
                                    with_holdout ? &yh : nullptr);
    fit.model = std::move(trained.model);
    fit.train_loss = std::move(trained.train_loss);
    fit.holdout_loss = std::move(trained.holdout_loss);
    return fit;
}

Matrix bottleneck_predict(const BottleneckFit& fit, const Matrix& x) {
    const Matrix xs = numerics::apply_standardization(x, fit.x_std);
    return numerics::invert_standardization(forward(fit.model, xs), fit.y_std);
}

Vector bottleneck_feature(const BottleneckFit& fit, const Matrix& x) {
    Matrix z = numerics::apply_standardization(x, fit.x_std);
    for (Index l = 0; l < fit.phi_layers; ++l) {
        const Layer& layer = fit.model.layers[static_cast<std::size_t>(l)];
        z = apply_activation(Matrix((z * layer.w).rowwise() + layer.b), layer.activation);
    }
    return z.col(0);
}

AutoencoderFit fit_autoencoder(const Matrix& t, Index hidden, Activation hidden_activation,
                               Activation output_activation, const TrainConfig& config) {
    if (hidden >= t.cols()) {
        throw ValidationError("nnet::fit_autoencoder: hidden width must be below the input dimension");
    }
    Architecture arch;
    arch.hidden = {hidden};
    arch.hidden_activation = hidden_activation;
    arch.output_activation = output_activation;

    AutoencoderFit fit;
    TrainResult trained = train_sgd(config, t, t, arch);
    fit.model = std::move(trained.model);
    fit.train_loss = std::move(trained.train_loss);
    fit.train_mse = (forward(fit.model, t) - t).squaredNorm() /
                    static_cast<double>(t.rows() * t.cols());
    return fit;
}

MlpModel donut_classifier_model() {
    MlpModel model;
    Layer first;
    first.w = Matrix(2, 4);
    first.w << 1, -1, -1, 1,
               1, -1, 1, -1;
    first.b = Eigen::RowVectorXd::Zero(4);
    first.activation = Activation::Relu;

    Layer second;
    second.w = Matrix::Ones(4, 1);
    second.b = Eigen::RowVectorXd::Constant(1, -3.0);
    second.activation = Activation::Logistic;

    model.layers = {first, second};
    return model;
}

double donut_logit(const Vector& x) {
    if (x.size() != 2) throw ValidationError("donut_logit: input must have 2 components");
    const double z1 = std::max(x(0) + x(1), 0.0);
    const double z2 = std::max(-x(0) - x(1), 0.0);
    const double z3 = std::max(-x(0) + x(1), 0.0);
    const double z4 = std::max(x(0) - x(1), 0.0);
    return -3.0 + z1 + z2 + z3 + z4;
}

double donut_classifier_fixed(const Vector& x) {
    const double mu = donut_logit(x);
    return 1.0 / (1.0 + std::exp(-mu));
}

}  // namespace twocultures::nnet
