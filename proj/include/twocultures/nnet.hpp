#pragma once

#include "twocultures/numerics.hpp"
#include "twocultures/rng.hpp"

#include <cstdint>
#include <vector>

namespace twocultures::nnet {

enum class Activation { Relu, Tanh, Identity, Logistic };
enum class Loss { Mse, BinaryCrossEntropy };

// One semi-affine layer: out = act(in * w + b). `input_keep` rescales the
// layer input at inference after dropout training.
struct Layer {
    Matrix w;               // in x out
    Eigen::RowVectorXd b;   // 1 x out
    Activation activation = Activation::Identity;
    double input_keep = 1.0;
};

struct MlpModel {
    std::vector<Layer> layers;

    Index input_dim() const { return layers.empty() ? 0 : layers.front().w.rows(); }
    Index output_dim() const { return layers.empty() ? 0 : layers.back().w.cols(); }
};

struct Architecture {
    std::vector<Index> hidden;
    Activation hidden_activation = Activation::Relu;
    Activation output_activation = Activation::Identity;
    // Per-layer override; when non-empty it must match hidden.size().
    std::vector<Activation> hidden_activations;
};

struct TrainConfig {
    double learning_rate = 1e-2;  // decays as 1/sqrt(epoch)
    int epochs = 200;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double dropout_keep = 1.0;
    Loss loss = Loss::Mse;
};

struct TrainResult {
    MlpModel model;
    Vector train_loss;    // per-epoch mean loss
    Vector holdout_loss;  // per-epoch holdout loss when holdout data given, else empty
};

// Bottleneck predictor: phi squeezes the input to one dimension, f maps the
// scalar feature to the response. Standardization is handled internally.
struct BottleneckFit {
    MlpModel model;              // full network on standardized data
    Index phi_layers = 2;        // first layers forming the feature map
    numerics::StandardizationParams x_std, y_std;
    Vector train_loss;
    Vector holdout_loss;  // per epoch when holdout data was supplied
};

struct BottleneckWidths {
    Index phi_hidden = 64;
    Index bottleneck = 1;
    Index f_hidden = 64;
};

struct AutoencoderFit {
    MlpModel model;
    double train_mse = 0.0;
    Vector train_loss;
};

Matrix forward(const MlpModel& model, const Matrix& x);
Vector forward(const MlpModel& model, const Vector& x);

MlpModel init_mlp(const Architecture& arch, Index input_dim, Index output_dim, Rng& rng);

TrainResult train_sgd(const TrainConfig& config, const Matrix& x, const Matrix& y,
                      const Architecture& arch, const Matrix* x_holdout = nullptr,
                      const Matrix* y_holdout = nullptr);

// Dropout training: one Bernoulli(keep) mask per minibatch and layer input;
// the returned model rescales layer inputs by the keep rate at inference.
TrainResult train_dropout(const TrainConfig& config, const Matrix& x, const Matrix& y,
                          const Architecture& arch);

// Max relative disagreement between backprop and central finite differences.
double gradient_check(const MlpModel& model, const Vector& x, const Vector& y, Loss loss);

BottleneckFit fit_bottleneck(const Matrix& x, const Vector& y, const BottleneckWidths& widths,
                             const TrainConfig& config, const Matrix* x_holdout = nullptr,
                             const Vector* y_holdout = nullptr);

Matrix bottleneck_predict(const BottleneckFit& fit, const Matrix& x);
Vector bottleneck_feature(const BottleneckFit& fit, const Matrix& x);

AutoencoderFit fit_autoencoder(const Matrix& t, Index hidden, Activation hidden_activation,
                               Activation output_activation, const TrainConfig& config);

// Fixed-weight two-layer classifier separating a disk from a surrounding
// annulus; the decision boundary is the square max(|x1|,|x2|) = 3/2.
MlpModel donut_classifier_model();
double donut_logit(const Vector& x);
double donut_classifier_fixed(const Vector& x);

}  // namespace twocultures::nnet
