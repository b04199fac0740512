#pragma once

#include "twocultures/gp.hpp"
#include "twocultures/nnet.hpp"
#include "twocultures/numerics.hpp"
#include "twocultures/pls.hpp"

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace twocultures::pipeline {

struct PredictiveDistribution {
    Matrix mean;  // m x q
    Matrix sd;    // m x q, zero for deterministic heads

    Matrix band95_low() const { return mean - 1.96 * sd; }
    Matrix band95_high() const { return mean + 1.96 * sd; }
};

// --- transform stage -------------------------------------------------------

struct PlsTransform {
    pls::PlsModel model;
};

struct BottleneckTransform {
    nnet::MlpModel network;   // full network; the first `feature_layers` form the map
    Index feature_layers = 2;
    Index out_dim = 0;
    numerics::StandardizationParams x_std;
};

struct PcaTransform {
    Matrix basis;  // p x k eigenvector columns
    numerics::StandardizationParams x_std;
};

struct IdentityTransform {
    numerics::StandardizationParams x_std;
};

using Transform = std::variant<PlsTransform, BottleneckTransform, PcaTransform, IdentityTransform>;

Matrix apply_transform(const Transform& transform, const Matrix& x_new);
Index transform_dim(const Transform& transform);

// --- probabilistic heads ----------------------------------------------------

// GP over standardized targets; offset/scale restore the raw target.
struct GpHead {
    gp::GpModel model;
    double offset = 0.0;
    double scale = 1.0;
};

struct MlpHead {
    nnet::MlpModel model;
};

struct LinearHead {
    Matrix coef;                // in x out
    Eigen::RowVectorXd intercept;
};

// Stands in for a head whose back-projection weight is numerically zero;
// never fitted, predicts zero with zero variance.
struct ZeroHead {};

using Head = std::variant<GpHead, MlpHead, LinearHead, ZeroHead>;

Index head_output_dim(const Head& head);

// --- composite --------------------------------------------------------------

struct CompositeModel {
    Transform transform;
    std::vector<Head> heads;
    Matrix back_projection;  // total head outputs x q
    numerics::StandardizationParams y_std;
};

PredictiveDistribution predict(const CompositeModel& model, const Matrix& x_new);

// PLS scores feeding one GP per y-score column; the back-projection is the
// least-squares map from the y-scores back to the standardized outputs, so a
// univariate response reduces to a single GP on the score features.
CompositeModel fit_pls_gp(const Matrix& x, const Matrix& y, Index components,
                          const gp::FitOptions& gp_options = {});

// Bottleneck network trained on the response, frozen, with GPs per output on
// the reduced features. With `affine_features` the reduction layer maps the
// inputs directly (learned linear features); otherwise a relu layer precedes
// the bottleneck.
CompositeModel fit_dl_gp(const Matrix& x, const Matrix& y, Index reduced_dim, Index hidden_width,
                         const nnet::TrainConfig& nn_config, const gp::FitOptions& gp_options = {},
                         bool affine_features = false);

// PLS scores with a network mapping T to U; hidden widths may be empty for a
// purely linear inner map.
CompositeModel fit_dl_pls(const Matrix& x, const Matrix& y, Index components,
                          const std::vector<Index>& hidden, const nnet::TrainConfig& nn_config);

struct DlPlsAutoencoderFit {
    CompositeModel model;
    double score_reconstruction_mse = 0.0;
};

// Autoencoder-shaped inner map (narrow hidden layer between the score spaces).
DlPlsAutoencoderFit fit_dl_pls_autoencoder(const Matrix& x, const Matrix& y, Index components,
                                           Index hidden, const nnet::TrainConfig& nn_config);

// Output-side reduction: GP per leading output-basis weight series.
CompositeModel fit_pca_gp(const Matrix& x, const Matrix& y, Index k,
                          const gp::FitOptions& gp_options = {});

// GPs per output on the standardized raw inputs.
CompositeModel fit_plain_gp(const Matrix& x, const Matrix& y,
                            const gp::FitOptions& gp_options = {});

// --- ensembling, metrics, model selection -----------------------------------

using Predictor = std::function<PredictiveDistribution(const Matrix&)>;

// Equal-weight mixture: mean of means; variance adds the spread of the means
// to the mean of the variances.
PredictiveDistribution ensemble_average(const std::vector<Predictor>& members, const Matrix& x_new);

struct Metrics {
    double rmse = 0.0;
    double mape = 0.0;
    Index mape_excluded = 0;  // rows with |y| <= 1e-12 skipped by MAPE
};

Metrics metrics(const Matrix& y_true, const Matrix& y_pred);

double spearman(const Vector& a, const Vector& b);

// Builder returns predictions for the held-out block under one grid setting.
using PipelineBuilder = std::function<Matrix(const Matrix& x_train, const Matrix& y_train,
                                             const Matrix& x_test, double config)>;

struct PipelineCv {
    std::size_t best_index = 0;   // smallest config within one SE of the minimum
    double best_config = 0.0;
    Vector cv_rmse;               // per grid entry
    Vector cv_se;
};

PipelineCv cross_validate_pipeline(const PipelineBuilder& builder, const Matrix& x,
                                   const Matrix& y, const std::vector<double>& grid, int folds,
                                   std::uint64_t seed);

}  // namespace twocultures::pipeline
