#include "twocultures/experiments.hpp"

#include "twocultures/brillinger.hpp"
#include "twocultures/nnet.hpp"
#include "twocultures/pipeline.hpp"
#include "twocultures/serialize.hpp"
#include "twocultures/shrinkage.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace twocultures::experiments {

namespace {

using nlohmann::json;

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

double override_double(const ExperimentSpec& spec, const std::string& key, double fallback) {
    const auto it = spec.overrides.find(key);
    return it == spec.overrides.end() ? fallback : std::stod(it->second);
}

Index override_index(const ExperimentSpec& spec, const std::string& key, Index fallback) {
    const auto it = spec.overrides.find(key);
    return it == spec.overrides.end() ? fallback : static_cast<Index>(std::stoll(it->second));
}

// Experiment-scoped shorthand for the shared artifact writer.
class CsvWriter : public ArtifactCsv {
public:
    CsvWriter(const ExperimentSpec& spec, const std::string& filename,
              const std::vector<std::string>& columns)
        : ArtifactCsv((std::filesystem::path(spec.output_dir) / filename).string(), spec.name,
                      spec.seed, columns) {}
};

json base_metrics(const ExperimentSpec& spec) {
    json j;
    j["tool_version"] = kToolVersion;
    j["experiment"] = spec.name;
    j["seed"] = spec.seed;
    j["timestamp"] = timestamp_utc();
    return j;
}

std::string write_metrics(const ExperimentSpec& spec, const json& metrics) {
    const std::string path = (std::filesystem::path(spec.output_dir) / "metrics.json").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("experiment: cannot open '" + path + "' for writing");
    out << metrics.dump(1) << "\n";
    if (!out) throw ValidationError("experiment: write to '" + path + "' failed");
    return path;
}

gp::FitOptions experiment_gp_options(std::uint64_t seed) {
    gp::FitOptions opts;
    opts.restarts = 2;
    opts.max_iters = 60;
    opts.seed = seed;
    return opts;
}

// --- linear-system -----------------------------------------------------------

ExperimentResult run_linear_system(const ExperimentSpec& spec) {
    const Index n = override_index(spec, "n", 500);
    const double noise_sd = override_double(spec, "noise_sd", 0.1);
    const Index rounds = override_index(spec, "rounds", 3);

    Rng rng = make_rng(spec.seed);
    Matrix x = gaussian_matrix(n, 3, rng);
    Matrix p_true = gaussian_matrix(3, 2, rng);
    Matrix y = x * p_true + gaussian_matrix(n, 2, rng, noise_sd);

    brillinger::LinearSystemResult result = brillinger::identify_linear_system(x, y, rounds);

    ExperimentResult out;
    json metrics = base_metrics(spec);
    metrics["rounds"] = result.rounds;
    metrics["noise_variance_injected"] = noise_sd * noise_sd;
    json per_round = json::array();
    for (Index k = 0; k <= result.rounds; ++k) {
        per_round.push_back({{"round", k},
                             {"residual_fraction", result.residual_fraction(k)},
                             {"residual_variance", result.residual_variance(k)}});
    }
    metrics["per_round"] = std::move(per_round);
    metrics["variance_captured_after_2"] = 1.0 - result.residual_fraction(std::min<Index>(2, result.rounds));

    CsvWriter rounds_csv(spec, "rounds.csv", {"round", "residual_fraction", "residual_variance"});
    for (Index k = 0; k <= result.rounds; ++k) {
        rounds_csv.row({static_cast<double>(k), result.residual_fraction(k),
                        result.residual_variance(k)});
    }

    const Matrix fitted = pls::predict(result.model, x);
    CsvWriter pred_csv(spec, "predictions.csv",
                       {"row", "y1", "y2", "fit1", "fit2"});
    for (Index i = 0; i < n; ++i) {
        pred_csv.row({static_cast<double>(i), y(i, 0), y(i, 1), fitted(i, 0), fitted(i, 1)});
    }

    // Per-round score/residual pairs, the plotting view of the extraction.
    const Matrix ys = numerics::apply_standardization(y, result.model.y_std);
    CsvWriter scores_csv(spec, "scores.csv", {"row", "t1", "t2", "resid1_after2", "resid2_after2"});
    Matrix resid = ys;
    for (Index k = 0; k < std::min<Index>(2, result.rounds); ++k) {
        const Vector t = result.model.T.col(k);
        resid -= t * (t.transpose() * resid / t.squaredNorm());
    }
    for (Index i = 0; i < n; ++i) {
        scores_csv.row({static_cast<double>(i), result.model.T(i, 0),
                        result.rounds > 1 ? result.model.T(i, 1) : 0.0, resid(i, 0), resid(i, 1)});
    }

    out.artifacts = {write_metrics(spec, metrics), rounds_csv.finish(), pred_csv.finish(),
                     scores_csv.finish()};
    out.metrics = std::move(metrics);
    return out;
}

// --- nonlinear-abs -----------------------------------------------------------

ExperimentResult run_nonlinear_abs(const ExperimentSpec& spec) {
    const Index n = override_index(spec, "n", 2000);
    brillinger::NonlinearRecovery rec = brillinger::recover_nonlinear_system(n, spec.seed);

    json metrics = base_metrics(spec);
    metrics["cosine"] = rec.cosine;
    metrics["pls_ols_cosine"] = rec.pls_ols_cosine;
    metrics["pls1_ols_cosine"] = rec.pls1_ols_cosine;
    metrics["k_scale"] = rec.k_scale;

    // Sorted by index value for direct plotting.
    std::vector<Index> order(static_cast<std::size_t>(rec.link_curve.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return rec.link_curve(a, 0) < rec.link_curve(b, 0); });

    CsvWriter link_csv(spec, "link_curve.csv", {"index_value", "y", "smoothed"});
    for (Index i : order) {
        link_csv.row({rec.link_curve(i, 0), rec.link_curve(i, 1), rec.link_curve(i, 2)});
    }
    CsvWriter pred_csv(spec, "predictions.csv", {"row", "index_value", "y", "smoothed"});
    for (Index i = 0; i < rec.link_curve.rows(); ++i) {
        pred_csv.row({static_cast<double>(i), rec.link_curve(i, 0), rec.link_curve(i, 1),
                      rec.link_curve(i, 2)});
    }

    ExperimentResult out;
    out.artifacts = {write_metrics(spec, metrics), link_csv.finish(), pred_csv.finish()};
    out.metrics = std::move(metrics);
    return out;
}

// --- ridge-bottleneck --------------------------------------------------------

ExperimentResult run_ridge_bottleneck(const ExperimentSpec& spec) {
    const Index n = override_index(spec, "n", 2000);
    const Index p = override_index(spec, "p", 100);
    const Index n_test = override_index(spec, "n_test", 2000);
    const double noise_sd = override_double(spec, "noise_sd", 0.01);
    const Index phi_width = override_index(spec, "phi_width", 0);  // 0 = affine feature map
    const Index f_width = override_index(spec, "f_width", 64);
    const Index epochs = override_index(spec, "epochs", 600);
    const double lr = override_double(spec, "learning_rate", 0.5);
    const Index attempts = override_index(spec, "attempts", 6);

    Rng rng = make_rng(spec.seed);
    const Vector u = random_unit_vector(p, rng);
    Matrix x = uniform_matrix(n, p, rng);
    Matrix x_test = uniform_matrix(n_test, p, rng);
    Vector y = (x * u).cwiseAbs() + gaussian_vector(n, rng, noise_sd);
    Vector y_test = (x_test * u).cwiseAbs() + gaussian_vector(n_test, rng, noise_sd);

    nnet::TrainConfig config;
    config.learning_rate = lr;
    config.epochs = static_cast<int>(epochs);
    config.batch_size = 32;
    nnet::BottleneckWidths widths;
    widths.phi_hidden = phi_width;
    widths.f_hidden = f_width;

    // The affine-bottleneck saddle occasionally traps plain SGD; restart on
    // the training loss, which separates the two outcomes by three orders of
    // magnitude.
    nnet::BottleneckFit fit;
    Index attempts_used = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    const Vector y_test_vec = y_test;
    for (Index attempt = 0; attempt < std::max<Index>(attempts, 1); ++attempt) {
        config.seed = spec.seed + 1000 * static_cast<std::uint64_t>(attempt);
        nnet::BottleneckFit candidate =
            nnet::fit_bottleneck(x, y, widths, config, &x_test, &y_test_vec);
        const double loss = candidate.train_loss(candidate.train_loss.size() - 1);
        if (loss < best_loss) {
            best_loss = loss;
            fit = std::move(candidate);
            attempts_used = attempt + 1;
        }
        if (best_loss <= 0.1) break;
    }

    const Vector pred = nnet::bottleneck_predict(fit, x_test).col(0);
    const double ss_res = (pred - y_test).squaredNorm();
    const double ss_tot = (y_test.array() - y_test.mean()).square().sum();
    const double r2 = 1.0 - ss_res / ss_tot;

    const Vector phi = nnet::bottleneck_feature(fit, x_test);
    const Vector index = x_test * u;
    const double rho = pipeline::spearman(phi, index);

    json metrics = base_metrics(spec);
    metrics["r2_test"] = r2;
    metrics["spearman_phi_index"] = rho;
    metrics["n_train"] = n;
    metrics["n_test"] = n_test;
    metrics["final_train_loss"] = fit.train_loss(fit.train_loss.size() - 1);
    metrics["training_attempts"] = attempts_used;

    CsvWriter trace_csv(spec, "loss_trace.csv", {"epoch", "train_loss", "holdout_loss"});
    for (Index e = 0; e < fit.train_loss.size(); ++e) {
        trace_csv.row({static_cast<double>(e + 1), fit.train_loss(e), fit.holdout_loss(e)});
    }
    CsvWriter scatter_csv(spec, "feature_scatter.csv", {"x0", "y", "phi", "prediction"});
    for (Index i = 0; i < n_test; ++i) {
        scatter_csv.row({x_test(i, 0), y_test(i), phi(i), pred(i)});
    }
    CsvWriter pred_csv(spec, "predictions.csv", {"row", "y_true", "y_pred"});
    for (Index i = 0; i < n_test; ++i) {
        pred_csv.row({static_cast<double>(i), y_test(i), pred(i)});
    }

    ExperimentResult out;
    out.artifacts = {write_metrics(spec, metrics), trace_csv.finish(), scatter_csv.finish(),
                     pred_csv.finish()};
    out.metrics = std::move(metrics);
    return out;
}

// --- donut -------------------------------------------------------------------

ExperimentResult run_donut(const ExperimentSpec& spec) {
    const Index per_class = override_index(spec, "per_class", 500);
    DonutData data = make_donut_data(per_class, spec.seed);

    Index correct = 0;
    Vector prob(data.x.rows());
    for (Index i = 0; i < data.x.rows(); ++i) {
        prob(i) = nnet::donut_classifier_fixed(data.x.row(i).transpose());
        if ((prob(i) >= 0.5 ? 1.0 : 0.0) == data.label(i)) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(data.x.rows());

    // Analytic boundary points: the square where the relu sum equals 3.
    double boundary_max_abs_mu = 0.0;
    CsvWriter boundary_csv(spec, "boundary.csv", {"x1", "x2", "mu", "p"});
    for (int k = 0; k < 100; ++k) {
        const double t = -1.5 + 3.0 * static_cast<double>(k) / 99.0;
        Vector pt(2);
        switch (k % 4) {
            case 0: pt << 1.5, t; break;
            case 1: pt << -1.5, t; break;
            case 2: pt << t, 1.5; break;
            default: pt << t, -1.5; break;
        }
        const double mu = nnet::donut_logit(pt);
        boundary_max_abs_mu = std::max(boundary_max_abs_mu, std::abs(mu));
        boundary_csv.row({pt(0), pt(1), mu, nnet::donut_classifier_fixed(pt)});
    }

    CsvWriter grid_csv(spec, "probability_grid.csv", {"x1", "x2", "p"});
    for (int i = 0; i <= 80; ++i) {
        for (int j = 0; j <= 80; ++j) {
            Vector pt(2);
            pt << -4.0 + 8.0 * i / 80.0, -4.0 + 8.0 * j / 80.0;
            grid_csv.row({pt(0), pt(1), nnet::donut_classifier_fixed(pt)});
        }
    }

    CsvWriter pred_csv(spec, "predictions.csv", {"row", "x1", "x2", "label", "p"});
    for (Index i = 0; i < data.x.rows(); ++i) {
        pred_csv.row({static_cast<double>(i), data.x(i, 0), data.x(i, 1), data.label(i), prob(i)});
    }

    json metrics = base_metrics(spec);
    metrics["accuracy"] = accuracy;
    metrics["boundary_max_abs_mu"] = boundary_max_abs_mu;
    metrics["n"] = data.x.rows();

    ExperimentResult out;
    out.artifacts = {write_metrics(spec, metrics), boundary_csv.finish(), grid_csv.finish(),
                     pred_csv.finish()};
    out.metrics = std::move(metrics);
    return out;
}

// --- shrinkage-demo ----------------------------------------------------------

ExperimentResult run_shrinkage_demo(const ExperimentSpec& spec) {
    const Index n = override_index(spec, "n", 300);
    const Index p = override_index(spec, "p", 6);

    // Correlated inputs with the response loading mostly on the weakest
    // eigendirection: the setting where supervised shrinkage expands.
    Rng rng = make_rng(spec.seed);
    Matrix z = gaussian_matrix(n, p, rng);
    Matrix mix = Matrix::Identity(p, p);
    mix.array() += 0.55;
    Matrix x = z * mix;

    Vector probe = gaussian_vector(n, rng);
    shrinkage::SpectralBasis probe_basis = shrinkage::spectral_basis(x, probe);
    auto [xs, x_std] = numerics::standardize(x);
    Vector y = xs * (probe_basis.V.col(p - 1) + 0.05 * probe_basis.V.col(0));
    y += gaussian_vector(n, rng, 0.02);

    const double lambda = override_double(spec, "lambda", probe_basis.e2(p / 2));
    const Index pcr_l = override_index(spec, "pcr_components", p / 2);
    const Index pls_k = override_index(spec, "pls_components", 1);

    shrinkage::ShrinkageProfile rr = shrinkage::shrinkage_profile(shrinkage::Method::Ridge, x, y, lambda);
    shrinkage::ShrinkageProfile pcr =
        shrinkage::shrinkage_profile(shrinkage::Method::Pcr, x, y, static_cast<double>(pcr_l));
    shrinkage::ShrinkageProfile pls =
        shrinkage::shrinkage_profile(shrinkage::Method::Pls, x, y, static_cast<double>(pls_k));
    shrinkage::ExpansionDiagnostic diag = shrinkage::expansion_diagnostic(pls);

    CsvWriter table_csv(spec, "diagnostic_table.csv",
                        {"j", "e2_j", "alpha_j", "f_RR", "f_PCR", "f_PLS", "expanded_flag"});
    for (Index j = 0; j < p; ++j) {
        const bool expanded = std::find(diag.expanded_indices.begin(), diag.expanded_indices.end(),
                                        j) != diag.expanded_indices.end();
        table_csv.row({static_cast<double>(j), rr.basis.e2(j), rr.basis.alpha_hat(j), rr.f(j),
                       pcr.f(j), pls.f(j), expanded ? 1.0 : 0.0});
    }

    const Vector fitted_ols = xs * rr.basis.beta_ols;
    const Vector fitted_rr = xs * rr.beta;
    const Vector fitted_pcr = xs * pcr.beta;
    const Vector fitted_pls = xs * pls.beta;
    CsvWriter pred_csv(spec, "predictions.csv",
                       {"row", "y", "fit_ols", "fit_rr", "fit_pcr", "fit_pls"});
    for (Index i = 0; i < n; ++i) {
        pred_csv.row({static_cast<double>(i), y(i), fitted_ols(i), fitted_rr(i), fitted_pcr(i),
                      fitted_pls(i)});
    }

    json metrics = base_metrics(spec);
    metrics["lambda"] = lambda;
    metrics["pcr_components"] = pcr_l;
    metrics["pls_components"] = pls_k;
    metrics["expanded_directions"] = diag.expanded_indices.size();
    metrics["max_f_pls"] = diag.magnitudes.size() > 0 ? diag.magnitudes.maxCoeff() : 0.0;

    ExperimentResult out;
    out.artifacts = {write_metrics(spec, metrics), table_csv.finish(), pred_csv.finish()};
    out.metrics = std::move(metrics);
    return out;
}

// --- marthe ------------------------------------------------------------------

struct NamedModel {
    std::string name;
    pipeline::CompositeModel model;
};

ExperimentResult run_marthe(const ExperimentSpec& spec) {
    if (spec.data_path.empty()) {
        throw ValidationError(
            "marthe: no dataset bundled; pass --data <csv> with a header row, 20 numeric input "
            "columns and one target column (inputs default to all but the last column)");
    }
    io::Dataset data = io::load_csv(spec.data_path, {}, {});
    if (data.y.cols() != 1) throw ValidationError("marthe: expected a single target column");

    Vector y_raw = data.y.col(0);
    if (spec.log_target) {
        if ((y_raw.array() <= 0.0).any()) {
            throw ValidationError("marthe: --log-target requires strictly positive targets");
        }
        y_raw = y_raw.array().log();
    }

    Split split = make_split(data.x.rows(), spec.train_frac, spec.split_seed);
    const Matrix x_train = take_rows(data.x, split.train);
    const Matrix x_test = take_rows(data.x, split.test);
    const Matrix y_train = take_rows(Matrix(y_raw), split.train);
    const Matrix y_test_t = take_rows(Matrix(y_raw), split.test);

    const Index pls_components =
        std::min(override_index(spec, "pls_components", 14), std::min(x_train.rows() - 1, x_train.cols()));
    const Index dl_components = std::min(override_index(spec, "dl_components", 10), x_train.cols());
    const Index width = override_index(spec, "width", 24);
    const Index epochs = override_index(spec, "epochs", 1500);

    nnet::TrainConfig nn_config;
    nn_config.learning_rate = override_double(spec, "learning_rate", 0.1);
    nn_config.epochs = static_cast<int>(epochs);
    nn_config.batch_size = 32;
    nn_config.seed = spec.seed;

    std::vector<NamedModel> models;
    models.push_back({"plain_gp", pipeline::fit_plain_gp(x_train, y_train,
                                                         experiment_gp_options(spec.seed))});
    models.push_back({"pls_gp", pipeline::fit_pls_gp(x_train, y_train, pls_components,
                                                     experiment_gp_options(spec.seed + 1))});
    const bool dl_affine = override_index(spec, "dl_affine", 1) != 0;
    models.push_back({"dl_gp",
                      pipeline::fit_dl_gp(x_train, y_train, dl_components, width, nn_config,
                                          experiment_gp_options(spec.seed + 2), dl_affine)});

    json metrics = base_metrics(spec);
    metrics["n_train"] = x_train.rows();
    metrics["n_test"] = x_test.rows();
    metrics["pls_components"] = pls_components;
    metrics["dl_components"] = dl_components;
    metrics["log_target"] = spec.log_target;
    metrics["published_reference"] = {{"plain_gp", {{"rmse", 4.5}, {"mape", 0.8}}},
                                  {"pls_gp", {{"rmse", 1.6}, {"mape", 0.73}}},
                                  {"dl_gp", {{"rmse", 0.89}, {"mape", 0.16}}}};

    std::vector<pipeline::PredictiveDistribution> preds;
    json model_metrics = json::array();
    for (const NamedModel& m : models) {
        pipeline::PredictiveDistribution pred = pipeline::predict(m.model, x_test);
        if (spec.log_target) {
            pred.mean = pred.mean.array().exp();
            pred.sd = Matrix::Zero(pred.mean.rows(), pred.mean.cols());
        }
        const Matrix truth = spec.log_target ? Matrix(y_test_t.array().exp()) : y_test_t;
        pipeline::Metrics mm = pipeline::metrics(truth, pred.mean);
        model_metrics.push_back({{"name", m.name},
                                 {"rmse", mm.rmse},
                                 {"mape", mm.mape},
                                 {"mape_excluded", mm.mape_excluded},
                                 {"n_train", x_train.rows()},
                                 {"n_test", x_test.rows()}});
        preds.push_back(std::move(pred));
    }
    metrics["models"] = std::move(model_metrics);

    CsvWriter pred_csv(spec, "predictions.csv",
                       {"row", "y_true", "plain_gp_mean", "plain_gp_sd", "pls_gp_mean",
                        "pls_gp_sd", "dl_gp_mean", "dl_gp_sd"});
    const Matrix truth = spec.log_target ? Matrix(y_test_t.array().exp()) : y_test_t;
    for (Index i = 0; i < x_test.rows(); ++i) {
        pred_csv.row({static_cast<double>(split.test[static_cast<std::size_t>(i)]), truth(i, 0),
                      preds[0].mean(i, 0), preds[0].sd(i, 0), preds[1].mean(i, 0),
                      preds[1].sd(i, 0), preds[2].mean(i, 0), preds[2].sd(i, 0)});
    }

    ExperimentResult out;
    out.artifacts = {write_metrics(spec, metrics), pred_csv.finish()};
    out.metrics = std::move(metrics);
    return out;
}

}  // namespace

std::string format17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

ArtifactCsv::ArtifactCsv(const std::string& path, const std::string& context, std::uint64_t seed,
                         const std::vector<std::string>& columns)
    : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("artifact: cannot open '" + path_ + "' for writing");
    out_ << "# tool_version: " << kToolVersion << "\n";
    out_ << "# experiment: " << context << "\n";
    out_ << "# seed: " << seed << "\n";
    out_ << "# timestamp: " << timestamp_utc() << "\n";
    for (std::size_t j = 0; j < columns.size(); ++j)
        out_ << columns[j] << (j + 1 < columns.size() ? "," : "\n");
}

void ArtifactCsv::row(const std::vector<double>& values) {
    for (std::size_t j = 0; j < values.size(); ++j)
        out_ << format17(values[j]) << (j + 1 < values.size() ? "," : "\n");
}

std::string ArtifactCsv::finish() {
    out_.flush();
    if (!out_) throw ValidationError("artifact: write to '" + path_ + "' failed");
    return path_;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"linear-system",    "nonlinear-abs",
                                                   "ridge-bottleneck", "donut",
                                                   "shrinkage-demo",   "marthe"};
    return names;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    std::filesystem::create_directories(spec.output_dir);
    if (spec.name == "linear-system") return run_linear_system(spec);
    if (spec.name == "nonlinear-abs") return run_nonlinear_abs(spec);
    if (spec.name == "ridge-bottleneck") return run_ridge_bottleneck(spec);
    if (spec.name == "donut") return run_donut(spec);
    if (spec.name == "shrinkage-demo") return run_shrinkage_demo(spec);
    if (spec.name == "marthe") return run_marthe(spec);
    throw ValidationError("unknown experiment '" + spec.name + "'; choose one of: linear-system, "
                          "nonlinear-abs, ridge-bottleneck, donut, shrinkage-demo, marthe");
}

MartheSynthetic make_marthe_synthetic(Index n, Index p, std::uint64_t seed) {
    if (p < 3) throw ValidationError("make_marthe_synthetic: need at least 3 input dimensions");
    Rng rng = make_rng(seed);

    // Three orthonormal active directions, deliberately not axis-aligned.
    Matrix raw = gaussian_matrix(p, 3, rng);
    Eigen::HouseholderQR<Matrix> qr(raw);
    Matrix active = qr.householderQ() * Matrix::Identity(p, 3);

    MartheSynthetic data;
    data.x = uniform_matrix(n, p, rng, -2.0, 2.0);
    const Vector v1 = data.x * active.col(0);
    const Vector v2 = data.x * active.col(1);
    const Vector v3 = data.x * active.col(2);
    // Linear signal on three rotated directions plus a high-frequency ridge
    // along the first: axis-aligned lengthscales cannot follow the diagonal
    // wiggle, while a covariance-aligned rotation turns it one-dimensional.
    data.y = (v1.array() + 0.35 * v2.array() + 0.25 * v3.array() +
              1.2 * (1.3 * v1.array()).sin())
                 .matrix() +
             gaussian_vector(n, rng, 0.1);
    return data;
}

DonutData make_donut_data(Index per_class, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    DonutData data;
    data.x = Matrix(2 * per_class, 2);
    data.label = Vector(2 * per_class);
    for (Index i = 0; i < per_class; ++i) {  // inner disk, radius <= 1.4
        const double r = 1.4 * std::sqrt(unif(rng));
        const double theta = 2.0 * M_PI * unif(rng);
        data.x(i, 0) = r * std::cos(theta);
        data.x(i, 1) = r * std::sin(theta);
        data.label(i) = 0.0;
    }
    for (Index i = 0; i < per_class; ++i) {  // annulus, radius in [2.2, 3.0]
        const double r = std::sqrt(2.2 * 2.2 + (3.0 * 3.0 - 2.2 * 2.2) * unif(rng));
        const double theta = 2.0 * M_PI * unif(rng);
        data.x(per_class + i, 0) = r * std::cos(theta);
        data.x(per_class + i, 1) = r * std::sin(theta);
        data.label(per_class + i) = 1.0;
    }
    return data;
}

Split make_split(Index n, double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw ValidationError("make_split: train fraction must lie in (0, 1)");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const Index n_train = std::max<Index>(1, static_cast<Index>(train_frac * static_cast<double>(n)));
    Split split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.test.assign(order.begin() + n_train, order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    if (split.test.empty()) throw ValidationError("make_split: empty test set");
    return split;
}

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

}  // namespace twocultures::experiments
