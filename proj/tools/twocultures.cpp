#include "twocultures/brillinger.hpp"
#include "twocultures/dataset.hpp"
#include "twocultures/experiments.hpp"
#include "twocultures/pipeline.hpp"
#include "twocultures/serialize.hpp"
#include "twocultures/shrinkage.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using namespace twocultures;
namespace tx = twocultures::experiments;

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> names;
    std::stringstream stream(csv);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) names.push_back(item);
    }
    return names;
}

struct CommonArgs {
    std::uint64_t seed = 1;
    std::string output_dir = ".";
};

std::string out_path(const CommonArgs& common, const std::string& filename) {
    std::filesystem::create_directories(common.output_dir);
    return (std::filesystem::path(common.output_dir) / filename).string();
}

int cmd_fit(const CommonArgs& common, const std::string& model_kind, const std::string& data_path,
            const std::string& inputs, const std::string& outputs, Index components,
            int restarts, const std::string& model_out, bool with_scores) {
    io::Dataset data = io::load_csv(data_path, split_names(inputs), split_names(outputs));

    nlohmann::json model_json;
    if (model_kind == "pls") {
        model_json = io::to_json(pls::fit(data.x, data.y, components), with_scores);
    } else if (model_kind == "gp") {
        if (data.y.cols() != 1) throw ValidationError("fit gp: needs a single output column");
        auto [ys, y_std] = numerics::standardize(data.y);
        gp::FitOptions opts;
        opts.seed = common.seed;
        opts.restarts = restarts;
        // Standardized-target convention: callers de-standardize externally,
        // so the composite wrapper below is the more convenient artifact.
        gp::GpModel model = gp::fit_gp(data.x, ys.col(0), opts);
        model_json = io::to_json(model);
        model_json["y_std"] = io::to_json(y_std);
    } else if (model_kind == "pls-gp") {
        gp::FitOptions opts;
        opts.seed = common.seed;
        opts.restarts = restarts;
        model_json = io::to_json(pipeline::fit_pls_gp(data.x, data.y, components, opts));
    } else {
        throw ValidationError("fit: unknown model kind '" + model_kind +
                              "' (choose pls, gp, or pls-gp)");
    }
    const std::string path = out_path(common, model_out);
    io::save_model(path, model_json);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_predict(const CommonArgs& common, const std::string& model_path,
                const std::string& data_path, const std::string& inputs,
                const std::string& outputs, const std::string& pred_out) {
    const nlohmann::json j = io::load_model(model_path);
    const std::string kind = j.value("kind", "");

    const std::vector<std::string> output_names = split_names(outputs);
    io::Dataset data;
    if (output_names.empty()) {
        io::TabularFile table = io::read_csv(data_path);
        data.x = table.values;
        data.input_names = table.columns;
        const std::vector<std::string> input_names = split_names(inputs);
        if (!input_names.empty()) {
            data = io::split_columns(table, input_names, {input_names.front()});
            data.y = Matrix(0, 0);  // inputs only
        }
    } else {
        data = io::load_csv(data_path, split_names(inputs), output_names);
    }

    Matrix mean, sd;
    if (kind == "pls") {
        pls::PlsModel model = io::pls_from_json(j);
        mean = pls::predict(model, data.x);
        sd = Matrix::Zero(mean.rows(), mean.cols());
    } else if (kind == "gp") {
        gp::GpModel model = io::gp_from_json(j);
        gp::GpPrediction pred = gp::predict(model, data.x);
        numerics::StandardizationParams y_std = io::standardization_from_json(j.at("y_std"));
        mean = numerics::invert_standardization(Matrix(pred.mean), y_std);
        sd = Matrix(pred.var.cwiseSqrt() * y_std.sds(0));
    } else if (kind == "composite") {
        pipeline::CompositeModel model = io::composite_from_json(j);
        pipeline::PredictiveDistribution pred = pipeline::predict(model, data.x);
        mean = pred.mean;
        sd = pred.sd;
    } else {
        throw ValidationError("predict: unsupported model kind '" + kind + "'");
    }

    std::vector<std::string> columns = {"row"};
    const bool with_truth = data.y.size() > 0;
    if (with_truth) {
        for (const std::string& name : data.output_names) columns.push_back("true_" + name);
    }
    for (Index q = 0; q < mean.cols(); ++q) columns.push_back("pred_" + std::to_string(q));
    for (Index q = 0; q < sd.cols(); ++q) columns.push_back("sd_" + std::to_string(q));

    const std::string path = out_path(common, pred_out);
    tx::ArtifactCsv csv(path, "predict", common.seed, columns);
    for (Index i = 0; i < mean.rows(); ++i) {
        std::vector<double> row = {static_cast<double>(i)};
        if (with_truth) {
            for (Index q = 0; q < data.y.cols(); ++q) row.push_back(data.y(i, q));
        }
        for (Index q = 0; q < mean.cols(); ++q) row.push_back(mean(i, q));
        for (Index q = 0; q < sd.cols(); ++q) row.push_back(sd(i, q));
        csv.row(row);
    }
    std::cout << "wrote " << csv.finish() << "\n";

    if (with_truth) {
        pipeline::Metrics m = pipeline::metrics(data.y, mean);
        std::cout << "rmse " << m.rmse << "  mape " << m.mape << " (" << m.mape_excluded
                  << " zero-target rows excluded)\n";
    }
    return 0;
}

int cmd_cv(const CommonArgs& common, const std::string& data_path, const std::string& inputs,
           const std::string& outputs, Index l_max, int folds, const std::string& table_out) {
    io::Dataset data = io::load_csv(data_path, split_names(inputs), split_names(outputs));
    pls::CvSelection sel = pls::cv_select_components(data.x, data.y, l_max, folds, common.seed);

    const std::string path = out_path(common, table_out);
    tx::ArtifactCsv csv(path, "cv", common.seed, {"L", "cv_mse", "cv_se"});
    for (Index l = 0; l < sel.cv_mse.size(); ++l) {
        csv.row({static_cast<double>(l + 1), sel.cv_mse(l), sel.cv_se(l)});
    }
    std::cout << "wrote " << csv.finish() << "\n";
    std::cout << "selected L = " << sel.best_L << " (strict argmin " << sel.argmin_L << ")\n";
    return 0;
}

int cmd_diagnose(const CommonArgs& common, const std::string& data_path,
                 const std::string& inputs, const std::string& outputs, double lambda,
                 Index pcr_components, Index pls_components, const std::string& table_out) {
    io::Dataset data = io::load_csv(data_path, split_names(inputs), split_names(outputs));
    if (data.y.cols() != 1) throw ValidationError("diagnose: needs a single output column");
    const Vector y = data.y.col(0);

    shrinkage::ShrinkageProfile rr =
        shrinkage::shrinkage_profile(shrinkage::Method::Ridge, data.x, y, lambda);
    shrinkage::ShrinkageProfile pcr = shrinkage::shrinkage_profile(
        shrinkage::Method::Pcr, data.x, y, static_cast<double>(pcr_components));
    shrinkage::ShrinkageProfile pls_prof = shrinkage::shrinkage_profile(
        shrinkage::Method::Pls, data.x, y, static_cast<double>(pls_components));
    shrinkage::ExpansionDiagnostic diag = shrinkage::expansion_diagnostic(pls_prof);

    const std::string path = out_path(common, table_out);
    tx::ArtifactCsv csv(path, "diagnose", common.seed,
                        {"j", "e2_j", "alpha_j", "f_RR", "f_PCR", "f_PLS", "expanded_flag"});
    for (Index jdx = 0; jdx < data.x.cols(); ++jdx) {
        const bool expanded = std::find(diag.expanded_indices.begin(), diag.expanded_indices.end(),
                                        jdx) != diag.expanded_indices.end();
        csv.row({static_cast<double>(jdx), rr.basis.e2(jdx), rr.basis.alpha_hat(jdx), rr.f(jdx),
                 pcr.f(jdx), pls_prof.f(jdx), expanded ? 1.0 : 0.0});
    }
    std::cout << "wrote " << csv.finish() << "\n";
    std::cout << diag.expanded_indices.size() << " expanded direction(s)\n";
    return 0;
}

int cmd_run(const CommonArgs& common, const std::string& experiment, const std::string& data_path,
            std::uint64_t split_seed, double train_frac, bool log_target,
            const std::vector<std::string>& override_kv) {
    tx::ExperimentSpec spec;
    spec.name = experiment;
    spec.seed = common.seed;
    spec.output_dir = common.output_dir;
    spec.data_path = data_path;
    spec.split_seed = split_seed;
    spec.train_frac = train_frac;
    spec.log_target = log_target;
    for (const std::string& kv : override_kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("run: override '" + kv + "' is not of the form key=value");
        }
        spec.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }

    tx::ExperimentResult result = tx::run_experiment(spec);
    for (const std::string& artifact : result.artifacts) std::cout << "wrote " << artifact << "\n";

    if (experiment == "marthe") {
        std::cout << "\n            rmse        mape   (published reference rmse/mape)\n";
        const auto& ref = result.metrics.at("published_reference");
        for (const auto& m : result.metrics.at("models")) {
            const std::string name = m.at("name").get<std::string>();
            std::printf("%-10s %8.4g  %8.4g   (%.4g / %.4g)\n", name.c_str(),
                        m.at("rmse").get<double>(), m.at("mape").get<double>(),
                        ref.at(name).at("rmse").get<double>(), ref.at(name).at("mape").get<double>());
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dimension-reducing transforms composed with probabilistic output heads"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--seed", common.seed, "Base random seed")->capture_default_str();
    app.add_option("--output-dir", common.output_dir, "Directory for artifacts")
        ->capture_default_str();
    app.fallthrough();

    std::string data_path, inputs, outputs;
    std::string model_kind = "pls", model_out = "model.json", model_path;
    std::string pred_out = "predictions.csv", table_out = "cv_table.csv";
    std::string diag_out = "diagnostic_table.csv";
    Index components = 2, l_max = 5, pcr_components = 1, pls_components = 1;
    int folds = 5, restarts = 3;
    double lambda = 0.1;
    bool with_scores = false;

    auto* fit = app.add_subcommand("fit", "Fit a model and save it as JSON");
    fit->add_option("--data", data_path, "Input CSV")->required();
    fit->add_option("--inputs", inputs, "Comma-separated input columns (default: all but last)");
    fit->add_option("--outputs", outputs, "Comma-separated output columns (default: last)");
    fit->add_option("--model", model_kind, "pls | gp | pls-gp")->capture_default_str();
    fit->add_option("--components", components, "PLS component count")->capture_default_str();
    fit->add_option("--restarts", restarts, "GP optimizer restarts")->capture_default_str();
    fit->add_option("--out", model_out, "Model file name")->capture_default_str();
    fit->add_flag("--with-scores", with_scores, "Include training scores in PLS JSON");

    auto* predict = app.add_subcommand("predict", "Predict with a saved model");
    predict->add_option("--model-file", model_path, "Model JSON")->required();
    predict->add_option("--data", data_path, "Input CSV")->required();
    predict->add_option("--inputs", inputs, "Comma-separated input columns");
    predict->add_option("--outputs", outputs, "Optional truth columns for metrics");
    predict->add_option("--out", pred_out, "Predictions file name")->capture_default_str();

    auto* cv = app.add_subcommand("cv", "Cross-validate the PLS component count");
    cv->add_option("--data", data_path, "Input CSV")->required();
    cv->add_option("--inputs", inputs, "Comma-separated input columns");
    cv->add_option("--outputs", outputs, "Comma-separated output columns");
    cv->add_option("--lmax", l_max, "Largest component count")->capture_default_str();
    cv->add_option("--folds", folds, "Fold count")->capture_default_str();
    cv->add_option("--out", table_out, "CV table file name")->capture_default_str();

    std::string experiment;
    std::uint64_t split_seed = 1;
    double train_frac = 0.8;
    bool log_target = false;
    std::vector<std::string> override_kv;
    auto* run = app.add_subcommand("run", "Run a registered experiment");
    run->add_option("--experiment", experiment, "Experiment name")
        ->required()
        ->check(CLI::IsMember(twocultures::experiments::experiment_names()));
    run->add_option("--data", data_path, "Dataset CSV (marthe)");
    run->add_option("--split-seed", split_seed, "Train/test split seed")->capture_default_str();
    run->add_option("--train-frac", train_frac, "Training fraction")->capture_default_str();
    run->add_flag("--log-target", log_target, "Model the log of the target");
    run->add_option("--override", override_kv, "Experiment parameter overrides, key=value");

    auto* diagnose = app.add_subcommand("diagnose", "Shrinkage-factor diagnostic table");
    diagnose->add_option("--data", data_path, "Input CSV")->required();
    diagnose->add_option("--inputs", inputs, "Comma-separated input columns");
    diagnose->add_option("--outputs", outputs, "Comma-separated output columns");
    diagnose->add_option("--lambda", lambda, "Ridge penalty (covariance scale)")
        ->capture_default_str();
    diagnose->add_option("--pcr-components", pcr_components, "PCR component count")
        ->capture_default_str();
    diagnose->add_option("--pls-components", pls_components, "PLS component count")
        ->capture_default_str();
    diagnose->add_option("--out", diag_out, "Table file name")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) {
            return cmd_fit(common, model_kind, data_path, inputs, outputs, components, restarts,
                           model_out, with_scores);
        }
        if (predict->parsed()) {
            return cmd_predict(common, model_path, data_path, inputs, outputs, pred_out);
        }
        if (cv->parsed()) {
            return cmd_cv(common, data_path, inputs, outputs, l_max, folds, table_out);
        }
        if (run->parsed()) {
            return cmd_run(common, experiment, data_path, split_seed, train_frac, log_target,
                           override_kv);
        }
        if (diagnose->parsed()) {
            return cmd_diagnose(common, data_path, inputs, outputs, lambda, pcr_components,
                                pls_components, diag_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
