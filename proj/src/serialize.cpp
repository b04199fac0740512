#include "twocultures/serialize.hpp"

#include <Eigen/LU>

#include <fstream>

namespace twocultures::io {

namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

const char* activation_name(nnet::Activation act) {
    switch (act) {
        case nnet::Activation::Relu: return "relu";
        case nnet::Activation::Tanh: return "tanh";
        case nnet::Activation::Identity: return "identity";
        case nnet::Activation::Logistic: return "logistic";
    }
    return "identity";
}

nnet::Activation activation_from_name(const std::string& name) {
    if (name == "relu") return nnet::Activation::Relu;
    if (name == "tanh") return nnet::Activation::Tanh;
    if (name == "identity") return nnet::Activation::Identity;
    if (name == "logistic") return nnet::Activation::Logistic;
    throw ValidationError("model json: unknown activation '" + name + "'");
}

json envelope(const char* kind) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = kind;
    return j;
}

void check_kind(const json& j, const std::string& kind) {
    if (j.value("kind", "") != kind) {
        throw ValidationError("model json: expected kind '" + kind + "', found '" +
                              j.value("kind", "<missing>") + "'");
    }
}

}  // namespace

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    const Index rows = static_cast<Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const Index cols = static_cast<Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Index>(row.size()) != cols) {
            throw ValidationError("model json: ragged matrix rows");
        }
        for (Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    require_finite(m, "model json matrix");
    return m;
}

json to_json(const numerics::StandardizationParams& p) {
    return json{{"means", vector_to_json(p.means)}, {"sds", vector_to_json(p.sds)}};
}

numerics::StandardizationParams standardization_from_json(const json& j) {
    numerics::StandardizationParams p;
    p.means = vector_from_json(j.at("means"));
    p.sds = vector_from_json(j.at("sds"));
    if ((p.sds.array() <= 0.0).any()) throw ValidationError("model json: non-positive sds");
    return p;
}

json to_json(const pls::PlsModel& model, bool include_scores) {
    json j = envelope("pls");
    j["L"] = model.L;
    j["W"] = to_json(model.W);
    j["P"] = to_json(model.P);
    j["Q"] = to_json(model.Q);
    j["beta"] = to_json(model.beta);
    j["b"] = vector_to_json(model.b);
    j["x_std"] = to_json(model.x_std);
    j["y_std"] = to_json(model.y_std);
    if (include_scores) {
        j["T"] = to_json(model.T);
        j["U"] = to_json(model.U);
    }
    return j;
}

pls::PlsModel pls_from_json(const json& j) {
    check_kind(j, "pls");
    pls::PlsModel model;
    model.L = j.at("L").get<Index>();
    model.requested = model.L;
    model.W = matrix_from_json(j.at("W"));
    model.P = matrix_from_json(j.at("P"));
    model.Q = matrix_from_json(j.at("Q"));
    model.beta = matrix_from_json(j.at("beta"));
    model.b = vector_from_json(j.at("b"));
    model.x_std = standardization_from_json(j.at("x_std"));
    model.y_std = standardization_from_json(j.at("y_std"));
    if (j.contains("T")) model.T = matrix_from_json(j.at("T"));
    if (j.contains("U")) model.U = matrix_from_json(j.at("U"));

    if (model.L > 0) {
        const Matrix ptw = model.P.transpose() * model.W;
        model.rotation = Eigen::PartialPivLU<Matrix>(ptw.transpose())
                             .solve(model.W.transpose())
                             .transpose();
    } else {
        model.rotation = Matrix::Zero(model.x_std.means.size(), 0);
    }
    return model;
}

json to_json(const gp::GpModel& model) {
    json j = envelope("gp");
    j["d"] = vector_to_json(model.params.d);
    j["g"] = model.params.g;
    j["mll"] = model.mll;
    j["mean_tag"] = model.mean_tag == gp::MeanTag::Zero ? "zero" : "constant";
    j["Xtrain"] = to_json(model.x_train);
    j["ytrain"] = vector_to_json(model.y_train);
    return j;
}

gp::GpModel gp_from_json(const json& j) {
    check_kind(j, "gp");
    gp::KernelParams params;
    params.d = vector_from_json(j.at("d"));
    params.g = j.at("g").get<double>();
    const gp::MeanTag mean =
        j.at("mean_tag").get<std::string>() == "constant" ? gp::MeanTag::Constant : gp::MeanTag::Zero;
    return gp::make_gp(matrix_from_json(j.at("Xtrain")), vector_from_json(j.at("ytrain")), params,
                       mean);
}

json to_json(const nnet::MlpModel& model) {
    json j = envelope("mlp");
    json layers = json::array();
    for (const nnet::Layer& layer : model.layers) {
        json l;
        l["W"] = to_json(layer.w);
        l["b"] = vector_to_json(layer.b.transpose());
        l["activation"] = activation_name(layer.activation);
        l["input_keep"] = layer.input_keep;
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    return j;
}

nnet::MlpModel mlp_from_json(const json& j) {
    check_kind(j, "mlp");
    nnet::MlpModel model;
    for (const json& l : j.at("layers")) {
        nnet::Layer layer;
        layer.w = matrix_from_json(l.at("W"));
        layer.b = vector_from_json(l.at("b")).transpose();
        layer.activation = activation_from_name(l.at("activation").get<std::string>());
        layer.input_keep = l.value("input_keep", 1.0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

json to_json(const pipeline::CompositeModel& model) {
    json j = envelope("composite");

    json transform;
    if (const auto* t = std::get_if<pipeline::PlsTransform>(&model.transform)) {
        transform["kind"] = "pls";
        transform["model"] = to_json(t->model);
    } else if (const auto* t = std::get_if<pipeline::BottleneckTransform>(&model.transform)) {
        transform["kind"] = "bottleneck";
        transform["network"] = to_json(t->network);
        transform["feature_layers"] = t->feature_layers;
        transform["out_dim"] = t->out_dim;
        transform["x_std"] = to_json(t->x_std);
    } else if (const auto* t = std::get_if<pipeline::PcaTransform>(&model.transform)) {
        transform["kind"] = "pca";
        transform["basis"] = to_json(t->basis);
        transform["x_std"] = to_json(t->x_std);
    } else {
        transform["kind"] = "identity";
        transform["x_std"] = to_json(std::get<pipeline::IdentityTransform>(model.transform).x_std);
    }
    j["transform"] = std::move(transform);

    json heads = json::array();
    for (const pipeline::Head& head : model.heads) {
        json h;
        if (const auto* gp_head = std::get_if<pipeline::GpHead>(&head)) {
            h["kind"] = "gp";
            h["model"] = to_json(gp_head->model);
            h["offset"] = gp_head->offset;
            h["scale"] = gp_head->scale;
        } else if (const auto* mlp_head = std::get_if<pipeline::MlpHead>(&head)) {
            h["kind"] = "mlp";
            h["model"] = to_json(mlp_head->model);
        } else if (const auto* linear_head = std::get_if<pipeline::LinearHead>(&head)) {
            h["kind"] = "linear";
            h["coef"] = to_json(linear_head->coef);
            h["intercept"] = vector_to_json(linear_head->intercept.transpose());
        } else {
            h["kind"] = "zero";
        }
        heads.push_back(std::move(h));
    }
    j["heads"] = std::move(heads);
    j["Q"] = to_json(model.back_projection);
    j["y_std"] = to_json(model.y_std);
    return j;
}

pipeline::CompositeModel composite_from_json(const json& j) {
    check_kind(j, "composite");
    pipeline::CompositeModel model;

    const json& transform = j.at("transform");
    const std::string tkind = transform.at("kind").get<std::string>();
    if (tkind == "pls") {
        model.transform = pipeline::PlsTransform{pls_from_json(transform.at("model"))};
    } else if (tkind == "bottleneck") {
        pipeline::BottleneckTransform t;
        t.network = mlp_from_json(transform.at("network"));
        t.feature_layers = transform.at("feature_layers").get<Index>();
        t.out_dim = transform.at("out_dim").get<Index>();
        t.x_std = standardization_from_json(transform.at("x_std"));
        model.transform = std::move(t);
    } else if (tkind == "pca") {
        pipeline::PcaTransform t;
        t.basis = matrix_from_json(transform.at("basis"));
        t.x_std = standardization_from_json(transform.at("x_std"));
        model.transform = std::move(t);
    } else if (tkind == "identity") {
        model.transform =
            pipeline::IdentityTransform{standardization_from_json(transform.at("x_std"))};
    } else {
        throw ValidationError("model json: unknown transform kind '" + tkind + "'");
    }

    for (const json& h : j.at("heads")) {
        const std::string hkind = h.at("kind").get<std::string>();
        if (hkind == "gp") {
            pipeline::GpHead head;
            head.model = gp_from_json(h.at("model"));
            head.offset = h.at("offset").get<double>();
            head.scale = h.at("scale").get<double>();
            model.heads.emplace_back(std::move(head));
        } else if (hkind == "mlp") {
            model.heads.emplace_back(pipeline::MlpHead{mlp_from_json(h.at("model"))});
        } else if (hkind == "linear") {
            pipeline::LinearHead head;
            head.coef = matrix_from_json(h.at("coef"));
            head.intercept = vector_from_json(h.at("intercept")).transpose();
            model.heads.emplace_back(std::move(head));
        } else if (hkind == "zero") {
            model.heads.emplace_back(pipeline::ZeroHead{});
        } else {
            throw ValidationError("model json: unknown head kind '" + hkind + "'");
        }
    }
    model.back_projection = matrix_from_json(j.at("Q"));
    model.y_std = standardization_from_json(j.at("y_std"));
    return model;
}

void save_model(const std::string& path, const json& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("save_model: cannot open '" + path + "'");
    out << model.dump(1) << "\n";
    if (!out) throw ValidationError("save_model: write to '" + path + "' failed");
}

json load_model(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("load_model: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("load_model: '" + path + "' is not valid JSON: " + e.what());
    }
    const int version = j.value("schema_version", -1);
    if (version != kSchemaVersion) {
        throw ValidationError("load_model: '" + path + "' has schema version " +
                              std::to_string(version) + ", expected " +
                              std::to_string(kSchemaVersion));
    }
    if (!expected_kind.empty()) check_kind(j, expected_kind);
    return j;
}

}  // namespace twocultures::io
