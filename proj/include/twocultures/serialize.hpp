#pragma once

#include "twocultures/gp.hpp"
#include "twocultures/nnet.hpp"
#include "twocultures/pipeline.hpp"
#include "twocultures/pls.hpp"

#include <json.hpp>

#include <string>

namespace twocultures::io {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const numerics::StandardizationParams& p);
numerics::StandardizationParams standardization_from_json(const nlohmann::json& j);

nlohmann::json to_json(const pls::PlsModel& model, bool include_scores = false);
pls::PlsModel pls_from_json(const nlohmann::json& j);

nlohmann::json to_json(const gp::GpModel& model);
gp::GpModel gp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const nnet::MlpModel& model);
nnet::MlpModel mlp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const pipeline::CompositeModel& model);
pipeline::CompositeModel composite_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const nlohmann::json& model);

// Loads and validates the schema version; `expected_kind` may be empty to
// accept any model kind.
nlohmann::json load_model(const std::string& path, const std::string& expected_kind = "");

}  // namespace twocultures::io
