#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mtuq/model/model.hpp"

namespace mtuq::model {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Self-describing binary container: magic, format version, a JSON header
// echoing the model config and indexing the weight arrays by hierarchical
// name, followed by raw float32 payload in header order.
void save_checkpoint(const JointModel& m, const std::string& path);
JointModel load_checkpoint(const std::string& path);

} // namespace mtuq::model
