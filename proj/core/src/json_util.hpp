#pragma once

#include <json.hpp>

#include "ifthen/model.hpp"

namespace ifthen {

// Model-config <-> JSON mapping shared by checkpoints and the CLI config
// file. Missing fields keep their defaults; unknown fields are rejected so
// typos in config files fail loudly.
nlohmann::ordered_json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(Arch arch, const nlohmann::json& j);

}  // namespace ifthen
