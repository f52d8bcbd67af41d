#pragma once

#include <json.hpp>
#include <string>

#include "dasp/trainer.hpp"

namespace dasp::config {

nlohmann::json to_json(const trainer::TrainConfig& cfg);
/// Rejects unknown keys.
trainer::TrainConfig from_json(const nlohmann::json& j);

/// Apply "dotted.key=value" overrides onto a config json; keys must already
/// exist (unknown keys are rejected). Values parse as JSON first, then fall
/// back to strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

trainer::TrainConfig load_config_file(const std::string& path,
                                      const std::vector<std::string>& overrides);

}  // namespace dasp::config
