#pragma once

#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stan/model.hpp"

namespace stan {

/// Names of every StanConfig field as it appears in JSON.
const std::vector<std::string_view>& config_keys();
bool is_config_key(std::string_view key);

/// Assigns one field from a JSON value. Throws ConfigError for an unknown key
/// or a value of the wrong type.
void set_config_value(StanConfig& cfg, std::string_view key,
                      const nlohmann::json& value);

nlohmann::json config_to_json(const StanConfig& cfg);

/// Starts from `base`, applies every key of `obj`, then validates.
StanConfig config_from_json(const nlohmann::json& obj,
                            const StanConfig& base = StanConfig::desk());

}  // namespace stan
