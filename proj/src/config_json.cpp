#include "stan/config_json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stan/error.hpp"

namespace stan {
namespace {

[[noreturn]] void type_error(std::string_view key, const char* expected,
                             const nlohmann::json& value) {
  throw ConfigError("config key '" + std::string(key) + "' expects " +
                    expected + ", got " + value.dump());
}

std::uint64_t as_unsigned(std::string_view key, const nlohmann::json& value) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(value.get<std::int64_t>());
  }
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (d >= 0 && std::floor(d) == d && d < 1.8e19) {
      return static_cast<std::uint64_t>(d);
    }
  }
  type_error(key, "a non-negative integer", value);
}

double as_double(std::string_view key, const nlohmann::json& value) {
  if (!value.is_number()) type_error(key, "a number", value);
  return value.get<double>();
}

bool as_bool(std::string_view key, const nlohmann::json& value) {
  if (!value.is_boolean()) type_error(key, "true or false", value);
  return value.get<bool>();
}

}  // namespace

const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys = {
      "N",     "T",      "n_max", "target", "d_m",     "d_e",
      "d_d",   "d_ffn",  "h",     "N_x",    "lr",      "epochs",
      "batch", "seed",   "variant", "scale_by_dm", "clip_norm"};
  return keys;
}

bool is_config_key(std::string_view key) {
  const auto& keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void set_config_value(StanConfig& cfg, std::string_view key,
                      const nlohmann::json& value) {
  auto size = [&](std::size_t& field) {
    field = static_cast<std::size_t>(as_unsigned(key, value));
  };
  if (key == "N") size(cfg.N);
  else if (key == "T") size(cfg.T);
  else if (key == "n_max") size(cfg.n_max);
  else if (key == "target") size(cfg.target);
  else if (key == "d_m") size(cfg.d_m);
  else if (key == "d_e") size(cfg.d_e);
  else if (key == "d_d") size(cfg.d_d);
  else if (key == "d_ffn") size(cfg.d_ffn);
  else if (key == "h") size(cfg.h);
  else if (key == "N_x") size(cfg.N_x);
  else if (key == "epochs") size(cfg.epochs);
  else if (key == "batch") size(cfg.batch);
  else if (key == "seed") cfg.seed = as_unsigned(key, value);
  else if (key == "lr") cfg.lr = as_double(key, value);
  else if (key == "clip_norm") cfg.clip_norm = as_double(key, value);
  else if (key == "scale_by_dm") cfg.scale_by_dm = as_bool(key, value);
  else if (key == "variant") {
    if (!value.is_string()) type_error(key, "a variant name", value);
    cfg.variant = parse_variant(value.get<std::string>());
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

nlohmann::json config_to_json(const StanConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  j["N"] = cfg.N;
  j["T"] = cfg.T;
  j["n_max"] = cfg.n_max;
  j["target"] = cfg.target;
  j["d_m"] = cfg.d_m;
  j["d_e"] = cfg.d_e;
  j["d_d"] = cfg.d_d;
  j["d_ffn"] = cfg.d_ffn;
  j["h"] = cfg.h;
  j["N_x"] = cfg.N_x;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch"] = cfg.batch;
  j["seed"] = cfg.seed;
  j["variant"] = std::string(variant_name(cfg.variant));
  j["scale_by_dm"] = cfg.scale_by_dm;
  j["clip_norm"] = cfg.clip_norm;
  return j;
}

StanConfig config_from_json(const nlohmann::json& obj, const StanConfig& base) {
  if (!obj.is_object()) throw ConfigError("config must be a JSON object");
  StanConfig cfg = base;
  for (const auto& [key, value] : obj.items()) set_config_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

}  // namespace stan
