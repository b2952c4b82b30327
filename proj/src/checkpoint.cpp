#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stan/config_json.hpp"
#include "stan/error.hpp"
#include "stan/model.hpp"

namespace stan {
namespace {

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string checkpoint_json(const Model& model) {
  const StanConfig& c = model.config();
  std::string out = "{\n  \"config\": {";
  auto key = [&](const char* name, bool first = false) {
    out += first ? "\n    \"" : ",\n    \"";
    out += name;
    out += "\": ";
  };
  auto uint = [&](const char* name, std::uint64_t v, bool first = false) {
    key(name, first);
    out += std::to_string(v);
  };
  uint("N", c.N, true);
  uint("T", c.T);
  uint("n_max", c.n_max);
  uint("target", c.target);
  uint("d_m", c.d_m);
  uint("d_e", c.d_e);
  uint("d_d", c.d_d);
  uint("d_ffn", c.d_ffn);
  uint("h", c.h);
  uint("N_x", c.N_x);
  key("lr");
  append_number(out, c.lr);
  uint("epochs", c.epochs);
  uint("batch", c.batch);
  uint("seed", c.seed);
  key("variant");
  out += "\"" + std::string(variant_name(c.variant)) + "\"";
  key("scale_by_dm");
  out += c.scale_by_dm ? "true" : "false";
  key("clip_norm");
  append_number(out, c.clip_norm);
  out += "\n  },\n  \"params\": [";

  bool first = true;
  for (const auto& [name, p] : model.params()) {
    out += first ? "\n    " : ",\n    ";
    first = false;
    out += "{\"name\": \"" + name + "\", \"rows\": " +
           std::to_string(p.value.rows()) +
           ", \"cols\": " + std::to_string(p.value.cols()) + ", \"data\": [";
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      if (i != 0) out += ", ";
      append_number(out, p.value[i]);
    }
    out += "]}";
  }
  out += "\n  ]\n}\n";
  return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path.string());
  const std::string text = checkpoint_json(model);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("failed writing checkpoint: " + path.string());
}

Model checkpoint_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("checkpoint parse error at byte " + std::to_string(e.byte) +
                    ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("config") || !doc.contains("params")) {
    throw LoadError("checkpoint must be an object with \"config\" and \"params\"");
  }
  for (const auto& [k, _] : doc.items()) {
    if (k != "config" && k != "params") {
      throw LoadError("checkpoint has unexpected top-level key '" + k + "'");
    }
  }
  StanConfig cfg;
  try {
    cfg = config_from_json(doc["config"], StanConfig::desk());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config rejected: ") + e.what());
  }
  Model model(cfg);

  const auto& list = doc["params"];
  if (!list.is_array()) throw LoadError("\"params\" must be an array");
  std::set<std::string> seen;
  for (const auto& entry : list) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("rows") ||
        !entry.contains("cols") || !entry.contains("data") ||
        !entry["name"].is_string() || !entry["rows"].is_number_unsigned() ||
        !entry["cols"].is_number_unsigned() || !entry["data"].is_array()) {
      throw LoadError("malformed parameter entry: " + entry.dump().substr(0, 80));
    }
    const auto name = entry["name"].get<std::string>();
    if (!model.params().contains(name)) {
      throw LoadError("parameter '" + name + "' does not belong to a " +
                      std::string(variant_name(cfg.variant)) + " model");
    }
    if (!seen.insert(name).second) {
      throw LoadError("parameter '" + name + "' listed twice");
    }
    Parameter& p = model.params().at(name);
    const auto rows = entry["rows"].get<std::size_t>();
    const auto cols = entry["cols"].get<std::size_t>();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw LoadError("parameter '" + name + "' is " + std::to_string(rows) +
                      "x" + std::to_string(cols) + " but the config implies " +
                      p.value.shape_string());
    }
    const auto& data = entry["data"];
    if (data.size() != rows * cols) {
      throw LoadError("parameter '" + name + "' has " +
                      std::to_string(data.size()) + " values, expected " +
                      std::to_string(rows * cols));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!data[i].is_number()) {
        throw LoadError("parameter '" + name + "' has a non-numeric value");
      }
      const double v = data[i].get<double>();
      if (!std::isfinite(v)) {
        throw LoadError("parameter '" + name + "' has a non-finite value");
      }
      p.value[i] = v;
    }
  }
  if (seen.size() != model.params().size()) {
    for (const auto& [name, _] : model.params()) {
      if (seen.count(name) == 0) {
        throw LoadError("checkpoint is missing parameter '" + name + "'");
      }
    }
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace stan
