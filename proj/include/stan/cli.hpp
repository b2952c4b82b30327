#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stan/model.hpp"

namespace stan::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

/// Bad flags, unknown config keys, type mismatches, invalid configs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model config plus the paths and split a CLI run needs.
struct RunConfig {
  StanConfig model = StanConfig::desk();
  std::string data;        // wide CSV
  std::string meta;        // optional id,lat,lon CSV
  std::string checkpoint;  // input checkpoint for predict/evaluate
  std::string out = "out";
  double train_fraction = 0.8;
  std::size_t length = 5000;  // synth only
};

enum class Preset { Desk, Paper };

/// Applies one JSON key (model field or run field). Throws UsageError for an
/// unknown key or wrong type.
void apply_key(RunConfig& cfg, std::string_view key, const nlohmann::json& value);

/// Applies `key=value`. The value is read as JSON when it parses, otherwise
/// as a plain string, so `variant=STANta` and `lr=0.001` both work.
void apply_override(RunConfig& cfg, std::string_view assignment);

/// Preset defaults, then the JSON file (if any), then every override, then
/// validation. Throws UsageError naming the offending key.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      Preset preset = Preset::Desk,
                      const std::vector<std::string>& overrides = {});

nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Entry point behind the `stan` executable. Writes results to `out` and
/// one-line diagnostics to `err`; returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace stan::cli
