#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stan/nn.hpp"
#include "stan/spatial.hpp"
#include "stan/temporal.hpp"
#include "stan/tensor.hpp"

namespace stan {

enum class ModelVariant {
  Stan,    // spatial self-attention + attention decoder
  StanSa,  // temporal attention removed
  StanTa,  // spatial self-attention replaced by embedding + one FFN
};

std::string_view variant_name(ModelVariant v);
/// Accepts "STAN", "STANsa", "STANta". Throws ConfigError otherwise.
ModelVariant parse_variant(std::string_view name);

struct StanConfig {
  std::size_t N = 6;       // farms
  std::size_t T = 12;      // window length
  std::size_t n_max = 3;   // forecast horizons
  std::size_t target = 0;  // target farm row
  std::size_t d_m = 32;
  std::size_t d_e = 32;
  std::size_t d_d = 32;
  std::size_t d_ffn = 64;
  std::size_t h = 4;
  std::size_t N_x = 2;
  double lr = 0.01;
  std::size_t epochs = 40;
  std::size_t batch = 32;
  std::uint64_t seed = 1;
  ModelVariant variant = ModelVariant::Stan;
  bool scale_by_dm = false;
  /// Global gradient-norm clip applied before each optimizer step; 0 disables.
  double clip_norm = 5.0;

  /// Desk-scale defaults (the values above).
  static StanConfig desk();
  /// Published hyperparameters: 512-wide, 8 heads, 2048 FFN, 6 layers.
  static StanConfig paper();
  /// Tiny configuration used by gradient checks.
  static StanConfig desk_mini();

  /// Throws ConfigError naming every violated invariant.
  void validate() const;
};

/// One supervised batch: B windows stacked as B·N × T, plus targets B × n.
struct Batch {
  std::vector<const Tensor*> windows;  // each N × T
  Tensor targets;                      // B × n_max; may be empty for inference
};

/// STAN or one of its ablations, with all parameters owned by the model.
///
/// Parameters are addressed through raw pointers into the ParameterSet, so a
/// Model is move-only.
class Model {
 public:
  /// Validates the config and Glorot-initializes every weight from
  /// cfg.seed. LayerNorm gains start at 1 and biases at 0.
  explicit Model(const StanConfig& cfg);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const StanConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Scaled-space forecasts for horizons 1..n_max from one N×T window.
  std::vector<double> forward_window(const Tensor& window) const;

  /// B × n_max forecasts for a batch of windows.
  Tensor predict(std::span<const Tensor* const> windows) const;

  /// MSE over every (sample, horizon) pair. With gradients requested, adds
  /// dLoss/dθ into each parameter's grad.
  double loss(const Batch& batch, bool with_gradients);

  /// Parameter-count oracle from declared shapes, for tests and reports.
  static std::size_t expected_parameter_count(const StanConfig& cfg);

 private:
  struct Pass;
  Tensor run(std::span<const Tensor* const> windows, Pass* pass) const;
  void backward(const Tensor& grad_pred, Pass& pass);

  StanConfig cfg_;
  ParameterSet params_;
  SpatialEncoderParams spatial_;
  FfnParams ta_ffn_;  // STANta only
  EncoderParams encoder_;
  DecoderParams decoder_;
};

/// Writes {"config": {...}, "params": [{"name", "rows", "cols", "data"}]}
/// with parameters in name order and every number at 17 significant digits.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
std::string checkpoint_json(const Model& model);

/// Rebuilds the model from the stored config and overwrites its parameters.
/// Throws LoadError on parse errors (with byte offset), schema or shape
/// mismatches, invalid configs, and non-finite values; IoError if unreadable.
Model load_checkpoint(const std::filesystem::path& path);
Model checkpoint_from_json(std::string_view text);

}  // namespace stan
