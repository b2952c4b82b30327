#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stan/data.hpp"
#include "stan/model.hpp"
#include "stan/nn.hpp"

namespace stan {

struct MseResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred
};

/// (1/B) Σ (truth - pred)², gradient 2(pred - truth)/B.
MseResult mse_loss(std::span<const double> pred, std::span<const double> truth);

/// Adam moments for every parameter of one model.
struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;

  AdamState(const ParameterSet& params, double learning_rate);
};

/// One bias-corrected Adam update, then zeroes every grad. Throws
/// NumericError before touching anything if a gradient is not finite.
void adam_step(ParameterSet& params, AdamState& state);

/// Global L2 norm of all gradients.
double grad_norm(const ParameterSet& params);

/// Rescales gradients so their global norm is at most max_norm. Returns the
/// norm before clipping. max_norm <= 0 leaves gradients untouched.
double clip_grad_norm(ParameterSet& params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean training loss in scaled space
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  /// Set when a numeric failure aborted training; epochs holds what finished.
  std::optional<std::string> failure;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam over `train` for cfg.epochs epochs. Sample order is
/// reshuffled every epoch from a seed derived from cfg.seed and the epoch
/// index, so equal inputs give bit-identical reports and parameters.
TrainReport fit(Model& model, const WindowedDataset& train,
                const StanConfig& cfg, const EpochCallback& on_epoch = {});

/// Batch assembly shared by training and evaluation.
Batch make_batch(const WindowedDataset& ds, std::span<const std::size_t> indices);

/// A batch that owns its windows. Moving it keeps `batch` valid.
struct OwnedBatch {
  std::vector<Tensor> windows;
  Batch batch;
};

/// `samples` windows with values uniform on (0, 1) and uniform targets.
OwnedBatch random_batch(const StanConfig& cfg, std::size_t samples, RngSeed seed);

/// grad_check over the model's MSE on one batch.
GradCheckResult check_model_gradients(Model& model, const Batch& batch,
                                      const GradCheckOptions& options = {});

/// `epoch,loss,seconds`, one row per finished epoch.
void write_convergence_csv(const TrainReport& report,
                           const std::filesystem::path& path);
/// Reads the loss column back; used by the plot renderer.
std::vector<EpochRecord> read_convergence_csv(const std::filesystem::path& path);

}  // namespace stan
