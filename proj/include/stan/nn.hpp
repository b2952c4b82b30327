#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stan/tensor.hpp"

namespace stan {

/// A learnable tensor and its same-shape gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Uniquely named parameters, iterated in name order. Element addresses are
/// stable for the lifetime of the set, including across moves.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  /// Throws std::invalid_argument on a duplicate name.
  Parameter& add(const std::string& name, Tensor value);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }

  std::size_t size() const noexcept { return params_.size(); }
  /// Total number of scalar elements over all parameters.
  std::size_t element_count() const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
};

struct RngSeed {
  std::uint64_t value = 0;
};

/// SplitMix64 stream. Fully specified, so sequences are identical across
/// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(RngSeed seed) : state_(seed.value) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Uniform on (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a base seed with a string and a counter into an independent seed.
RngSeed derive_seed(RngSeed base, std::string_view tag, std::uint64_t index = 0);

/// i.i.d. uniform on (-b, b), b = sqrt(6 / (rows + cols)).
Tensor glorot_init(std::size_t rows, std::size_t cols, RngSeed seed);

/// x · W.
Tensor linear_forward(const Tensor& x, const Parameter& w);
/// Accumulates xᵀ·G into w.grad and returns G·Wᵀ.
Tensor linear_backward(const Tensor& x, const Tensor& grad_out, Parameter& w);

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Tensor normalized;
  std::vector<double> inv_std;
};

/// Per row: (x - mean) / sqrt(population variance + eps), then gain ⊙ · + bias.
Tensor layer_norm_forward(const Tensor& x, const Parameter& gain,
                          const Parameter& bias, double eps = kLayerNormEps,
                          LayerNormCache* cache = nullptr);
/// Accumulates into gain.grad and bias.grad; returns the input gradient.
Tensor layer_norm_backward(const Tensor& grad_out, const LayerNormCache& cache,
                           Parameter& gain, Parameter& bias);

/// A scalar objective over a ParameterSet. Called with true it must also
/// accumulate analytic gradients into the parameters' grad tensors.
using Objective = std::function<double(bool with_gradients)>;

struct GradCheckOptions {
  double step = 1e-6;
  /// 0 checks every element; otherwise a seeded sample of this many
  /// elements (at least 200) is drawn when the model is larger.
  std::size_t max_elements = 0;
  RngSeed seed{0};
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares analytic gradients against central differences
/// (f(θ+δ) - f(θ-δ)) / 2δ. Relative error is |a-n| / max(|a|, |n|, 1e-8).
/// Throws NumericError if either gradient is NaN. Parameter values are
/// restored and grads are left holding the analytic gradient.
GradCheckResult grad_check(const Objective& objective, ParameterSet& params,
                           const GradCheckOptions& options = {});

}  // namespace stan
