#include "stan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "stan/error.hpp"

namespace stan {

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  auto [it, inserted] = params_.try_emplace(name, name, std::move(value));
  if (!inserted) throw std::invalid_argument("duplicate parameter " + name);
  return it->second;
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter " + name);
  return it->second;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter " + name);
  return it->second;
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  // 53 random mantissa bits, offset by half an ulp to exclude 0 and 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  return static_cast<std::size_t>(next_u64() % n);
}

RngSeed derive_seed(RngSeed base, std::string_view tag, std::uint64_t index) {
  // FNV-1a over the tag, then one SplitMix round to decorrelate.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  Rng mix(RngSeed{base.value ^ h ^ (index * 0xd6e8feb86659fd93ULL)});
  return RngSeed{mix.next_u64()};
}

Tensor glorot_init(std::size_t rows, std::size_t cols, RngSeed seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor linear_forward(const Tensor& x, const Parameter& w) {
  return matmul(x, w.value);
}

Tensor linear_backward(const Tensor& x, const Tensor& grad_out, Parameter& w) {
  add_inplace(w.grad, matmul_tn(x, grad_out));
  return matmul_nt(grad_out, w.value);
}

Tensor layer_norm_forward(const Tensor& x, const Parameter& gain,
                          const Parameter& bias, double eps,
                          LayerNormCache* cache) {
  const std::size_t d = x.cols();
  if (gain.value.rows() != 1 || gain.value.cols() != d ||
      bias.value.rows() != 1 || bias.value.cols() != d) {
    throw ShapeError("layer_norm: input " + x.shape_string() + " with gain " +
                     gain.value.shape_string() + " and bias " +
                     bias.value.shape_string());
  }
  Tensor normalized(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  Tensor out(x.rows(), d);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    const double mean = std::accumulate(in.begin(), in.end(), 0.0) * inv_d;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var *= inv_d;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    auto n = normalized.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      n[c] = (in[c] - mean) * is;
      o[c] = n[c] * gain.value[c] + bias.value[c];
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Tensor layer_norm_backward(const Tensor& grad_out, const LayerNormCache& cache,
                           Parameter& gain, Parameter& bias) {
  const Tensor& xhat = cache.normalized;
  const std::size_t d = xhat.cols();
  Tensor dx(xhat.rows(), d);
  const double inv_d = 1.0 / static_cast<double>(d);
  std::vector<double> dxhat(d);
  Tensor dgain(1, d);
  Tensor dbias(1, d);
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    const auto g = grad_out.row(r);
    const auto n = xhat.row(r);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dgain[c] += g[c] * n[c];
      dbias[c] += g[c];
      dxhat[c] = g[c] * gain.value[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * n[c];
    }
    mean_dxhat *= inv_d;
    mean_dxhat_xhat *= inv_d;
    auto o = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      o[c] = cache.inv_std[r] * (dxhat[c] - mean_dxhat - n[c] * mean_dxhat_xhat);
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    gain.grad[c] += dgain[c];
    bias.grad[c] += dbias[c];
  }
  return dx;
}

GradCheckResult grad_check(const Objective& objective, ParameterSet& params,
                           const GradCheckOptions& options) {
  struct Slot {
    Parameter* param;
    std::size_t index;
  };
  std::vector<Slot> slots;
  for (auto& [_, p] : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) slots.push_back({&p, i});
  }
  if (options.max_elements != 0 && slots.size() > options.max_elements) {
    const std::size_t want = std::max<std::size_t>(options.max_elements, 200);
    Rng rng(options.seed);
    // Partial Fisher-Yates: the first `want` slots become the sample.
    for (std::size_t i = 0; i < want && i < slots.size(); ++i) {
      std::swap(slots[i], slots[i + rng.index(slots.size() - i)]);
    }
    slots.resize(std::min(want, slots.size()));
  }

  params.zero_grad();
  objective(true);

  GradCheckResult result;
  const double h = options.step;
  for (const auto& s : slots) {
    double& theta = s.param->value[s.index];
    const double saved = theta;
    theta = saved + h;
    const double plus = objective(false);
    theta = saved - h;
    const double minus = objective(false);
    theta = saved;

    const double numeric = (plus - minus) / (2.0 * h);
    const double analytic = s.param->grad[s.index];
    if (std::isnan(numeric) || std::isnan(analytic)) {
      throw NumericError("grad_check: NaN gradient at " + s.param->name + "[" +
                         std::to_string(s.index) + "]");
    }
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    ++result.checked;
    if (rel > result.max_relative_error || result.worst_parameter.empty()) {
      result.max_relative_error = std::max(rel, result.max_relative_error);
      result.worst_parameter = s.param->name;
      result.worst_index = s.index;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace stan
