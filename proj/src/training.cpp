#include "stan/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stan/error.hpp"

namespace stan {

MseResult mse_loss(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("mse_loss: " + std::to_string(pred.size()) +
                     " predictions vs " + std::to_string(truth.size()) +
                     " targets");
  }
  if (pred.empty()) throw ShapeError("mse_loss: empty input");
  const double count = static_cast<double>(pred.size());
  MseResult r;
  r.grad.resize(pred.size());
  // Neumaier-compensated sum: the loss feeds finite-difference checks.
  double sum = 0.0;
  double carry = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - truth[i];
    const double sq = diff * diff;
    const double t = sum + sq;
    carry += std::abs(sum) >= sq ? (sum - t) + sq : (sq - t) + sum;
    sum = t;
    r.grad[i] = 2.0 * diff / count;
  }
  r.loss = (sum + carry) / count;
  return r;
}

AdamState::AdamState(const ParameterSet& params, double learning_rate)
    : lr(learning_rate) {
  for (const auto& [name, p] : params) {
    m.emplace(name, Tensor::zeros_like(p.value));
    v.emplace(name, Tensor::zeros_like(p.value));
  }
}

void adam_step(ParameterSet& params, AdamState& state) {
  for (const auto& [name, p] : params) {
    if (!all_finite(p.grad)) {
      throw NumericError("adam_step: non-finite gradient in " + name);
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    p.zero_grad();
  }
}

double grad_norm(const ParameterSet& params) {
  double sq = 0.0;
  for (const auto& [_, p] : params) {
    for (double g : p.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [_, p] : params) {
      for (double& g : p.grad.data()) g *= factor;
    }
  }
  return norm;
}

Batch make_batch(const WindowedDataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.windows.reserve(indices.size());
  b.targets = Tensor(indices.size(), ds.n_max);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Sample& s = ds.samples[indices[r]];
    b.windows.push_back(&s.window);
    for (std::size_t k = 0; k < ds.n_max; ++k) b.targets(r, k) = s.targets[k];
  }
  return b;
}

TrainReport fit(Model& model, const WindowedDataset& train,
                const StanConfig& cfg, const EpochCallback& on_epoch) {
  if (train.empty()) throw DataError("fit: training set is empty");
  const StanConfig& mc = model.config();
  if (train.T != mc.T || train.n_max != mc.n_max || train.target != mc.target ||
      train.samples.front().window.rows() != mc.N) {
    throw ConfigError("fit: dataset windows do not match the model config");
  }
  TrainReport report;
  AdamState adam(model.params(), cfg.lr);
  const std::size_t n = train.size();
  const std::size_t batch = std::min(cfg.batch, n);
  std::vector<std::size_t> order(n);
  model.params().zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(RngSeed{cfg.seed}, "epoch", epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double weighted = 0.0;
    try {
      for (std::size_t begin = 0; begin < n; begin += batch) {
        const std::size_t end = std::min(n, begin + batch);
        const Batch b = make_batch(
            train, std::span<const std::size_t>(order).subspan(begin, end - begin));
        const double loss = model.loss(b, true);
        if (!std::isfinite(loss)) throw NumericError("fit: non-finite loss");
        weighted += loss * static_cast<double>(end - begin);
        clip_grad_norm(model.params(), cfg.clip_norm);
        adam_step(model.params(), adam);
      }
    } catch (const NumericError& e) {
      report.failure = "epoch " + std::to_string(epoch) + ": " + e.what();
      return report;
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    report.epochs.push_back(
        {epoch, weighted / static_cast<double>(n), elapsed.count()});
    if (on_epoch) on_epoch(report.epochs.back());
  }
  return report;
}

OwnedBatch random_batch(const StanConfig& cfg, std::size_t samples, RngSeed seed) {
  Rng rng(seed);
  OwnedBatch out;
  out.windows.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    Tensor w(cfg.N, cfg.T);
    for (double& v : w.data()) v = rng.uniform();
    out.windows.push_back(std::move(w));
  }
  out.batch.targets = Tensor(samples, cfg.n_max);
  for (double& v : out.batch.targets.data()) v = rng.uniform();
  for (const Tensor& w : out.windows) out.batch.windows.push_back(&w);
  return out;
}

GradCheckResult check_model_gradients(Model& model, const Batch& batch,
                                      const GradCheckOptions& options) {
  return grad_check(
      [&](bool with_gradients) { return model.loss(batch, with_gradients); },
      model.params(), options);
}

void write_convergence_csv(const TrainReport& report,
                           const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "epoch,loss,seconds\n";
  char buf[96];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.3f\n", e.epoch, e.loss, e.seconds);
    f << buf;
  }
  if (!f) throw IoError("failed writing " + path.string());
}

std::vector<EpochRecord> read_convergence_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open convergence log " + path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("epoch,loss", 0) != 0) {
    throw DataError(path.string() + ": expected header 'epoch,loss,seconds'");
  }
  std::vector<EpochRecord> out;
  std::size_t row = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ++row;
    EpochRecord r;
    std::istringstream ss(line);
    char c1 = 0, c2 = 0;
    if (!(ss >> r.epoch >> c1 >> r.loss >> c2 >> r.seconds) || c1 != ',' ||
        c2 != ',' || !std::isfinite(r.loss)) {
      throw DataError(path.string() + ": malformed row " + std::to_string(row));
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace stan
