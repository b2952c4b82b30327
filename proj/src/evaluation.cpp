#include "stan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stan/error.hpp"

namespace stan {

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty() || truth.empty()) throw DataError("rmse: empty input");
  if (pred.size() != truth.size()) {
    throw ShapeError("rmse: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(truth.size()) + " values");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double historical_average(const Tensor& window, std::size_t target,
                          std::size_t /*horizon*/) {
  const auto row = window.row(target);
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / static_cast<double>(row.size());
}

double persistence_forecast(const Tensor& window, std::size_t target,
                            std::size_t /*horizon*/) {
  return window(target, window.cols() - 1);
}

std::vector<EvalResult> evaluate_models(std::span<const NamedModel> models,
                                        const WindowedDataset& test,
                                        const MinMaxScaler& scaler) {
  if (test.empty()) throw DataError("evaluate: test set is empty");
  const std::size_t n = test.n_max;
  const std::size_t target = test.target;
  const std::size_t count = test.size();
  for (const auto& m : models) {
    const StanConfig& c = m.model->config();
    if (c.T != test.T || c.n_max != n || c.target != target ||
        c.N != test.samples.front().window.rows()) {
      throw ConfigError("model '" + m.name +
                        "' does not match the test windows (T, n_max, target "
                        "or farm count differ)");
    }
  }

  // MW-space windows and truths, shared by every method.
  std::vector<Tensor> windows_mw;
  windows_mw.reserve(count);
  std::vector<std::vector<double>> truth(n, std::vector<double>(count));
  for (std::size_t s = 0; s < count; ++s) {
    windows_mw.push_back(scaler.invert(test.samples[s].window));
    for (std::size_t k = 0; k < n; ++k) {
      truth[k][s] = scaler.invert(target, test.samples[s].targets[k]);
    }
  }

  auto score = [&](const std::string& name, auto&& forecast) {
    EvalResult r{name, std::vector<double>(n), count};
    std::vector<double> pred(count);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t s = 0; s < count; ++s) pred[s] = forecast(s, k);
      r.rmse[k] = rmse(pred, truth[k]);
    }
    return r;
  };

  std::vector<EvalResult> out;
  out.push_back(score(kHistoricalAverage, [&](std::size_t s, std::size_t k) {
    return historical_average(windows_mw[s], target, k + 1);
  }));
  out.push_back(score(kPersistence, [&](std::size_t s, std::size_t k) {
    return persistence_forecast(windows_mw[s], target, k + 1);
  }));

  std::vector<const NamedModel*> sorted;
  for (const auto& m : models) sorted.push_back(&m);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const NamedModel* a, const NamedModel* b) {
                     return a->name < b->name;
                   });
  constexpr std::size_t kChunk = 256;
  for (const NamedModel* m : sorted) {
    Tensor pred(count, n);
    for (std::size_t begin = 0; begin < count; begin += kChunk) {
      const std::size_t end = std::min(count, begin + kChunk);
      std::vector<const Tensor*> chunk;
      for (std::size_t s = begin; s < end; ++s) chunk.push_back(&test.samples[s].window);
      const Tensor p = m->model->predict(chunk);
      std::copy(p.data().begin(), p.data().end(), pred.raw() + begin * n);
    }
    out.push_back(score(m->name, [&](std::size_t s, std::size_t k) {
      return scaler.invert(target, pred(s, k));
    }));
  }
  return out;
}

std::string report_csv(std::span<const EvalResult> results) {
  std::ostringstream os;
  const std::size_t n = results.empty() ? 0 : results.front().rmse.size();
  os << "method";
  for (std::size_t k = 1; k <= n; ++k) os << ",rmse_" << k;
  os << ",samples\n";
  char buf[64];
  for (const auto& r : results) {
    os << r.method;
    for (double v : r.rmse) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      os << buf;
    }
    os << ',' << r.samples << '\n';
  }
  return os.str();
}

std::string report_table(std::span<const EvalResult> results) {
  const std::size_t n = results.empty() ? 0 : results.front().rmse.size();
  std::size_t name_width = 6;
  for (const auto& r : results) name_width = std::max(name_width, r.method.size());
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-4s %-*s", "NO.", static_cast<int>(name_width),
                "Method");
  os << buf;
  for (std::size_t k = 1; k <= n; ++k) {
    std::snprintf(buf, sizeof buf, " %10s", (std::to_string(k) + "-step").c_str());
    os << buf;
  }
  os << '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-4zu %-*s", i + 1,
                  static_cast<int>(name_width), results[i].method.c_str());
    os << buf;
    for (double v : results[i].rmse) {
      std::snprintf(buf, sizeof buf, " %10.2f", v);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace stan
