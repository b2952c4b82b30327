#pragma once

#include <span>
#include <string>
#include <vector>

#include "stan/data.hpp"
#include "stan/model.hpp"

namespace stan {

/// sqrt of the mean squared difference. Throws DataError on empty input.
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Mean of the target farm's in-window values, identical for every horizon.
double historical_average(const Tensor& window, std::size_t target,
                          std::size_t horizon);

/// The target farm's last in-window value, identical for every horizon.
double persistence_forecast(const Tensor& window, std::size_t target,
                            std::size_t horizon);

struct EvalResult {
  std::string method;
  std::vector<double> rmse;  // MW, horizon k at index k-1
  std::size_t samples = 0;
};

struct NamedModel {
  std::string name;
  const Model* model = nullptr;
};

inline constexpr const char* kHistoricalAverage = "HA";
inline constexpr const char* kPersistence = "Persistence";

/// Scores HA, persistence and every model on the same test windows, in MW.
/// Rows come out baselines first, then models sorted by name. Throws
/// ConfigError when a model's config does not match the dataset.
std::vector<EvalResult> evaluate_models(std::span<const NamedModel> models,
                                        const WindowedDataset& test,
                                        const MinMaxScaler& scaler);

/// `method,rmse_1,...,rmse_n,samples`.
std::string report_csv(std::span<const EvalResult> results);
/// Aligned plain-text table with one column per horizon.
std::string report_table(std::span<const EvalResult> results);

}  // namespace stan
