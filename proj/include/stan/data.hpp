#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "stan/nn.hpp"
#include "stan/tensor.hpp"

namespace stan {

struct LatLon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

/// Power output of N farms over L equally spaced timestamps.
struct FarmSeries {
  std::vector<std::string> ids;
  std::vector<LatLon> latlon;  // empty, or one entry per farm
  std::vector<std::int64_t> timestamps;  // minutes
  std::int64_t step_minutes = 0;
  Tensor values;  // N × L, MW

  std::size_t farms() const { return values.rows(); }
  std::size_t length() const { return values.cols(); }
};

/// Wide CSV: header `timestamp,<id1>,...,<idN>`, one row per timestamp.
/// Timestamps are integer minute offsets or ISO-8601 date-times
/// (YYYY-MM-DDTHH:MM[:SS][Z]). Throws DataError naming the data row
/// (1-based, header excluded) for blank/NaN/negative cells, wrong cell
/// counts, duplicate ids, and non-increasing or irregular timestamps.
FarmSeries parse_wide_csv(std::istream& in);
FarmSeries load_wide_csv(const std::filesystem::path& path);

/// Reads `id,lat,lon` and attaches coordinates in the series' farm order.
void load_metadata_csv(const std::filesystem::path& path, FarmSeries& series);

void write_wide_csv(const FarmSeries& series, const std::filesystem::path& path);
void write_metadata_csv(const FarmSeries& series,
                        const std::filesystem::path& path);

/// Per-farm min-max scaling to [0, 1].
class MinMaxScaler {
 public:
  MinMaxScaler() = default;
  MinMaxScaler(std::vector<double> min, std::vector<double> max);

  /// Fits on the first `columns` timestamps of an N × L matrix.
  static MinMaxScaler fit(const Tensor& values, std::size_t columns);

  double apply(std::size_t farm, double v) const;
  double invert(std::size_t farm, double v) const;
  Tensor apply(const Tensor& values) const;
  Tensor invert(const Tensor& values) const;

  const std::vector<double>& min() const { return min_; }
  const std::vector<double>& max() const { return max_; }

 private:
  std::vector<double> min_;
  std::vector<double> max_;
};

struct Sample {
  Tensor window;                // N × T, scaled
  std::vector<double> targets;  // target farm at t0+T-1+k, k = 1..n_max
  std::size_t start = 0;        // t0, a column index of the source matrix
};

struct WindowedDataset {
  std::size_t T = 0;
  std::size_t n_max = 0;
  std::size_t target = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Stride-1 windows, one per start t0 = 0 .. L - T - n_max.
/// `offset` is added to every recorded start index.
WindowedDataset make_windows(const Tensor& scaled, std::size_t T,
                             std::size_t n_max, std::size_t target,
                             std::size_t offset = 0);

/// floor(fraction · count). Throws DataError unless 0 < fraction < 1 and
/// both sides are non-empty.
std::size_t split_point(std::size_t count, double fraction);

std::pair<FarmSeries, FarmSeries> chrono_split(const FarmSeries& series,
                                               double train_fraction);
std::pair<WindowedDataset, WindowedDataset> chrono_split(
    const WindowedDataset& ds, double train_fraction);

/// Everything a training or evaluation run needs from one series.
struct PreparedData {
  MinMaxScaler scaler;  // fitted on the training range only
  WindowedDataset train;
  WindowedDataset test;
  std::size_t train_length = 0;  // timestamps in the training range
};

/// Splits the series chronologically, fits the scaler on the training part
/// and windows each part separately so no window straddles the boundary.
PreparedData prepare_data(const FarmSeries& series, std::size_t T,
                          std::size_t n_max, std::size_t target,
                          double train_fraction);

/// The six sites of the NREL extract used as the default synthetic layout.
std::vector<std::string> default_site_ids();
std::vector<LatLon> default_site_coordinates();

double haversine_km(LatLon a, LatLon b);

/// Parameters of the synthetic generator; see synth_correlated.
struct SynthOptions {
  std::vector<std::string> ids = default_site_ids();
  std::vector<LatLon> coords = default_site_coordinates();
  std::size_t length = 5000;
  RngSeed seed{1};
  std::int64_t step_minutes = 10;
  double capacity_mw = 100.0;
  double base_level = 0.35;
  double regional_weight = 0.2;
  double local_weight = 0.05;
  double regional_ar = 0.95;
  double local_ar = 0.9;
  double decay_km = 10.0;
  /// Delay of the regional driver per degree of longitude east of the
  /// westernmost site, in time steps.
  double lag_steps_per_degree = 20.0;
};

/// Spatially correlated synthetic power series.
///
///   R_t      = a_r R_{t-1} + sqrt(1 - a_r²) ε_t                (regional)
///   e_{j,t}  = a_l e_{j,t-1} + sqrt(1 - a_l²) η_{j,t}           (per farm)
///   Z_{i,t}  = Σ_j w_ij e_{j,t},  w_ij ∝ exp(-d_ij / ρ),  Σ_j w_ij² = 1
///   ℓ_i      = round(κ · (lon_i - min lon))
///   P_{i,t}  = C · max(0, μ + α R_{t-ℓ_i} + β Z_{i,t})
///
/// with ε, η i.i.d. standard normal, d_ij the great-circle distance in km.
/// Both AR(1) processes start from their stationary distribution.
/// Deterministic per seed. Throws DataError if N < 2 or length < 100.
FarmSeries synth_correlated(const SynthOptions& options);

}  // namespace stan
