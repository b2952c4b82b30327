#include "stan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>

#include "stan/error.hpp"

namespace stan {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(pos)));
      return cells;
    }
    cells.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
}

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
  throw DataError("row " + std::to_string(row) + " (line " +
                  std::to_string(row + 1) + "): " + what);
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_iso_minutes(std::string_view s, std::int64_t& minutes) {
  // YYYY-MM-DD[T ]HH:MM[:SS][Z]
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 16 && s.size() != 19) return false;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':') {
    return false;
  }
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), hh) ||
      !parse_int(s.substr(14, 2), mm)) {
    return false;
  }
  if (s.size() == 19) {
    if (s[16] != ':' || !parse_int(s.substr(17, 2), ss)) return false;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss != 0) {
    return false;
  }
  minutes = days_from_civil(y, mo, d) * 1440 + hh * 60 + mm;
  return true;
}

}  // namespace

FarmSeries parse_wide_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: missing header");
  const auto header = split_cells(line);
  if (header.empty() || header.front() != "timestamp") {
    throw DataError("header must start with 'timestamp'");
  }
  if (header.size() < 2) throw DataError("header lists no farm columns");

  FarmSeries series;
  std::set<std::string, std::less<>> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) {
      throw DataError("header column " + std::to_string(c + 1) + " is empty");
    }
    if (!seen.insert(std::string(header[c])).second) {
      throw DataError("duplicate farm id '" + std::string(header[c]) +
                      "' in header");
    }
    series.ids.emplace_back(header[c]);
  }
  const std::size_t n = series.ids.size();

  std::vector<std::vector<double>> columns;  // one per timestamp
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_cells(line);
    if (cells.size() != n + 1) {
      row_error(row, "expected " + std::to_string(n + 1) + " cells, found " +
                         std::to_string(cells.size()));
    }
    std::int64_t ts = 0;
    if (!parse_int(cells[0], ts) && !parse_iso_minutes(cells[0], ts)) {
      row_error(row, "unparseable timestamp '" + std::string(cells[0]) + "'");
    }
    if (!series.timestamps.empty()) {
      const std::int64_t step = ts - series.timestamps.back();
      if (step <= 0) row_error(row, "timestamps are not strictly increasing");
      if (series.timestamps.size() == 1) {
        series.step_minutes = step;
      } else if (step != series.step_minutes) {
        row_error(row, "irregular step " + std::to_string(step) +
                           " min, expected " +
                           std::to_string(series.step_minutes));
      }
    }
    series.timestamps.push_back(ts);

    std::vector<double> values(n);
    for (std::size_t c = 0; c < n; ++c) {
      const std::string_view cell = cells[c + 1];
      if (cell.empty()) row_error(row, "missing value for farm " + series.ids[c]);
      double v = 0.0;
      if (!parse_double(cell, v)) {
        row_error(row, "invalid number '" + std::string(cell) + "' for farm " +
                           series.ids[c]);
      }
      if (!std::isfinite(v)) row_error(row, "non-finite value for farm " + series.ids[c]);
      if (v < 0.0) row_error(row, "negative power for farm " + series.ids[c]);
      values[c] = v;
    }
    columns.push_back(std::move(values));
  }
  if (columns.empty()) throw DataError("CSV has a header but no data rows");

  series.values = Tensor(n, columns.size());
  for (std::size_t t = 0; t < columns.size(); ++t) {
    for (std::size_t f = 0; f < n; ++f) series.values(f, t) = columns[t][f];
  }
  return series;
}

FarmSeries load_wide_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open data file " + path.string());
  return parse_wide_csv(f);
}

void load_metadata_csv(const std::filesystem::path& path, FarmSeries& series) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open metadata file " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw DataError("metadata CSV is empty");
  const auto header = split_cells(line);
  if (header.size() != 3 || header[0] != "id" || header[1] != "lat" ||
      header[2] != "lon") {
    throw DataError("metadata header must be 'id,lat,lon'");
  }
  std::vector<LatLon> coords(series.farms());
  std::vector<bool> found(series.farms(), false);
  std::size_t row = 0;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_cells(line);
    if (cells.size() != 3) row_error(row, "metadata rows need id,lat,lon");
    const auto it = std::find(series.ids.begin(), series.ids.end(), cells[0]);
    if (it == series.ids.end()) {
      row_error(row, "metadata id '" + std::string(cells[0]) +
                         "' is not a farm column");
    }
    const auto idx = static_cast<std::size_t>(it - series.ids.begin());
    if (found[idx]) row_error(row, "duplicate metadata id " + series.ids[idx]);
    LatLon ll;
    if (!parse_double(cells[1], ll.lat) || !parse_double(cells[2], ll.lon) ||
        std::abs(ll.lat) > 90.0 || std::abs(ll.lon) > 180.0) {
      row_error(row, "invalid coordinates for " + series.ids[idx]);
    }
    coords[idx] = ll;
    found[idx] = true;
  }
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!found[i]) throw DataError("metadata lacks farm " + series.ids[i]);
  }
  series.latlon = std::move(coords);
}

void write_wide_csv(const FarmSeries& series, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "timestamp";
  for (const auto& id : series.ids) f << ',' << id;
  f << '\n';
  char buf[64];
  for (std::size_t t = 0; t < series.length(); ++t) {
    f << series.timestamps[t];
    for (std::size_t i = 0; i < series.farms(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.6f", series.values(i, t));
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw IoError("failed writing " + path.string());
}

void write_metadata_csv(const FarmSeries& series,
                        const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "id,lat,lon\n";
  char buf[64];
  for (std::size_t i = 0; i < series.latlon.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.2f,%.2f\n", series.latlon[i].lat,
                  series.latlon[i].lon);
    f << series.ids[i] << buf;
  }
  if (!f) throw IoError("failed writing " + path.string());
}

MinMaxScaler::MinMaxScaler(std::vector<double> min, std::vector<double> max)
    : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != max_.size()) throw ShapeError("scaler: min/max length differ");
  for (std::size_t i = 0; i < min_.size(); ++i) {
    if (max_[i] < min_[i]) throw DataError("scaler: max below min");
  }
}

MinMaxScaler MinMaxScaler::fit(const Tensor& values, std::size_t columns) {
  if (columns == 0 || columns > values.cols()) {
    throw DataError("scaler: cannot fit on " + std::to_string(columns) +
                    " of " + std::to_string(values.cols()) + " timestamps");
  }
  std::vector<double> lo(values.rows()), hi(values.rows());
  for (std::size_t i = 0; i < values.rows(); ++i) {
    const auto row = values.row(i).first(columns);
    lo[i] = *std::min_element(row.begin(), row.end());
    hi[i] = *std::max_element(row.begin(), row.end());
  }
  return MinMaxScaler(std::move(lo), std::move(hi));
}

double MinMaxScaler::apply(std::size_t farm, double v) const {
  const double range = max_[farm] - min_[farm];
  return range > 0.0 ? (v - min_[farm]) / range : 0.0;
}

double MinMaxScaler::invert(std::size_t farm, double v) const {
  return v * (max_[farm] - min_[farm]) + min_[farm];
}

Tensor MinMaxScaler::apply(const Tensor& values) const {
  if (values.rows() != min_.size()) throw ShapeError("scaler: farm count differs");
  Tensor out = values;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (double& v : out.row(i)) v = apply(i, v);
  }
  return out;
}

Tensor MinMaxScaler::invert(const Tensor& values) const {
  if (values.rows() != min_.size()) throw ShapeError("scaler: farm count differs");
  Tensor out = values;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (double& v : out.row(i)) v = invert(i, v);
  }
  return out;
}

WindowedDataset make_windows(const Tensor& scaled, std::size_t T,
                             std::size_t n_max, std::size_t target,
                             std::size_t offset) {
  if (T == 0 || n_max == 0) throw DataError("T and n_max must be >= 1");
  if (target >= scaled.rows()) {
    throw IndexError("target farm " + std::to_string(target) + " out of range for " +
                     std::to_string(scaled.rows()) + " farms");
  }
  const std::size_t L = scaled.cols();
  if (L < T + n_max) {
    throw DataError("series of length " + std::to_string(L) +
                    " is too short: windows need at least T + n_max = " +
                    std::to_string(T + n_max) + " timestamps");
  }
  WindowedDataset ds;
  ds.T = T;
  ds.n_max = n_max;
  ds.target = target;
  const std::size_t count = L - T - n_max + 1;
  ds.samples.reserve(count);
  for (std::size_t t0 = 0; t0 < count; ++t0) {
    Sample s;
    s.window = Tensor(scaled.rows(), T);
    for (std::size_t i = 0; i < scaled.rows(); ++i) {
      std::copy_n(scaled.row(i).begin() + t0, T, s.window.row(i).begin());
    }
    s.targets.resize(n_max);
    for (std::size_t k = 1; k <= n_max; ++k) {
      s.targets[k - 1] = scaled(target, t0 + T - 1 + k);
    }
    s.start = t0 + offset;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::size_t split_point(std::size_t count, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DataError("train fraction must lie strictly between 0 and 1");
  }
  const auto n = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(count)));
  if (n == 0 || n >= count) {
    throw DataError("split of " + std::to_string(count) + " units at " +
                    std::to_string(fraction) + " leaves one side empty");
  }
  return n;
}

std::pair<FarmSeries, FarmSeries> chrono_split(const FarmSeries& series,
                                               double train_fraction) {
  const std::size_t cut = split_point(series.length(), train_fraction);
  auto part = [&](std::size_t begin, std::size_t end) {
    FarmSeries s;
    s.ids = series.ids;
    s.latlon = series.latlon;
    s.step_minutes = series.step_minutes;
    s.timestamps.assign(series.timestamps.begin() + begin,
                        series.timestamps.begin() + end);
    s.values = slice_cols(series.values, begin, end - begin);
    return s;
  };
  return {part(0, cut), part(cut, series.length())};
}

std::pair<WindowedDataset, WindowedDataset> chrono_split(
    const WindowedDataset& ds, double train_fraction) {
  const std::size_t cut = split_point(ds.size(), train_fraction);
  WindowedDataset a{ds.T, ds.n_max, ds.target, {}};
  WindowedDataset b{ds.T, ds.n_max, ds.target, {}};
  a.samples.assign(ds.samples.begin(), ds.samples.begin() + cut);
  b.samples.assign(ds.samples.begin() + cut, ds.samples.end());
  return {std::move(a), std::move(b)};
}

PreparedData prepare_data(const FarmSeries& series, std::size_t T,
                          std::size_t n_max, std::size_t target,
                          double train_fraction) {
  const auto [train, test] = chrono_split(series, train_fraction);
  PreparedData out;
  out.train_length = train.length();
  out.scaler = MinMaxScaler::fit(series.values, train.length());
  out.train = make_windows(out.scaler.apply(train.values), T, n_max, target, 0);
  out.test = make_windows(out.scaler.apply(test.values), T, n_max, target,
                          train.length());
  return out;
}

std::vector<std::string> default_site_ids() {
  return {"SITE_00173", "SITE_00193", "SITE_00215",
          "SITE_00365", "SITE_00446", "SITE_00797"};
}

std::vector<LatLon> default_site_coordinates() {
  return {{36.14, -100.34}, {36.42, -100.44}, {36.42, -100.67},
          {36.50, -100.68}, {36.50, -100.28}, {36.56, -100.54}};
}

double haversine_km(LatLon a, LatLon b) {
  constexpr double kEarthRadiusKm = 6371.0;
  const double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

FarmSeries synth_correlated(const SynthOptions& o) {
  const std::size_t n = o.coords.size();
  if (n < 2) throw DataError("synthetic data needs at least 2 farms");
  if (o.ids.size() != n) throw DataError("synthetic ids and coordinates differ in count");
  if (o.length < 100) throw DataError("synthetic length must be >= 100");

  double west = o.coords.front().lon;
  for (const auto& c : o.coords) west = std::min(west, c.lon);
  std::vector<std::size_t> lag(n);
  std::size_t max_lag = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lag[i] = static_cast<std::size_t>(
        std::lround(o.lag_steps_per_degree * (o.coords[i].lon - west)));
    max_lag = std::max(max_lag, lag[i]);
  }

  Tensor weights(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights(i, j) = std::exp(-haversine_km(o.coords[i], o.coords[j]) / o.decay_km);
      norm += weights(i, j) * weights(i, j);
    }
    for (double& w : weights.row(i)) w /= std::sqrt(norm);
  }

  Rng rng(o.seed);
  const double r_innov = std::sqrt(1.0 - o.regional_ar * o.regional_ar);
  const double l_innov = std::sqrt(1.0 - o.local_ar * o.local_ar);

  std::vector<double> regional(o.length + max_lag);
  regional[0] = rng.normal();
  for (std::size_t t = 1; t < regional.size(); ++t) {
    regional[t] = o.regional_ar * regional[t - 1] + r_innov * rng.normal();
  }

  FarmSeries s;
  s.ids = o.ids;
  s.latlon = o.coords;
  s.step_minutes = o.step_minutes;
  s.values = Tensor(n, o.length);
  s.timestamps.resize(o.length);
  std::vector<double> local(n);
  for (double& e : local) e = rng.normal();
  for (std::size_t t = 0; t < o.length; ++t) {
    s.timestamps[t] = static_cast<std::int64_t>(t) * o.step_minutes;
    if (t > 0) {
      for (double& e : local) e = o.local_ar * e + l_innov * rng.normal();
    }
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += weights(i, j) * local[j];
      // Farm i sees the regional driver ℓ_i steps after the westernmost farm.
      const double r = regional[t + max_lag - lag[i]];
      const double level =
          o.base_level + o.regional_weight * r + o.local_weight * z;
      s.values(i, t) = o.capacity_mw * std::max(0.0, level);
    }
  }
  return s;
}

}  // namespace stan
