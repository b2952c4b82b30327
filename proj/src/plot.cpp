#include "stan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "stan/error.hpp"

namespace stan {
namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 160;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
     << "font-size=\"15\">" << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, double y_max, const std::string& x_label,
          const std::string& y_label) {
  const double x0 = kLeft, y0 = kHeight - kBottom;
  const double x1 = kWidth - kRight, y1 = kTop;
  os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\""
     << num(x1) << "\" y2=\"" << num(y0) << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\""
     << num(x0) << "\" y2=\"" << num(y1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_max * i / 4.0;
    const double y = y0 - (y0 - y1) * i / 4.0;
    os << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 4)
       << "\" text-anchor=\"end\">" << label(v) << "</text>\n";
  }
  os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << num((y0 + y1) / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num((y0 + y1) / 2) << ")\">" << escape(y_label) << "</text>\n";
}

void legend(std::ostringstream& os, std::size_t i, const std::string& text) {
  const double x = kWidth - kRight + 16;
  const double y = kTop + 18.0 * static_cast<double>(i);
  os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"12\" "
     << "height=\"12\" fill=\"" << kPalette[i % 8] << "\"/>\n"
     << "<text x=\"" << num(x + 18) << "\" y=\"" << num(y + 10) << "\">"
     << escape(text) << "</text>\n";
}

}  // namespace

std::string render_convergence_svg(const std::vector<LossCurve>& curves) {
  std::size_t max_epoch = 1;
  double max_loss = 0.0;
  for (const auto& c : curves) {
    for (const auto& e : c.epochs) {
      max_epoch = std::max(max_epoch, e.epoch);
      max_loss = std::max(max_loss, e.loss);
    }
  }
  if (max_loss <= 0.0) max_loss = 1.0;
  std::ostringstream os;
  header(os, "Training loss per epoch");
  axes(os, max_loss, "epoch", "MSE (scaled)");
  const double x0 = kLeft, y0 = kHeight - kBottom;
  const double w = kWidth - kRight - kLeft, h = kHeight - kBottom - kTop;
  os << "<text x=\"" << num(x0 + w) << "\" y=\"" << num(y0 + 16)
     << "\" text-anchor=\"end\">" << max_epoch << "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << kPalette[i % 8]
       << "\" points=\"";
    for (const auto& e : curves[i].epochs) {
      const double x = x0 + w * static_cast<double>(e.epoch) / static_cast<double>(max_epoch);
      const double y = y0 - h * e.loss / max_loss;
      os << num(x) << ',' << num(y) << ' ';
    }
    os << "\"/>\n";
    legend(os, i, curves[i].label);
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_rmse_svg(const std::vector<EvalResult>& results) {
  const std::size_t horizons = results.empty() ? 0 : results.front().rmse.size();
  double max_v = 0.0;
  for (const auto& r : results) {
    for (double v : r.rmse) max_v = std::max(max_v, v);
  }
  if (max_v <= 0.0) max_v = 1.0;
  std::ostringstream os;
  header(os, "Test RMSE by horizon");
  axes(os, max_v, "horizon (steps)", "RMSE (MW)");
  const double x0 = kLeft, y0 = kHeight - kBottom;
  const double w = kWidth - kRight - kLeft, h = kHeight - kBottom - kTop;
  const double group_w = horizons == 0 ? w : w / static_cast<double>(horizons);
  const double bar_w =
      results.empty() ? 0 : group_w * 0.8 / static_cast<double>(results.size());
  for (std::size_t k = 0; k < horizons; ++k) {
    const double gx = x0 + group_w * static_cast<double>(k) + group_w * 0.1;
    for (std::size_t m = 0; m < results.size(); ++m) {
      const double bh = h * results[m].rmse[k] / max_v;
      os << "<rect x=\"" << num(gx + bar_w * static_cast<double>(m)) << "\" y=\""
         << num(y0 - bh) << "\" width=\"" << num(bar_w) << "\" height=\""
         << num(bh) << "\" fill=\"" << kPalette[m % 8] << "\"/>\n";
    }
    os << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\"" << num(y0 + 16)
       << "\" text-anchor=\"middle\">" << (k + 1) << "-step</text>\n";
  }
  for (std::size_t m = 0; m < results.size(); ++m) legend(os, m, results[m].method);
  os << "</svg>\n";
  return os.str();
}

std::vector<EvalResult> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("method,", 0) != 0) {
    throw DataError("report CSV must start with a 'method,...' header");
  }
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (columns < 2) throw DataError("report CSV has no RMSE columns");
  const std::size_t horizons = columns - 1;
  std::vector<EvalResult> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::istringstream cells(line);
    std::string cell;
    EvalResult r;
    std::getline(cells, r.method, ',');
    for (std::size_t k = 0; k < horizons; ++k) {
      if (!std::getline(cells, cell, ',')) {
        throw DataError("report row " + std::to_string(row) + " is short");
      }
      try {
        r.rmse.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError("report row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (!std::getline(cells, cell, ',')) {
      throw DataError("report row " + std::to_string(row) + " lacks a sample count");
    }
    r.samples = static_cast<std::size_t>(std::stoull(cell));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace stan
