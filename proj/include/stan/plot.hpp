#pragma once

#include <string>
#include <vector>

#include "stan/evaluation.hpp"
#include "stan/training.hpp"

namespace stan {

struct LossCurve {
  std::string label;
  std::vector<EpochRecord> epochs;
};

/// Loss-per-epoch line chart, one polyline per curve, as a standalone SVG.
std::string render_convergence_svg(const std::vector<LossCurve>& curves);

/// Grouped bar chart of RMSE per method and horizon.
std::string render_rmse_svg(const std::vector<EvalResult>& results);

/// Parses a report written by report_csv.
std::vector<EvalResult> parse_report_csv(const std::string& text);

}  // namespace stan
