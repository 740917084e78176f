#pragma once

#include <string>
#include <vector>

#include "vsmile/backtest.hpp"

namespace vsmile {

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
};

struct SvgOptions {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;
  int width = 640, height = 420;
};

// Line/marker chart. The plotted values are appended as a CSV table inside an
// XML comment so the artifact stays diff-able and self-describing.
std::string render_svg_lines(const std::vector<SvgSeries>& series, const SvgOptions& options);

// Box-and-whisker chart of a backtest summary (one box per horizon day).
std::string render_svg_boxes(const std::vector<BoxSummary>& summary, const SvgOptions& options);

}  // namespace vsmile
