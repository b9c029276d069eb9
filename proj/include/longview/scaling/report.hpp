#pragma once

#include <string>
#include <vector>

#include "longview/scaling/fit.hpp"

namespace longview::scaling {

struct FigureSpec {
  std::string title;
  std::vector<ScalingPoint> points;
  double threshold = 90.0;
  double level = 0.95;
};

// Log-x scatter with the OLS line, the pointwise confidence band as a closed
// polygon, the threshold line, the 10-year reference arrow, and a crossing
// annotation when the slope is positive. Needs >= 3 points.
std::string render_figure_svg(const FigureSpec& spec);

}  // namespace longview::scaling
