#pragma once

#include <string>
#include <vector>

#include "pedsurv/survival.hpp"

namespace pedsurv {

struct PlotSeries {
  std::string label;
  SurvivalCurve curve;
  std::string color = "#000000";
  bool bands = true;  // shaded confidence polygon
};

/// Self-contained SVG step plot of one or more survival curves with optional
/// shaded 95% confidence polygons.
std::string render_survival_svg(const std::vector<PlotSeries>& series,
                                const std::string& title, double t_max = 0.0);

}  // namespace pedsurv
