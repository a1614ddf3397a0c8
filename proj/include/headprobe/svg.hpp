#pragma once

#include <string>
#include <vector>

#include "headprobe/evaluation.hpp"

namespace headprobe {

// Self-contained SVG documents (no scripts, fonts or external references). Output is a pure
// function of the inputs, so re-rendering an unchanged report is byte-identical.

std::string line_chart_svg(const std::string& title, const std::string& y_label,
                           const std::vector<CurveSeries>& series);

/// One <rect class="cell"> per (layer, alpha); layers as rows, alphas as columns.
std::string heatmap_svg(const std::string& title, const HeatmapGrid& grid);

}  // namespace headprobe
