#pragma once

#include <string>
#include <vector>

namespace fedsim {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart: axes, ticks, one polyline per series, legend.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series);

}  // namespace fedsim
