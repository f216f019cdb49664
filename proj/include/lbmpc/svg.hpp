#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lbmpc {

// Minimal line-plot emitter: axes with ticks, one polyline per series, an
// optional shaded +-1 std-error band around the first series, and the data
// embedded verbatim in a <metadata> block for round-trip checks.
struct PlotSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_halfwidth;  // optional, same length as x
};

struct PlotSpec {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 760;
  int height = 480;
};

void write_svg_plot(std::ostream& os, const PlotSpec& spec, const std::vector<PlotSeries>& series);

// Extracts the JSON payload stored in the <metadata> block of a plot.
std::string read_svg_metadata(std::istream& is);

}  // namespace lbmpc
